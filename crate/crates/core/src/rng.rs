//! Counter-based random streams.
//!
//! Every Monte Carlo event draws from its own ChaCha8 generator addressed by
//! `(seed, stream, counter)`: the seed is expanded into the 256-bit key, the
//! stream selects the ChaCha nonce, and the counter selects a block offset of
//! `2^32` words. Two events never share words, and the numbers an event sees
//! do not depend on which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The generator handed to samplers.
pub type EventRng = ChaCha8Rng;

const WORDS_PER_EVENT_LOG2: u32 = 32;

/// SplitMix64 step; used only to expand seeds and derive sub-seeds.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A family of independent event streams derived from one 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an unrelated family, e.g. one per scheme or per replicate.
    pub fn substream(&self, tag: u64) -> Self {
        let mut state = self.seed ^ tag.wrapping_mul(0xD605_BBB5_8C8A_BBFD);
        splitmix64(&mut state);
        Self {
            seed: splitmix64(&mut state),
        }
    }

    /// Generator for event `counter` of stream `stream`.
    pub fn event_rng(&self, stream: u64, counter: u64) -> EventRng {
        let mut state = self.seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(counter) << WORDS_PER_EVENT_LOG2);
        rng
    }
}
