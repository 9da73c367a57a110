//! Random states, Hermitian matrices and unitaries for property checks.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::quantum::{propagator_from_spectrum, spectral_decompose, CMatrix, DensityMatrix, Observable, Unitary};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-distributed pure state.
pub fn pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let amps: Vec<Complex64> = (0..dim).map(|_| gaussian(rng)).collect();
    DensityMatrix::pure(&amps).expect("gaussian vector is nonzero")
}

/// Hermitian matrix with GUE-like entries.
pub fn hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    (&g + g.adjoint()).scale(0.5)
}

/// Observable with a random eigenbasis and generic spectrum.
pub fn observable<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Observable {
    spectral_decompose(&hermitian(dim, rng)).expect("hermitian by construction")
}

/// `exp(-i H)` for a random Hermitian `H`.
pub fn unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Unitary {
    let h = observable(dim, rng);
    let u = propagator_from_spectrum(&h, 1.0);
    Unitary::new(u.matrix().clone()).expect("exponential of Hermitian is unitary")
}

/// Full-rank mixed state `G G^dagger / tr(G G^dagger)`.
pub fn density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m.unscale_mut(tr);
    let m = (&m + m.adjoint()).scale(0.5);
    DensityMatrix::new(m).expect("G G^dagger is a state")
}
