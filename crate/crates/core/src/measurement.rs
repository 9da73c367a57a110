//! Strong (projective) and weak (Gaussian pointer) measurements.
//!
//! Pointer convention: readings are in eigenvalue units, and a weak pointer
//! of width `Delta_p` has position variance `Delta_p^2 / 2`. The pointer
//! amplitude for branch `a` is the real Gaussian
//! `phi(p - a) = (2 pi s^2)^(-1/4) exp(-(p - a)^2 / (4 s^2))` with
//! `s^2 = Delta_p^2 / 2`, so that averaging over readings damps the coherence
//! between eigenspaces `i` and `j` by `exp(-(a_i - a_j)^2 / (4 Delta_p^2))`.

use std::f64::consts::SQRT_2;

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quantum::{check_dims, evolve_matrix, raw_weights, CMatrix, DensityMatrix, Observable, Unitary};

/// The pointer is "weak" only if it is this many spectral diameters wide.
pub const WEAK_REGIME_FACTOR: f64 = 5.0;
/// Second-order expansion is flagged when `(a_i - a_j)^2 / (4 Delta_p^2)` exceeds this.
pub const EXPANSION_VALIDITY_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Keep terms through order `Delta_p^-2`.
    PerturbativeO2,
    /// Closed-form Gaussian damping.
    #[default]
    Exact,
}

/// Weak-measurement apparatus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerModel {
    width: f64,
    #[serde(default)]
    truncation: Truncation,
}

impl PointerModel {
    pub fn new(width: f64) -> Result<Self> {
        Self::with_truncation(width, Truncation::Exact)
    }

    pub fn with_truncation(width: f64, truncation: Truncation) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(invalid(
                "delta_p",
                format!("pointer width must be positive and finite, got {width}"),
            ));
        }
        Ok(Self { width, truncation })
    }

    /// `Delta_p`.
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    /// Standard deviation of the pointer position, `Delta_p / sqrt(2)`.
    pub fn position_sd(&self) -> f64 {
        self.width / SQRT_2
    }

    /// False when the pointer is narrower than five spectral diameters.
    pub fn is_weak_regime(&self, obs: &Observable) -> bool {
        self.width >= WEAK_REGIME_FACTOR * obs.spectral_diameter()
    }

    /// Largest `(a_i - a_j)^2 / (4 Delta_p^2)` over the spectrum.
    pub fn expansion_parameter(&self, obs: &Observable) -> f64 {
        let d = obs.spectral_diameter();
        d * d / (4.0 * self.width * self.width)
    }

    fn damping(&self, ai: f64, aj: f64) -> f64 {
        (-(ai - aj).powi(2) / (4.0 * self.width * self.width)).exp()
    }
}

/// How the first measurement of a series is performed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum MeasurementMode {
    Strong,
    Weak(PointerModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub pointer_reading: f64,
    pub conditional_state: DensityMatrix,
    pub mode: MeasurementKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointerStatistics {
    pub mean: f64,
    pub variance: f64,
}

/// `sum_ij c_ij P_i rho P_j`.
fn weighted_blocks(rho: &CMatrix, obs: &Observable, coeff: impl Fn(usize, usize) -> f64) -> CMatrix {
    let dim = obs.dim();
    let mut out = CMatrix::zeros(dim, dim);
    for (i, pi) in obs.projectors().iter().enumerate() {
        let left = pi * rho;
        for (j, pj) in obs.projectors().iter().enumerate() {
            let c = coeff(i, j);
            if c != 0.0 {
                out += (&left * pj).scale(c);
            }
        }
    }
    out
}

/// `sum_i P_i rho P_i`.
pub fn strong_channel(rho: &DensityMatrix, obs: &Observable) -> Result<DensityMatrix> {
    check_dims(obs.dim(), rho.dim())?;
    let out = weighted_blocks(rho.matrix(), obs, |i, j| if i == j { 1.0 } else { 0.0 });
    Ok(DensityMatrix::from_trusted(out))
}

/// Unconditional post-measurement state for a Gaussian pointer:
/// `rho_ij -> rho_ij exp(-(a_i - a_j)^2 / (4 Delta_p^2))` in the eigenbasis.
pub fn weak_channel_exact(rho: &DensityMatrix, obs: &Observable, pm: &PointerModel) -> Result<DensityMatrix> {
    check_dims(obs.dim(), rho.dim())?;
    let a = obs.eigenvalues();
    let out = weighted_blocks(rho.matrix(), obs, |i, j| pm.damping(a[i], a[j]));
    Ok(DensityMatrix::from_trusted(out))
}

/// Second-order expansion of the weak channel:
/// `rho - (1 / 4 Delta_p^2) sum_ij (a_i - a_j)^2 P_i rho P_j`.
///
/// Logs a warning when the expansion parameter exceeds
/// [`EXPANSION_VALIDITY_LIMIT`]; the result is still returned.
pub fn weak_channel_perturbative(rho: &DensityMatrix, obs: &Observable, pm: &PointerModel) -> Result<DensityMatrix> {
    check_dims(obs.dim(), rho.dim())?;
    let x = pm.expansion_parameter(obs);
    if x > EXPANSION_VALIDITY_LIMIT {
        warn!(
            "second-order weak channel used outside its range: (a_i-a_j)^2/(4 Delta_p^2) = {x:.3} > {EXPANSION_VALIDITY_LIMIT}"
        );
    }
    let a = obs.eigenvalues();
    let scale = 1.0 / (4.0 * pm.width() * pm.width());
    let correction = weighted_blocks(rho.matrix(), obs, |i, j| scale * (a[i] - a[j]).powi(2));
    Ok(DensityMatrix::from_trusted(rho.matrix() - correction))
}

/// Weak channel at the pointer model's configured truncation.
pub fn weak_channel(rho: &DensityMatrix, obs: &Observable, pm: &PointerModel) -> Result<DensityMatrix> {
    match pm.truncation() {
        Truncation::Exact => weak_channel_exact(rho, obs, pm),
        Truncation::PerturbativeO2 => weak_channel_perturbative(rho, obs, pm),
    }
}

/// Inverse-CDF draw over the canonical eigenvalue order. Zero-weight
/// branches are never returned.
fn draw_branch<R: Rng + ?Sized>(cdf: &[f64], weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    for (i, &c) in cdf.iter().enumerate() {
        if u < c && weights[i] > 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).expect("weights sum to one")
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

/// Projective measurement of one fixed state, prepared for repeated sampling.
#[derive(Debug, Clone)]
pub struct StrongSampler {
    eigenvalues: Vec<f64>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
    /// `P_i rho P_i / p_i`, `None` for zero-weight branches.
    posteriors: Vec<Option<DensityMatrix>>,
}

impl StrongSampler {
    pub fn new(rho: &DensityMatrix, obs: &Observable) -> Result<Self> {
        check_dims(obs.dim(), rho.dim())?;
        let weights = raw_weights(rho.matrix(), obs);
        let posteriors = obs
            .projectors()
            .iter()
            .zip(&weights)
            .map(|(p, &w)| (w > 0.0).then(|| DensityMatrix::from_trusted((p * rho.matrix() * p).unscale(w))))
            .collect();
        Ok(Self {
            eigenvalues: obs.eigenvalues().to_vec(),
            cdf: cumulative(&weights),
            weights,
            posteriors,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the eigenvalue that was found.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw_branch(&self.cdf, &self.weights, rng)
    }

    pub fn sample_reading<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.eigenvalues[self.sample_index(rng)]
    }

    pub fn posterior(&self, index: usize) -> Option<&DensityMatrix> {
        self.posteriors[index].as_ref()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MeasurementOutcome {
        let i = self.sample_index(rng);
        MeasurementOutcome {
            pointer_reading: self.eigenvalues[i],
            conditional_state: self.posteriors[i].clone().expect("drawn branch has weight"),
            mode: MeasurementKind::Strong,
        }
    }
}

/// Draws one projective outcome. Equivalent to `StrongSampler::new(..)?.sample(rng)`.
pub fn strong_sample<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    obs: &Observable,
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    Ok(StrongSampler::new(rho, obs)?.sample(rng))
}

/// Reading of a projective measurement on a raw state matrix, without
/// building the post-measurement state.
pub(crate) fn strong_reading_of<R: Rng + ?Sized>(rho: &CMatrix, obs: &Observable, rng: &mut R) -> f64 {
    let weights = raw_weights(rho, obs);
    obs.eigenvalues()[draw_branch(&cumulative(&weights), &weights, rng)]
}

/// Gaussian-pointer measurement of one fixed state, prepared for repeated
/// sampling.
///
/// A reading is drawn from `sum_i p_i N(a_i, Delta_p^2 / 2)`. The
/// conditional state is `sum_ij phi(p - a_i) phi(p - a_j) P_i rho P_j`,
/// normalized by its trace.
#[derive(Debug, Clone)]
pub struct WeakSampler {
    eigenvalues: Vec<f64>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
    position_sd: f64,
    blocks: Vec<Vec<CMatrix>>,
}

impl WeakSampler {
    pub fn new(rho: &DensityMatrix, obs: &Observable, pm: &PointerModel) -> Result<Self> {
        check_dims(obs.dim(), rho.dim())?;
        let weights = raw_weights(rho.matrix(), obs);
        let blocks = obs
            .projectors()
            .iter()
            .map(|pi| {
                let left = pi * rho.matrix();
                obs.projectors().iter().map(|pj| &left * pj).collect()
            })
            .collect();
        Ok(Self {
            eigenvalues: obs.eigenvalues().to_vec(),
            cdf: cumulative(&weights),
            weights,
            position_sd: pm.position_sd(),
            blocks,
        })
    }

    /// Pointer reading only.
    pub fn sample_reading<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let i = draw_branch(&self.cdf, &self.weights, rng);
        let z: f64 = rng.sample(StandardNormal);
        self.eigenvalues[i] + self.position_sd * z
    }

    /// Unnormalized-then-normalized conditional state for a given reading.
    pub fn conditional_state(&self, reading: f64) -> DensityMatrix {
        let var4 = 4.0 * self.position_sd * self.position_sd;
        // Exponents are shifted by the smallest one among occupied branches so
        // that far-tail readings do not underflow every amplitude.
        let exponents: Vec<f64> = self.eigenvalues.iter().map(|a| (reading - a).powi(2) / var4).collect();
        let shift = exponents
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(e, _)| *e)
            .fold(f64::INFINITY, f64::min);
        let amps: Vec<f64> = exponents.iter().map(|e| (shift - e).exp()).collect();

        let dim = self.blocks[0][0].nrows();
        let mut m = CMatrix::zeros(dim, dim);
        for (i, row) in self.blocks.iter().enumerate() {
            for (j, block) in row.iter().enumerate() {
                let c = amps[i] * amps[j];
                if c != 0.0 {
                    m.zip_apply(block, |x, b| *x += b * c);
                }
            }
        }
        let norm: f64 = amps.iter().zip(&self.weights).map(|(a, w)| a * a * w).sum();
        m.unscale_mut(norm);
        DensityMatrix::from_trusted(m)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MeasurementOutcome {
        let reading = self.sample_reading(rng);
        MeasurementOutcome {
            pointer_reading: reading,
            conditional_state: self.conditional_state(reading),
            mode: MeasurementKind::Weak,
        }
    }
}

/// Draws one weak-measurement outcome. Equivalent to `WeakSampler::new(..)?.sample(rng)`.
pub fn weak_sample<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    obs: &Observable,
    pm: &PointerModel,
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    Ok(WeakSampler::new(rho, obs, pm)?.sample(rng))
}

/// Closed-form pointer mean and variance.
pub fn pointer_statistics(rho: &DensityMatrix, obs: &Observable, mode: &MeasurementMode) -> Result<PointerStatistics> {
    let w = crate::quantum::born_weights(rho, obs)?;
    let mean = w.mean(obs.eigenvalues());
    let var_a = w.variance(obs.eigenvalues());
    let variance = match mode {
        MeasurementMode::Strong => var_a,
        MeasurementMode::Weak(pm) => pm.width() * pm.width() / 2.0 + var_a,
    };
    Ok(PointerStatistics { mean, variance })
}

/// Either sampler, chosen by [`MeasurementMode`].
#[derive(Debug, Clone)]
pub enum Sampler {
    Strong(StrongSampler),
    Weak(WeakSampler),
}

impl Sampler {
    pub fn new(rho: &DensityMatrix, obs: &Observable, mode: &MeasurementMode) -> Result<Self> {
        Ok(match mode {
            MeasurementMode::Strong => Self::Strong(StrongSampler::new(rho, obs)?),
            MeasurementMode::Weak(pm) => Self::Weak(WeakSampler::new(rho, obs, pm)?),
        })
    }

    pub fn sample_reading<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Strong(s) => s.sample_reading(rng),
            Self::Weak(s) => s.sample_reading(rng),
        }
    }
}

/// `U sigma U^dagger` followed by a projective reading; the second slot of a series.
pub(crate) fn evolve_and_read<R: Rng + ?Sized>(
    state: &DensityMatrix,
    u: &Unitary,
    obs: &Observable,
    rng: &mut R,
) -> f64 {
    strong_reading_of(&evolve_matrix(state.matrix(), u), obs, rng)
}
