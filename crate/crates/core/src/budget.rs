//! Ensemble budgets for the weak-first and all-strong schemes at equal
//! statistical error.
//!
//! With `M` prepared systems split over `k` series, a weak measurement that
//! gets the whole subensemble `M/k` has error `eps = Delta_p / sqrt(2M/k)`.
//! A strong measurement reaches the same error with
//! `M_s = Var(A) / eps^2 = (Var(A) / Delta_p^2) (2M/k)` systems, so the
//! all-strong scheme needs `M_tot = 2k M_s = 4 Var(A) M / Delta_p^2` in total.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::invasiveness::{wasted_resource, DEFAULT_ORDER_UNITY_THRESHOLD};
use crate::measurement::{MeasurementMode, Sampler};
use crate::quantum::{expectation, DensityMatrix, Observable};
use crate::rng::Streams;

/// Relative slack within which a real-valued count is taken to be an
/// integer before rounding up.
const COUNT_SNAP: f64 = 1e-9;

/// Rounds a non-negative real count up, treating values within a relative
/// `1e-9` of an integer as that integer.
pub fn ceil_count(x: f64) -> u64 {
    let nearest = x.round();
    if (x - nearest).abs() <= COUNT_SNAP * nearest.abs().max(1.0) {
        nearest.max(0.0) as u64
    } else {
        x.ceil().max(0.0) as u64
    }
}

/// Error of each weak measurement when both measurements of a series are
/// weak and share the subensemble: `Delta_p / sqrt(2 (M / 2k)) = Delta_p / sqrt(M/k)`.
pub fn weak_error_both(m: u64, k: u32, delta_p: f64) -> f64 {
    let sub_sub = m as f64 / (2.0 * f64::from(k));
    delta_p / (2.0 * sub_sub).sqrt()
}

/// Target error when the weak measurement gets the whole subensemble:
/// `Delta_p / sqrt(2M/k)`.
pub fn target_error(m: u64, k: u32, delta_p: f64) -> f64 {
    delta_p / (2.0 * m as f64 / f64::from(k)).sqrt()
}

/// Standard error of a strong mean estimate from `n` outcomes.
pub fn strong_error(var_a: f64, n: u64) -> f64 {
    (var_a / n as f64).sqrt()
}

/// Weak error from `n` readings, leading order: `Delta_p / sqrt(2n)`.
pub fn weak_event_error(delta_p: f64, n: u64) -> f64 {
    delta_p / (2.0 * n as f64).sqrt()
}

/// `Var(A) / eps^2` before rounding.
pub fn strong_subensemble_real(var_a: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid("eps", format!("target error must be positive, got {eps}")));
    }
    if !(var_a >= 0.0) || !var_a.is_finite() {
        return Err(invalid("var_a", format!("variance must be non-negative, got {var_a}")));
    }
    Ok(var_a / (eps * eps))
}

/// Strong subensemble size `M_s` for error `eps`, rounded up.
pub fn strong_subensemble(var_a: f64, eps: f64) -> Result<u64> {
    strong_subensemble_real(var_a, eps).map(ceil_count)
}

/// `M_s` from the budget parameters directly: `(Var(A) / Delta_p^2) (2M/k)`.
pub fn strong_subensemble_from_budget(m: u64, k: u32, delta_p: f64, var_a: f64) -> f64 {
    var_a / (delta_p * delta_p) * (2.0 * m as f64 / f64::from(k))
}

/// `M_tot = 4 Var(A) M / Delta_p^2`, rounded up. Independent of `k`.
pub fn total_strong_ensemble(m: u64, _k: u32, delta_p: f64, var_a: f64) -> u64 {
    ceil_count(4.0 * var_a * m as f64 / (delta_p * delta_p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetInput {
    /// Total prepared ensemble.
    pub m: u64,
    /// Time slices.
    pub k: u32,
    pub delta_p: f64,
    /// `(Delta A)^2` of the initial state.
    pub var_a: f64,
    #[serde(default = "default_threshold")]
    pub order_unity_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_ORDER_UNITY_THRESHOLD
}

impl BudgetInput {
    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(invalid("k", format!("need at least 3 time slices, got {}", self.k)));
        }
        if !(self.delta_p > 0.0) || !self.delta_p.is_finite() {
            return Err(invalid("delta_p", format!("must be positive, got {}", self.delta_p)));
        }
        if !(self.var_a >= 0.0) || !self.var_a.is_finite() {
            return Err(invalid("var_a", format!("must be non-negative, got {}", self.var_a)));
        }
        if self.m < 2 * u64::from(self.k) {
            return Err(invalid("m", format!("need M >= 2k = {}, got {}", 2 * self.k, self.m)));
        }
        if !(self.order_unity_threshold > 0.0 && self.order_unity_threshold <= 1.0) {
            return Err(invalid(
                "order_unity_threshold",
                format!("{} is outside (0, 1]", self.order_unity_threshold),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    /// Per-measurement error when both measurements of a series are weak.
    pub eps_weak_both: f64,
    /// Common target error `eps`.
    pub eps_target: f64,
    /// `sqrt(2 Var(A)) / Delta_p`: strong over weak error at equal sample size.
    pub error_ratio_strong_over_weak: f64,
    pub m_s_real: f64,
    pub m_s: u64,
    pub m_tot_real: f64,
    pub m_tot: u64,
    /// `M_tot / M = 4 Var(A) / Delta_p^2`.
    pub m_tot_fraction: f64,
    /// True when the all-strong scheme needs fewer systems than `M`.
    pub strong_dominates: bool,
    /// Leading-order weak invasiveness `Var(A) / Delta_p^2`, capped at 1.
    pub weak_i1: f64,
    pub weak_i2: f64,
    pub waste_weak_per_measurement: u64,
    pub waste_weak_per_measurement_i2: u64,
    pub waste_strong_per_measurement: u64,
    /// Waste over the `k` first-slot measurements of each scheme.
    pub waste_weak_first_total: u64,
    pub waste_all_strong_total: u64,
    /// `waste_strong / waste_weak` per measurement; `None` when the weak waste is zero.
    pub waste_ratio_strong_over_weak: Option<f64>,
}

/// Errors, sizes and wastage for both schemes.
pub fn wastage_report(input: &BudgetInput) -> Result<BudgetReport> {
    input.validate()?;
    let BudgetInput {
        m,
        k,
        delta_p,
        var_a,
        order_unity_threshold,
    } = *input;
    let eps_target = target_error(m, k, delta_p);
    let m_s_real = strong_subensemble_real(var_a, eps_target)?;
    let m_s = ceil_count(m_s_real);
    let two_k = 2 * u64::from(k);
    let m_tot_real = two_k as f64 * m_s_real;
    let m_tot = two_k * m_s;
    let m_tot_fraction = 4.0 * var_a / (delta_p * delta_p);

    let subensemble = m / u64::from(k);
    let weak_i1 = (var_a / (delta_p * delta_p)).min(1.0);
    let weak_i2 = weak_i1 / 2.0;
    let waste_weak = wasted_resource(subensemble, weak_i1, order_unity_threshold)?;
    let waste_weak_i2 = wasted_resource(subensemble, weak_i2, order_unity_threshold)?;
    let waste_strong = m_s;

    Ok(BudgetReport {
        eps_weak_both: weak_error_both(m, k, delta_p),
        eps_target,
        error_ratio_strong_over_weak: (2.0 * var_a).sqrt() / delta_p,
        m_s_real,
        m_s,
        m_tot_real,
        m_tot,
        m_tot_fraction,
        strong_dominates: m_tot_fraction < 1.0,
        weak_i1,
        weak_i2,
        waste_weak_per_measurement: waste_weak,
        waste_weak_per_measurement_i2: waste_weak_i2,
        waste_strong_per_measurement: waste_strong,
        waste_weak_first_total: u64::from(k) * waste_weak,
        waste_all_strong_total: u64::from(k) * waste_strong,
        waste_ratio_strong_over_weak: (waste_weak > 0).then(|| waste_strong as f64 / waste_weak as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloError {
    pub n: u64,
    pub replicates: u64,
    pub truth: f64,
    pub rms_error: f64,
}

/// Root-mean-square error of the sample-mean estimator of `<A>` from `n`
/// readings, over independent replicates. Replicate `r` draws its readings
/// sequentially from `streams.event_rng(r, 0)`.
pub fn monte_carlo_rms(
    rho: &DensityMatrix,
    obs: &Observable,
    mode: &MeasurementMode,
    n: u64,
    replicates: u64,
    streams: &Streams,
) -> Result<MonteCarloError> {
    if n == 0 || replicates == 0 {
        return Err(invalid("n", "need at least one reading and one replicate"));
    }
    let truth = expectation(rho, obs)?;
    let sampler = Sampler::new(rho, obs, mode)?;
    let sq_errors: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = streams.event_rng(r, 0);
            let mut sum = 0.0;
            for _ in 0..n {
                sum += sampler.sample_reading(&mut rng);
            }
            (sum / n as f64 - truth).powi(2)
        })
        .collect();
    let mse = sq_errors.iter().sum::<f64>() / replicates as f64;
    Ok(MonteCarloError {
        n,
        replicates,
        truth,
        rms_error: mse.sqrt(),
    })
}
