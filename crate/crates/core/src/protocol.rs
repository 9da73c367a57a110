//! Leggett-Garg series: `k` time slices, the `k` measurement pairs
//! `(1,2), (2,3), ..., (k-1,k), (1,k)`, and two-time correlator estimation.
//!
//! Each series runs on its own freshly prepared subensemble. An event
//! evolves the prepared state to the earlier time, measures (strongly or
//! weakly), evolves the conditional state to the later time and measures
//! strongly. The correlator estimate is the mean product of the two readings.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{evolve_and_read, MeasurementMode, StrongSampler, WeakSampler};
use crate::quantum::{
    check_dims, evolve, pauli, propagator_from_spectrum, spectral_decompose, CMatrix, DensityMatrix, Observable,
    Unitary,
};
use crate::rng::Streams;

/// A pair of 1-based slice labels `(i, j)` with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimePair {
    pub first: usize,
    pub second: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    First,
    Second,
}

/// One measurement of a plan. The first slot of every series is the one the
/// schema requires to be non-invasive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledMeasurement {
    pub series: usize,
    pub slice: usize,
    pub time: f64,
    pub slot: Slot,
    pub non_invasive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPlan {
    times: Vec<f64>,
    pairs: Vec<TimePair>,
}

/// Lays out the `k` series over strictly increasing `times`.
pub fn build_series(k: usize, times: &[f64]) -> Result<SeriesPlan> {
    if k < 3 {
        return Err(Error::InvalidPlan(format!("need at least 3 time slices, got {k}")));
    }
    if times.len() != k {
        return Err(Error::InvalidPlan(format!("{} times given for k = {k}", times.len())));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidPlan(format!("time {t} is not finite")));
    }
    if let Some(w) = times.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidPlan(format!(
            "times must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    let mut pairs: Vec<TimePair> = (1..k)
        .map(|i| TimePair {
            first: i,
            second: i + 1,
        })
        .collect();
    pairs.push(TimePair { first: 1, second: k });
    Ok(SeriesPlan {
        times: times.to_vec(),
        pairs,
    })
}

impl SeriesPlan {
    /// Equally spaced slices `t_1 = start`, `t_{i+1} - t_i = spacing`.
    pub fn uniform(k: usize, start: f64, spacing: f64) -> Result<Self> {
        let times: Vec<f64> = (0..k).map(|i| start + spacing * i as f64).collect();
        build_series(k, &times)
    }

    pub fn k(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn pairs(&self) -> &[TimePair] {
        &self.pairs
    }

    /// Time of 1-based slice `label`.
    pub fn time(&self, label: usize) -> f64 {
        self.times[label - 1]
    }

    /// The `2k` measurements of one execution of the plan.
    pub fn schedule(&self) -> Vec<ScheduledMeasurement> {
        self.pairs
            .iter()
            .enumerate()
            .flat_map(|(s, pair)| {
                [(pair.first, Slot::First), (pair.second, Slot::Second)].map(|(slice, slot)| ScheduledMeasurement {
                    series: s + 1,
                    slice,
                    time: self.time(slice),
                    slot,
                    non_invasive: slot == Slot::First,
                })
            })
            .collect()
    }
}

/// System, observable and preparation for a run.
#[derive(Debug, Clone)]
pub struct DynamicsSpec {
    hamiltonian: Observable,
    observable: Observable,
    initial_state: DensityMatrix,
    preparation_time: f64,
}

impl DynamicsSpec {
    pub fn new(
        hamiltonian: &CMatrix,
        observable: Observable,
        initial_state: DensityMatrix,
        preparation_time: f64,
    ) -> Result<Self> {
        let hamiltonian = spectral_decompose(hamiltonian)?;
        check_dims(hamiltonian.dim(), observable.dim())?;
        check_dims(hamiltonian.dim(), initial_state.dim())?;
        if !preparation_time.is_finite() {
            return Err(crate::error::invalid("preparation_time", "must be finite"));
        }
        Ok(Self {
            hamiltonian,
            observable,
            initial_state,
            preparation_time,
        })
    }

    /// Qubit precessing under `H = (omega / 2) sigma_x`, measured in
    /// `sigma_z`, prepared in `|0>` at `t = 0`.
    pub fn precession(omega: f64) -> Self {
        let h = pauli::x().scale(omega / 2.0);
        let q = Observable::diagonal(&[1.0, -1.0]).expect("diagonal observable");
        let rho = DensityMatrix::from_populations(&[1.0, 0.0]).expect("basis state");
        Self::new(&h, q, rho, 0.0).expect("benchmark is well formed")
    }

    pub fn hamiltonian(&self) -> &Observable {
        &self.hamiltonian
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    pub fn initial_state(&self) -> &DensityMatrix {
        &self.initial_state
    }

    pub fn preparation_time(&self) -> f64 {
        self.preparation_time
    }

    pub fn propagator(&self, duration: f64) -> Unitary {
        propagator_from_spectrum(&self.hamiltonian, duration)
    }

    /// Unmeasured state at time `t`.
    pub fn state_at(&self, t: f64) -> DensityMatrix {
        evolve(&self.initial_state, &self.propagator(t - self.preparation_time)).expect("dims checked at construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorEstimate {
    pub pair: TimePair,
    pub value: f64,
    pub std_error: f64,
    pub n_events: u64,
}

/// Count, mean and sum of squared deviations, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count - 1) as f64
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

/// First-slot sampler of one series, with everything that does not depend
/// on the event precomputed.
enum PreparedSeries {
    Strong {
        first: StrongSampler,
        eigenvalues: Vec<f64>,
        /// Second-slot sampler for each first-slot branch.
        second: Vec<Option<StrongSampler>>,
    },
    Weak {
        first: WeakSampler,
        propagator: Unitary,
    },
}

impl PreparedSeries {
    fn new(dynamics: &DynamicsSpec, t_first: f64, t_second: f64, mode: &MeasurementMode) -> Result<Self> {
        let rho = dynamics.state_at(t_first);
        let propagator = dynamics.propagator(t_second - t_first);
        let obs = dynamics.observable();
        Ok(match mode {
            MeasurementMode::Strong => {
                let first = StrongSampler::new(&rho, obs)?;
                let second = (0..obs.len())
                    .map(|i| {
                        first
                            .posterior(i)
                            .map(|post| StrongSampler::new(&evolve(post, &propagator)?, obs))
                            .transpose()
                    })
                    .collect::<Result<_>>()?;
                Self::Strong {
                    first,
                    eigenvalues: obs.eigenvalues().to_vec(),
                    second,
                }
            }
            MeasurementMode::Weak(pm) => Self::Weak {
                first: WeakSampler::new(&rho, obs, pm)?,
                propagator,
            },
        })
    }

    fn event_product(&self, obs: &Observable, rng: &mut crate::rng::EventRng) -> f64 {
        match self {
            Self::Strong {
                first,
                eigenvalues,
                second,
            } => {
                let i = first.sample_index(rng);
                let r2 = second[i].as_ref().expect("drawn branch has weight").sample_reading(rng);
                eigenvalues[i] * r2
            }
            Self::Weak { first, propagator } => {
                let outcome = first.sample(rng);
                let r2 = evolve_and_read(&outcome.conditional_state, propagator, obs, rng);
                outcome.pointer_reading * r2
            }
        }
    }
}

/// Events per work item. Fixed so that the reduction tree, and hence every
/// reported bit, is independent of the worker count.
pub const DEFAULT_CHUNK: u64 = 8192;

/// Runs the series of a plan, optionally on a worker pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesExecutor {
    workers: usize,
    chunk: u64,
}

impl Default for SeriesExecutor {
    fn default() -> Self {
        Self {
            workers: 1,
            chunk: DEFAULT_CHUNK,
        }
    }
}

impl SeriesExecutor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(crate::error::invalid("workers", "need at least one worker"));
        }
        Ok(Self {
            workers,
            chunk: DEFAULT_CHUNK,
        })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// One correlator per plan pair, in plan order. Event `e` of series `s`
    /// (0-based) draws from `streams.event_rng(s, e)`.
    pub fn run(
        &self,
        plan: &SeriesPlan,
        dynamics: &DynamicsSpec,
        first_mode: &MeasurementMode,
        n_per_series: u64,
        streams: &Streams,
    ) -> Result<Vec<CorrelatorEstimate>> {
        if n_per_series < 2 {
            return Err(crate::error::invalid(
                "n_per_series",
                format!("need at least 2 events, got {n_per_series}"),
            ));
        }
        if plan.times()[0] < dynamics.preparation_time() {
            return Err(Error::InvalidPlan(format!(
                "first slice t_1 = {} precedes preparation at t_0 = {}",
                plan.times()[0],
                dynamics.preparation_time()
            )));
        }
        if !dynamics.observable().is_dichotomic() {
            warn!("observable is not dichotomic; correlators will not be bounded by 1");
        }
        let prepared: Vec<PreparedSeries> = plan
            .pairs()
            .iter()
            .map(|p| PreparedSeries::new(dynamics, plan.time(p.first), plan.time(p.second), first_mode))
            .collect::<Result<_>>()?;

        let chunks_per_series = n_per_series.div_ceil(self.chunk);
        let items: Vec<(usize, u64)> = (0..prepared.len())
            .flat_map(|s| (0..chunks_per_series).map(move |c| (s, c)))
            .collect();
        let obs = dynamics.observable();
        let work = |&(s, c): &(usize, u64)| {
            let start = c * self.chunk;
            let end = (start + self.chunk).min(n_per_series);
            let mut stats = RunningStats::default();
            for e in start..end {
                let mut rng = streams.event_rng(s as u64, e);
                stats.push(prepared[s].event_product(obs, &mut rng));
            }
            stats
        };
        let partials: Vec<RunningStats> = if self.workers == 1 {
            items.iter().map(work).collect()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()
                .map_err(|e| crate::error::invalid("workers", e.to_string()))?;
            pool.install(|| items.par_iter().map(work).collect())
        };

        Ok(plan
            .pairs()
            .iter()
            .zip(partials.chunks(chunks_per_series as usize))
            .map(|(pair, chunks)| {
                let mut total = RunningStats::default();
                for part in chunks {
                    total.merge(part);
                }
                CorrelatorEstimate {
                    pair: *pair,
                    value: total.mean(),
                    std_error: total.std_error(),
                    n_events: total.count(),
                }
            })
            .collect())
    }
}

/// Single-worker [`SeriesExecutor::run`].
pub fn run_series(
    plan: &SeriesPlan,
    dynamics: &DynamicsSpec,
    first_mode: &MeasurementMode,
    n_per_series: u64,
    streams: &Streams,
) -> Result<Vec<CorrelatorEstimate>> {
    SeriesExecutor::default().run(plan, dynamics, first_mode, n_per_series, streams)
}

/// `K3 = C12 + C23 - C13`.
pub fn k3_statistic(c12: f64, c23: f64, c13: f64) -> f64 {
    c12 + c23 - c13
}

/// Macrorealist bound `-3 <= K3 <= 1`.
pub fn lg_satisfied(k3: f64) -> bool {
    (-3.0..=1.0).contains(&k3)
}

/// `K3 = 2 cos(omega tau) - cos(2 omega tau)` for the precessing qubit with
/// equally spaced slices.
pub fn quantum_k3_oracle(omega: f64, tau: f64) -> f64 {
    2.0 * (omega * tau).cos() - (2.0 * omega * tau).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct K3Estimate {
    pub value: f64,
    pub std_error: f64,
    pub violated: bool,
}

impl K3Estimate {
    /// From the three correlators of a `k = 3` plan, in plan order. Series
    /// are independent, so standard errors add in quadrature.
    pub fn from_correlators(c: &[CorrelatorEstimate]) -> Result<Self> {
        let [c12, c23, c13] = c else {
            return Err(Error::InvalidPlan(format!(
                "K3 needs exactly 3 correlators, got {}",
                c.len()
            )));
        };
        let expected = [(1, 2), (2, 3), (1, 3)];
        for (est, (i, j)) in c.iter().zip(expected) {
            if (est.pair.first, est.pair.second) != (i, j) {
                return Err(Error::InvalidPlan(format!(
                    "expected pair ({i},{j}), got ({},{})",
                    est.pair.first, est.pair.second
                )));
            }
        }
        let value = k3_statistic(c12.value, c23.value, c13.value);
        let std_error = (c12.std_error.powi(2) + c23.std_error.powi(2) + c13.std_error.powi(2)).sqrt();
        Ok(Self {
            value,
            std_error,
            violated: !lg_satisfied(value),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::PointerModel;
    use std::f64::consts::PI;

    #[test]
    fn three_slice_pairs() {
        let plan = build_series(3, &[0.0, 1.0, 2.0]).unwrap();
        let pairs: Vec<_> = plan.pairs().iter().map(|p| (p.first, p.second)).collect();
        assert_eq!(pairs, vec![(1, 2), (2, 3), (1, 3)]);
    }

    #[test]
    fn four_slice_pairs() {
        let plan = build_series(4, &[0.0, 0.5, 1.0, 3.0]).unwrap();
        let pairs: Vec<_> = plan.pairs().iter().map(|p| (p.first, p.second)).collect();
        assert_eq!(pairs, vec![(1, 2), (2, 3), (3, 4), (1, 4)]);
    }

    #[test]
    fn invalid_plans() {
        assert!(matches!(build_series(3, &[0.0, 0.0, 1.0]), Err(Error::InvalidPlan(_))));
        assert!(matches!(build_series(2, &[0.0, 1.0]), Err(Error::InvalidPlan(_))));
        assert!(matches!(build_series(3, &[0.0, 1.0]), Err(Error::InvalidPlan(_))));
        assert!(matches!(build_series(3, &[0.0, 2.0, 1.0]), Err(Error::InvalidPlan(_))));
        assert!(matches!(
            build_series(3, &[0.0, f64::NAN, 1.0]),
            Err(Error::InvalidPlan(_))
        ));
    }

    #[test]
    fn schedule_labels_half_as_non_invasive() {
        for k in 3..9 {
            let plan = SeriesPlan::uniform(k, 0.0, 1.0).unwrap();
            let events = plan.schedule();
            assert_eq!(events.len(), 2 * k);
            assert_eq!(events.iter().filter(|e| e.non_invasive).count(), k);
            assert!(events.iter().filter(|e| e.non_invasive).all(|e| e.slot == Slot::First));
            // Both measurements at t_1 are first-slot; neither at t_k is.
            let at = |slice| events.iter().filter(move |e: &&ScheduledMeasurement| e.slice == slice);
            assert!(at(1).all(|e| e.non_invasive));
            assert!(at(k).all(|e| !e.non_invasive));
            assert_eq!(at(1).count(), 2);
        }
    }

    #[test]
    fn k3_examples() {
        assert!((k3_statistic(0.5, 0.5, -0.5) - 1.5).abs() < 1e-15);
        assert!(!lg_satisfied(1.5));
        assert_eq!(k3_statistic(1.0, 1.0, 1.0), 1.0);
        assert!(lg_satisfied(1.0));
        assert_eq!(k3_statistic(-1.0, -1.0, 1.0), -3.0);
        assert!(lg_satisfied(-3.0));
        assert!(!lg_satisfied(-3.0001));
    }

    #[test]
    fn oracle_examples() {
        assert!((quantum_k3_oracle(1.0, PI / 3.0) - 1.5).abs() < 1e-12);
        assert_eq!(quantum_k3_oracle(1.0, 0.0), 1.0);
        assert!((quantum_k3_oracle(1.0, PI / 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn running_stats_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0 - 3.0).collect();
        let mut whole = RunningStats::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut merged = RunningStats::default();
        for chunk in xs.chunks(77) {
            let mut part = RunningStats::default();
            chunk.iter().for_each(|&x| part.push(x));
            merged.merge(&part);
        }
        assert_eq!(merged.count(), whole.count());
        assert!((merged.mean() - whole.mean()).abs() < 1e-12);
        assert!((merged.variance() - whole.variance()).abs() < 1e-10);
    }

    #[test]
    fn strong_first_products_are_dichotomic_and_track_cosine() {
        let dynamics = DynamicsSpec::precession(1.0);
        let tau = 0.7;
        let plan = SeriesPlan::uniform(3, 0.3, tau).unwrap();
        let n = 100_000;
        let est = run_series(&plan, &dynamics, &MeasurementMode::Strong, n, &Streams::new(1)).unwrap();
        for (e, gap) in est.iter().zip([tau, tau, 2.0 * tau]) {
            assert_eq!(e.n_events, n);
            assert!(e.value.abs() <= 1.0);
            assert!((e.value - gap.cos()).abs() < 5.0 * e.std_error, "{e:?}");
            // Products are +-1, so the sample variance is 1 - mean^2 (n/(n-1)).
            let var = e.std_error.powi(2) * n as f64;
            assert!((var - (1.0 - e.value * e.value) * n as f64 / (n - 1) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn nearly_coincident_slices_give_unit_correlator() {
        let dynamics = DynamicsSpec::precession(1.0);
        let plan = SeriesPlan::uniform(3, 0.4, 1e-6).unwrap();
        let est = run_series(&plan, &dynamics, &MeasurementMode::Strong, 10_000, &Streams::new(2)).unwrap();
        for e in &est {
            assert!(e.value > 0.999, "{e:?}");
        }
    }

    #[test]
    fn weak_first_agrees_in_mean() {
        let dynamics = DynamicsSpec::precession(1.0);
        let plan = SeriesPlan::uniform(3, 0.0, PI / 3.0).unwrap();
        let pm = PointerModel::new(10.0).unwrap();
        let est = run_series(&plan, &dynamics, &MeasurementMode::Weak(pm), 200_000, &Streams::new(3)).unwrap();
        for (e, expected) in est.iter().zip([0.5, 0.5, -0.5]) {
            assert!((e.value - expected).abs() < 5.0 * e.std_error, "{e:?}");
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let dynamics = DynamicsSpec::precession(1.0);
        let plan = SeriesPlan::uniform(3, 0.0, 0.9).unwrap();
        let pm = PointerModel::new(10.0).unwrap();
        for mode in [MeasurementMode::Strong, MeasurementMode::Weak(pm)] {
            let n = 3 * DEFAULT_CHUNK + 17;
            let base = SeriesExecutor::new(1)
                .unwrap()
                .run(&plan, &dynamics, &mode, n, &Streams::new(4))
                .unwrap();
            for w in [2, 8] {
                let other = SeriesExecutor::new(w)
                    .unwrap()
                    .run(&plan, &dynamics, &mode, n, &Streams::new(4))
                    .unwrap();
                assert_eq!(base, other);
            }
        }
    }

    #[test]
    fn run_rejects_bad_inputs() {
        let dynamics = DynamicsSpec::precession(1.0);
        let plan = SeriesPlan::uniform(3, 0.0, 1.0).unwrap();
        assert!(run_series(&plan, &dynamics, &MeasurementMode::Strong, 1, &Streams::new(0)).is_err());
        let early = SeriesPlan::uniform(3, -1.0, 1.0).unwrap();
        assert!(run_series(&early, &dynamics, &MeasurementMode::Strong, 10, &Streams::new(0)).is_err());
        assert!(SeriesExecutor::new(0).is_err());
    }

    #[test]
    fn k3_estimate_checks_pairs() {
        let mk = |first, second, value| CorrelatorEstimate {
            pair: TimePair { first, second },
            value,
            std_error: 0.01,
            n_events: 10,
        };
        let k = K3Estimate::from_correlators(&[mk(1, 2, 0.5), mk(2, 3, 0.5), mk(1, 3, -0.5)]).unwrap();
        assert!((k.value - 1.5).abs() < 1e-15);
        assert!(k.violated);
        assert!((k.std_error - 0.03f64.sqrt() * 0.1).abs() < 1e-12);
        assert!(K3Estimate::from_correlators(&[mk(1, 2, 0.5), mk(2, 3, 0.5)]).is_err());
        assert!(K3Estimate::from_correlators(&[mk(1, 2, 0.5), mk(2, 3, 0.5), mk(1, 4, 0.5)]).is_err());
    }
}
