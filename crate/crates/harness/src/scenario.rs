//! The four scenarios: budget, LG run, verification battery and sweeps.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::info;
use weaklg_core::budget::{
    monte_carlo_rms, strong_subensemble, strong_subensemble_from_budget, strong_subensemble_real, target_error,
    wastage_report, BudgetInput,
};
use weaklg_core::invasiveness::{measure_invasiveness, predicted_strong, predicted_weak};
use weaklg_core::measurement::{
    strong_channel, weak_channel_exact, weak_channel_perturbative, MeasurementMode, PointerModel,
};
use weaklg_core::protocol::{
    quantum_k3_oracle, CorrelatorEstimate, DynamicsSpec, K3Estimate, SeriesExecutor, SeriesPlan,
};
use weaklg_core::quantum::{
    born_weights, expectation, expectation_direct, max_abs_diff, max_asymmetry, spectral_decompose, variance, CMatrix,
    DensityMatrix,
};
use weaklg_core::rng::Streams;
use weaklg_core::Complex64;

use crate::config::{RunConfig, Scenario, SystemSpec};
use crate::error::{HarnessError, Result};
use crate::report::{
    BudgetMonteCarlo, BudgetPayload, CheckResult, CheckStatus, LgPayload, Metadata, PairComparison, Payload,
    PlanSummary, ProbeState, RunReport, SchemeComparison, SchemeResult, SlopeFit, SweepPayload, SweepRow,
    VerifyPayload, SCHEMA_VERSION,
};

const ALL_STRONG_STREAMS: u64 = 1;
const WEAK_FIRST_STREAMS: u64 = 2;
const MC_STRONG_STREAMS: u64 = 10;
const MC_WEAK_STREAMS: u64 = 11;
const SWEEP_STREAMS: u64 = 100;

/// Validates `config` and runs its scenario.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let clock = Instant::now();
    info!("running {} with seed {}", config.scenario.as_str(), config.seed);
    let payload = match config.scenario {
        Scenario::Budget => Payload::Budget(run_budget(config)?),
        Scenario::LgRun => Payload::LgRun(run_lg(config)?),
        Scenario::Verify => Payload::Verify(run_verify(config)?),
        Scenario::Sweep => Payload::Sweep(run_sweep(config)?),
    };
    Ok(RunReport {
        schema_version: SCHEMA_VERSION.to_string(),
        scenario: config.scenario,
        seed: config.seed,
        config: config.clone(),
        payload,
        metadata: Metadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            worker_count: config.worker_count,
            started_unix_ms: started,
            wall_clock_ms: clock.elapsed().as_millis(),
        },
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::validation("worker_count", e.to_string()))
}

pub fn run_budget(config: &RunConfig) -> Result<BudgetPayload> {
    let input = config.budget_input()?;
    let report = wastage_report(&input)?;
    let monte_carlo = if config.budget.mc_replicates > 0 {
        budget_monte_carlo(config, &input)?
    } else {
        None
    };
    Ok(BudgetPayload {
        input,
        report,
        monte_carlo,
    })
}

fn budget_monte_carlo(config: &RunConfig, input: &BudgetInput) -> Result<Option<BudgetMonteCarlo>> {
    let dynamics = config.dynamics()?;
    let (rho, obs) = (dynamics.initial_state(), dynamics.observable());
    let var_state = variance(rho, obs)?;
    if var_state <= 0.0 {
        info!("initial state has no spread in the observable; skipping the Monte Carlo check");
        return Ok(None);
    }
    let eps = target_error(input.m, input.k, input.delta_p);
    let n_strong = strong_subensemble(var_state, eps)?;
    let n_weak = input.m / u64::from(input.k);
    let pm = PointerModel::with_truncation(input.delta_p, config.pointer.truncation)?;
    let streams = Streams::new(config.seed);
    let reps = config.budget.mc_replicates;
    let (strong, weak) = pool(config.worker_count)?.install(|| {
        Ok::<_, weaklg_core::Error>((
            monte_carlo_rms(
                rho,
                obs,
                &MeasurementMode::Strong,
                n_strong,
                reps,
                &streams.substream(MC_STRONG_STREAMS),
            )?,
            monte_carlo_rms(
                rho,
                obs,
                &MeasurementMode::Weak(pm),
                n_weak,
                reps,
                &streams.substream(MC_WEAK_STREAMS),
            )?,
        ))
    })?;
    Ok(Some(BudgetMonteCarlo {
        var_state,
        eps_target: eps,
        strong_within_1_1_eps: strong.rms_error <= 1.1 * eps,
        weak_within_10_percent_of_eps: (weak.rms_error / eps - 1.0).abs() <= 0.1,
        strong,
        weak,
    }))
}

fn plan_summary(plan: &SeriesPlan) -> PlanSummary {
    PlanSummary {
        k: plan.k(),
        times: plan.times().to_vec(),
        pairs: plan.pairs().to_vec(),
    }
}

fn scheme(correlators: Vec<CorrelatorEstimate>, n_per_series: u64) -> Result<SchemeResult> {
    let k3 = if correlators.len() == 3 {
        Some(K3Estimate::from_correlators(&correlators)?)
    } else {
        None
    };
    Ok(SchemeResult {
        n_per_series,
        correlators,
        k3,
    })
}

/// Oracle value when the plan is the evenly spaced three-slice precession benchmark.
fn k3_oracle(config: &RunConfig, plan: &SeriesPlan) -> Option<f64> {
    let SystemSpec::Precession(p) = &config.system else {
        return None;
    };
    let t = plan.times();
    if t.len() != 3 {
        return None;
    }
    let tau = t[1] - t[0];
    ((t[2] - t[1] - tau).abs() <= 1e-12 * tau.abs().max(1.0)).then(|| quantum_k3_oracle(p.omega, tau))
}

fn all_strong(
    config: &RunConfig,
    plan: &SeriesPlan,
    dynamics: &DynamicsSpec,
    n: u64,
    streams: &Streams,
) -> Result<SchemeResult> {
    let exec = SeriesExecutor::new(config.worker_count)?;
    scheme(exec.run(plan, dynamics, &MeasurementMode::Strong, n, streams)?, n)
}

pub fn run_lg(config: &RunConfig) -> Result<LgPayload> {
    let dynamics = config.dynamics()?;
    let plan = config.series_plan()?;
    let pm = config.pointer_model()?;
    let streams = Streams::new(config.seed);
    let exec = SeriesExecutor::new(config.worker_count)?;
    let (n_s, n_w) = (config.plan.n_strong_per_series, config.plan.n_weak_per_series);

    let strong = all_strong(config, &plan, &dynamics, n_s, &streams.substream(ALL_STRONG_STREAMS))?;
    let weak = scheme(
        exec.run(
            &plan,
            &dynamics,
            &MeasurementMode::Weak(pm),
            n_w,
            &streams.substream(WEAK_FIRST_STREAMS),
        )?,
        n_w,
    )?;

    let pointer_var = pm.width() * pm.width() / 2.0;
    let pairs = strong
        .correlators
        .iter()
        .zip(&weak.correlators)
        .map(|(s, w)| {
            let sd_s = s.std_error * (s.n_events as f64).sqrt();
            let sd_w = w.std_error * (w.n_events as f64).sqrt();
            let predicted = ((sd_s * sd_s + pointer_var) / w.n_events as f64).sqrt();
            PairComparison {
                pair: s.pair,
                difference: w.value - s.value,
                combined_std_error: s.std_error.hypot(w.std_error),
                std_error_ratio: (s.std_error > 0.0).then(|| w.std_error / s.std_error),
                per_event_sd_ratio: (sd_s > 0.0).then(|| sd_w / sd_s),
                predicted_weak_std_error: predicted,
                weak_std_error_relative_deviation: w.std_error / predicted - 1.0,
            }
        })
        .collect();
    let (k3_difference, k3_combined_std_error) = match (&strong.k3, &weak.k3) {
        (Some(s), Some(w)) => (Some(w.value - s.value), Some(s.std_error.hypot(w.std_error))),
        _ => (None, None),
    };
    Ok(LgPayload {
        plan: plan_summary(&plan),
        k3_oracle: k3_oracle(config, &plan),
        all_strong: strong,
        weak_first: weak,
        comparison: SchemeComparison {
            delta_p: pm.width(),
            per_event_inflation: (1.0 + pointer_var).sqrt(),
            pairs,
            k3_difference,
            k3_combined_std_error,
        },
    })
}

/// The initial state when it has spread in the observable, otherwise an
/// equal superposition of one eigenvector per eigenvalue.
pub fn probe_state(dynamics: &DynamicsSpec) -> Result<(ProbeState, DensityMatrix)> {
    let (rho, obs) = (dynamics.initial_state(), dynamics.observable());
    if variance(rho, obs)? > 0.0 || obs.len() < 2 {
        return Ok((ProbeState::InitialState, rho.clone()));
    }
    let dim = obs.dim();
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    for p in obs.projectors() {
        let col = (0..dim)
            .max_by(|&a, &b| p.column(a).norm().total_cmp(&p.column(b).norm()))
            .expect("non-empty");
        let v = p.column(col);
        let norm = v.norm();
        for (a, x) in amps.iter_mut().zip(v.iter()) {
            *a += x / norm;
        }
    }
    Ok((ProbeState::BalancedSuperposition, DensityMatrix::pure(&amps)?))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

struct Battery(Vec<CheckResult>);

impl Battery {
    fn push(&mut self, name: &str, ok: bool, measured: f64, threshold: f64, detail: impl Into<String>) {
        self.0.push(CheckResult {
            name: name.to_string(),
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            measured,
            threshold,
            detail: detail.into(),
        });
    }

    fn out_of_regime(&mut self, name: &str, measured: f64, threshold: f64, detail: impl Into<String>) {
        self.0.push(CheckResult {
            name: name.to_string(),
            status: CheckStatus::OutOfRegime,
            measured,
            threshold,
            detail: detail.into(),
        });
    }
}

fn min_eigenvalue(m: &CMatrix) -> f64 {
    spectral_decompose(m)
        .map(|o| o.eigenvalues().last().copied().unwrap_or(0.0))
        .unwrap_or(f64::NAN)
}

/// `rho + 2 (|0><0| - |1><1|)`: Hermitian, unit trace, not positive.
fn corrupt(rho: &DensityMatrix) -> CMatrix {
    let mut m = rho.matrix().clone();
    if m.nrows() >= 2 {
        m[(0, 0)] += 2.0;
        m[(1, 1)] -= 2.0;
    } else {
        m[(0, 0)] = Complex64::new(-1.0, 0.0);
    }
    m
}

pub fn run_verify(config: &RunConfig) -> Result<VerifyPayload> {
    let dynamics = config.dynamics()?;
    let pm = config.pointer_model()?;
    let obs = dynamics.observable();
    let tol = config.tolerances;
    let (probe_kind, probe) = probe_state(&dynamics)?;
    let states = [dynamics.initial_state().clone(), probe.clone()];
    let mut b = Battery(Vec::new());

    let candidate = if config.verify.inject_corrupted_state {
        corrupt(dynamics.initial_state())
    } else {
        dynamics.initial_state().matrix().clone()
    };
    let accepted = DensityMatrix::new_with(candidate.clone(), &tol);
    b.push(
        "positivity",
        accepted.is_ok(),
        min_eigenvalue(&candidate),
        -tol.structural,
        match accepted {
            Ok(_) => "initial state is a valid density matrix".to_string(),
            Err(e) => e.to_string(),
        },
    );

    let mut worst: f64 = 0.0;
    for rho in &states {
        let outs = [
            strong_channel(rho, obs)?,
            weak_channel_exact(rho, obs, &pm)?,
            weak_channel_perturbative(rho, obs, &pm)?,
        ];
        for (i, out) in outs.iter().enumerate() {
            worst = worst.max((out.trace() - 1.0).abs()).max(max_asymmetry(out.matrix()));
            // The truncated channel is only positive in the weak regime.
            if i < 2 {
                worst = worst.max(-out.min_eigenvalue());
            }
        }
    }
    b.push(
        "channel_sanity",
        worst <= 1e-12,
        worst,
        1e-12,
        "trace, hermiticity and positivity of channel outputs",
    );

    let d = obs.spectral_diameter();
    if pm.is_weak_regime(obs) {
        let widths: Vec<f64> = [1.0, 2.0, 4.0, 8.0].iter().map(|f| f * pm.width()).collect();
        let gaps = widths
            .iter()
            .map(|&w| {
                let p = PointerModel::new(w)?;
                Ok(max_abs_diff(
                    weak_channel_exact(&probe, obs, &p)?.matrix(),
                    weak_channel_perturbative(&probe, obs, &p)?.matrix(),
                ))
            })
            .collect::<Result<Vec<f64>>>()?;
        let slope = log_log_slope(&widths, &gaps);
        b.push(
            "expansion_convergence",
            (slope + 4.0).abs() <= 0.1,
            slope,
            -4.0,
            format!("log-log slope of the truncation gap over widths {widths:?}; tolerance 0.1"),
        );
    } else {
        b.out_of_regime(
            "expansion_convergence",
            pm.width(),
            5.0 * d,
            "pointer width below five spectral diameters; the expansion is not expected to converge",
        );
    }

    let mut strong_dev: f64 = 0.0;
    for rho in states.iter().filter(|r| r.purity() >= 1.0 - 1e-9) {
        let m = measure_invasiveness(rho, &strong_channel(rho, obs)?)?;
        let p = predicted_strong(rho, obs)?;
        strong_dev = strong_dev.max((m.i1 - p.i1).abs()).max((m.i2 - p.i2).abs());
    }
    b.push(
        "strong_invasiveness",
        strong_dev <= 1e-12,
        strong_dev,
        1e-12,
        "measured I1, I2 against 1 - sum p^2",
    );

    if pm.is_weak_regime(obs) && probe.purity() >= 1.0 - 1e-9 {
        let m = measure_invasiveness(&probe, &weak_channel_exact(&probe, obs, &pm)?)?;
        let p = predicted_weak(&probe, obs, &pm)?;
        let r = (d / pm.width()).powi(4);
        let bound = r / 8.0;
        let dev = (m.i1 - p.i1).abs().max(4.0 * (m.i2 - p.i2).abs());
        b.push(
            "weak_invasiveness",
            dev <= bound,
            dev,
            bound,
            "leading-order I1 = Var/Delta^2, I2 = I1/2 within the next-order remainder",
        );
        // Each pair contributes 1 + exp(-x_ij) to the ratio, so the gap to 2
        // is at most 1 - exp(-x_max); attained for two-level spectra.
        let ratio = m.i1 / m.i2;
        let ratio_bound = (1.0 - (-pm.expansion_parameter(obs)).exp()) * (1.0 + 1e-9) + 1e-12;
        b.push(
            "ratio_law",
            m.i2 > 0.0 && (ratio - 2.0).abs() <= ratio_bound,
            (ratio - 2.0).abs(),
            ratio_bound,
            format!("I1 / I2 = {ratio} against 2"),
        );
    } else {
        let why = "pointer outside the weak regime or mixed probe state";
        b.out_of_regime("weak_invasiveness", pm.width(), 5.0 * d, why);
        b.out_of_regime("ratio_law", pm.width(), 5.0 * d, why);
    }

    let mut spread_dev: f64 = 0.0;
    let mut route_dev: f64 = 0.0;
    for rho in &states {
        let var = variance(rho, obs)?;
        let spread = born_weights(rho, obs)?.pairwise_spread(obs.eigenvalues());
        spread_dev = spread_dev.max((spread - 2.0 * var).abs() / var.max(1.0));
        route_dev = route_dev.max((expectation(rho, obs)? - expectation_direct(rho, obs)?).abs());
    }
    b.push(
        "variance_identity",
        spread_dev <= 1e-12,
        spread_dev,
        1e-12,
        "sum p_i p_j (a_i - a_j)^2 = 2 Var",
    );
    b.push(
        "expectation_routes",
        route_dev <= 1e-10,
        route_dev,
        1e-10,
        "spectral and direct expectation agree",
    );

    let input = config.budget_input()?;
    let report = wastage_report(&input)?;
    let via_eps = strong_subensemble_real(input.var_a, report.eps_target)?;
    let direct = strong_subensemble_from_budget(input.m, input.k, input.delta_p, input.var_a);
    let mut budget_dev = (via_eps - direct).abs() / direct.max(1.0);
    budget_dev = budget_dev
        .max((report.m_tot_real - 2.0 * f64::from(input.k) * report.m_s_real).abs() / report.m_tot_real.max(1.0));
    let exact_total = report.m_tot == 2 * u64::from(input.k) * report.m_s;
    b.push(
        "budget_consistency",
        budget_dev <= 1e-9 && exact_total,
        budget_dev,
        1e-9,
        "M_s from eps against the direct form; M_tot = 2k M_s",
    );

    let all_passed = b.0.iter().all(|c| c.status != CheckStatus::Fail);
    Ok(VerifyPayload {
        probe: probe_kind,
        checks: b.0,
        all_passed,
    })
}

struct Rows(Vec<SweepRow>);

impl Rows {
    fn push(&mut self, axis: &str, value: f64, metric: &str, metric_value: f64) {
        self.0.push(SweepRow {
            axis: axis.to_string(),
            value,
            metric: metric.to_string(),
            metric_value,
        });
    }
}

fn fit(axis: &str, metric: &str, points: &[(f64, f64)], expected: f64) -> Option<SlopeFit> {
    let usable: Vec<(f64, f64)> = points.iter().copied().filter(|(x, y)| *x > 0.0 && *y > 0.0).collect();
    if usable.len() < 2 {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
    Some(SlopeFit {
        axis: axis.to_string(),
        metric: metric.to_string(),
        slope: log_log_slope(&xs, &ys),
        expected,
    })
}

/// Headline statistic of an all-strong run: K3 when defined, else the first correlator.
fn headline(s: &SchemeResult) -> (f64, f64) {
    match &s.k3 {
        Some(k) => (k.value, k.std_error),
        None => (s.correlators[0].value, s.correlators[0].std_error),
    }
}

pub fn run_sweep(config: &RunConfig) -> Result<SweepPayload> {
    let dynamics = config.dynamics()?;
    let obs = dynamics.observable();
    let (probe_kind, probe) = probe_state(&dynamics)?;
    let streams = Streams::new(config.seed);
    let mut rows = Rows(Vec::new());
    let mut fits = Vec::new();
    let base_budget = config.budget_input()?;

    let mut i1_points = Vec::new();
    for &w in &config.sweep.delta_p {
        let pm = PointerModel::with_truncation(w, config.pointer.truncation)?;
        let m = measure_invasiveness(&probe, &weak_channel_exact(&probe, obs, &pm)?)?;
        rows.push("delta_p", w, "i1", m.i1);
        rows.push("delta_p", w, "i2", m.i2);
        if probe.purity() >= 1.0 - 1e-9 {
            rows.push("delta_p", w, "i1_leading_order", predicted_weak(&probe, obs, &pm)?.i1);
        }
        let r = wastage_report(&BudgetInput {
            delta_p: w,
            ..base_budget
        })?;
        rows.push("delta_p", w, "eps_target", r.eps_target);
        rows.push("delta_p", w, "m_s", r.m_s as f64);
        rows.push("delta_p", w, "m_tot", r.m_tot as f64);
        rows.push(
            "delta_p",
            w,
            "waste_weak_per_measurement",
            r.waste_weak_per_measurement as f64,
        );
        rows.push(
            "delta_p",
            w,
            "waste_strong_per_measurement",
            r.waste_strong_per_measurement as f64,
        );
        i1_points.push((w, m.i1));
    }
    fits.extend(fit("delta_p", "i1", &i1_points, -2.0));

    let plan = config.series_plan()?;
    let mut se_points = Vec::new();
    for (i, &n) in config.sweep.n.iter().enumerate() {
        let s = all_strong(
            config,
            &plan,
            &dynamics,
            n,
            &streams.substream(SWEEP_STREAMS + i as u64),
        )?;
        let (value, se) = headline(&s);
        let name = if s.k3.is_some() { "k3" } else { "c_first_pair" };
        rows.push("n", n as f64, name, value);
        rows.push("n", n as f64, &format!("{name}_std_error"), se);
        se_points.push((n as f64, se));
    }
    let se_name = if plan.k() == 3 {
        "k3_std_error"
    } else {
        "c_first_pair_std_error"
    };
    fits.extend(fit("n", se_name, &se_points, -0.5));

    let offset = SWEEP_STREAMS + config.sweep.n.len() as u64;
    for (i, &tau) in config.sweep.tau.iter().enumerate() {
        let plan = SeriesPlan::uniform(config.plan.k, config.plan.start, tau)?;
        let s = all_strong(
            config,
            &plan,
            &dynamics,
            config.plan.n_strong_per_series,
            &streams.substream(offset + i as u64),
        )?;
        let (value, se) = headline(&s);
        let name = if s.k3.is_some() { "k3" } else { "c_first_pair" };
        rows.push("tau", tau, name, value);
        rows.push("tau", tau, &format!("{name}_std_error"), se);
        if let Some(oracle) = k3_oracle(config, &plan) {
            rows.push("tau", tau, "k3_oracle", oracle);
        }
    }

    Ok(SweepPayload {
        probe: probe_kind,
        rows: rows.0,
        fits,
    })
}
