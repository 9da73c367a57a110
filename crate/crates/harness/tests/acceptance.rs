//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use weaklg_core::invasiveness::{measure_invasiveness, predicted_strong};
use weaklg_core::measurement::{
    strong_channel, weak_channel_exact, weak_channel_perturbative, PointerModel, StrongSampler, WeakSampler,
};
use weaklg_core::quantum::{born_weights, max_abs_diff, DensityMatrix, Observable};
use weaklg_core::rng::Streams;
use weaklg_core::{random, Complex64};
use weaklg_harness::config::{CustomSystem, InitialState, MatrixRepr, SystemSpec};
use weaklg_harness::report::{LgPayload, Payload};
use weaklg_harness::scenario::log_log_slope;
use weaklg_harness::{run, RunConfig, Scenario};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn plus() -> DensityMatrix {
    DensityMatrix::pure(&[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap()
}

fn sigma_z() -> Observable {
    Observable::diagonal(&[1.0, -1.0]).unwrap()
}

fn strong_closed_form() -> Outcome {
    let mut rng = Streams::new(101).event_rng(0, 0);
    let mut worst: f64 = 0.0;
    let mut same_expression = true;
    for dim in [2, 3, 5] {
        let obs = random::observable(dim, &mut rng);
        for _ in 0..100 {
            let rho = random::pure_state(dim, &mut rng);
            let target = 1.0 - born_weights(&rho, &obs).unwrap().collision_probability();
            let m = measure_invasiveness(&rho, &strong_channel(&rho, &obs).unwrap()).unwrap();
            worst = worst.max((m.i1 - target).abs()).max((m.i2 - target).abs());
            let p = predicted_strong(&rho, &obs).unwrap();
            same_expression &= p.i1.to_bits() == p.i2.to_bits();
        }
    }
    check(
        worst <= 1e-12 && same_expression,
        format!(
            "300 states, max |I - (1 - sum p^2)| = {worst:.2e} (tol 1e-12); closed-form I1 == I2: {same_expression}"
        ),
    )
}

fn expansion_convergence() -> Outcome {
    let widths = [10.0, 20.0, 40.0, 80.0];
    let gaps: Vec<f64> = widths
        .iter()
        .map(|&w| {
            let pm = PointerModel::new(w).unwrap();
            max_abs_diff(
                weak_channel_exact(&plus(), &sigma_z(), &pm).unwrap().matrix(),
                weak_channel_perturbative(&plus(), &sigma_z(), &pm).unwrap().matrix(),
            )
        })
        .collect();
    let slope = log_log_slope(&widths, &gaps);
    let pm = PointerModel::new(10.0).unwrap();
    let pert = weak_channel_perturbative(&plus(), &sigma_z(), &pm).unwrap().matrix()[(0, 1)];
    let exact = weak_channel_exact(&plus(), &sigma_z(), &pm).unwrap().matrix()[(0, 1)];
    let pert_err = (pert - Complex64::new(0.495, 0.0)).norm();
    let exact_err = (exact - Complex64::new(0.5 * (-0.01f64).exp(), 0.0)).norm();
    check(
        (slope + 4.0).abs() <= 0.1 && pert_err <= 1e-12 && exact_err <= 1e-12,
        format!(
            "slope {slope:.4} (target -4 +/- 0.1); off-diagonal at 10: perturbative {:.12}, exact {:.12}",
            pert.re, exact.re
        ),
    )
}

fn weak_invasiveness_laws() -> Outcome {
    let pm = PointerModel::new(100.0).unwrap();
    let m = measure_invasiveness(&plus(), &weak_channel_exact(&plus(), &sigma_z(), &pm).unwrap()).unwrap();
    let target = 1.0 / (100.0 * 100.0);
    let i1_rel = (m.i1 / target - 1.0).abs();
    let ratio = m.i1 / m.i2;
    check(
        i1_rel <= 0.01 && (ratio / 2.0 - 1.0).abs() <= 0.01,
        format!(
            "I1 = {:.6e} vs Var/Delta^2 = {target:.1e} (rel {i1_rel:.2e}); I1/I2 = {ratio:.5}",
            m.i1
        ),
    )
}

struct Moments {
    weak_mean: f64,
    weak_var: f64,
    strong_mean: f64,
    strong_var: f64,
}

fn moments(mut next: impl FnMut() -> f64, n: usize) -> (f64, f64) {
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let x = next();
        s += x;
        s2 += x * x;
    }
    let mean = s / n as f64;
    (mean, s2 / n as f64 - mean * mean)
}

fn pointer_samples(seed: u64) -> Moments {
    let n = 1_000_000;
    let streams = Streams::new(seed);
    let weak = WeakSampler::new(&plus(), &sigma_z(), &PointerModel::new(10.0).unwrap()).unwrap();
    let mut rng = streams.event_rng(0, 0);
    let (weak_mean, weak_var) = moments(|| weak.sample_reading(&mut rng), n);
    let strong = StrongSampler::new(&plus(), &sigma_z()).unwrap();
    let mut rng = streams.event_rng(1, 0);
    let (strong_mean, strong_var) = moments(|| strong.sample_reading(&mut rng), n);
    Moments {
        weak_mean,
        weak_var,
        strong_mean,
        strong_var,
    }
}

fn pointer_statistics() -> Outcome {
    let m = pointer_samples(4);
    let weak_mean_tol = 5.0 * (51.0f64 / 1e6).sqrt();
    check(
        m.weak_mean.abs() <= weak_mean_tol
            && (m.weak_var / 51.0 - 1.0).abs() <= 0.02
            && m.strong_mean.abs() <= 5e-3
            && (m.strong_var - 1.0).abs() <= 0.02,
        format!(
            "weak mean {:.4} (tol {weak_mean_tol:.4}), var {:.3} (51 +/- 2%); strong mean {:.5} (tol 5e-3), var {:.5}",
            m.weak_mean, m.weak_var, m.strong_mean, m.strong_var
        ),
    )
}

fn benchmark_budget_config() -> RunConfig {
    let h = 0.5f64.sqrt();
    let mut c = RunConfig::for_scenario(Scenario::Budget);
    c.seed = 2024;
    c.worker_count = 4;
    c.system = SystemSpec::Custom(CustomSystem {
        dim: 2,
        hamiltonian: MatrixRepr(vec![[0.0, 0.0]; 4]),
        observable: MatrixRepr(vec![[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [-1.0, 0.0]]),
        initial_state: InitialState::Pure(vec![[h, 0.0], [h, 0.0]]),
        preparation_time: 0.0,
    });
    c.pointer.delta_p = 10.0;
    c.budget.m = 1_000_000;
    c.budget.k = 4;
    c.budget.var_a = Some(1.0);
    c.budget.mc_replicates = 200;
    c
}

fn budget_reproduction() -> Outcome {
    let Payload::Budget(p) = run(&benchmark_budget_config()).map_err(|e| e.to_string())?.payload else {
        return Err("wrong payload".into());
    };
    let r = &p.report;
    let mc = p.monte_carlo.ok_or("Monte Carlo check did not run")?;
    let closed = 4.0 * 1.0 * 1e6 / (10.0 * 10.0);
    check(
        (r.eps_target - 0.0141421).abs() < 1e-7
            && r.m_s == 5000
            && r.m_tot == 40_000
            && r.m_tot as f64 == closed
            && mc.strong.n == 5000
            && mc.strong.rms_error <= 1.1 * r.eps_target,
        format!(
            "eps {:.7}, M_s {}, M_tot {} (4 var M / Delta^2 = {closed}); strong RMS {:.6} <= 1.1 eps = {:.6} over {} replicates",
            r.eps_target,
            r.m_s,
            r.m_tot,
            mc.strong.rms_error,
            1.1 * r.eps_target,
            mc.strong.replicates
        ),
    )
}

fn wastage_comparability() -> Outcome {
    let mut c = benchmark_budget_config();
    c.budget.mc_replicates = 0;
    let Payload::Budget(p) = run(&c).map_err(|e| e.to_string())?.payload else {
        return Err("wrong payload".into());
    };
    let r = p.report;
    check(
        r.waste_weak_per_measurement == 2500
            && r.waste_strong_per_measurement == 5000
            && r.waste_ratio_strong_over_weak == Some(2.0),
        format!(
            "waste per measurement: weak {} vs strong {}, ratio {:?}",
            r.waste_weak_per_measurement, r.waste_strong_per_measurement, r.waste_ratio_strong_over_weak
        ),
    )
}

fn lg_config(workers: usize) -> RunConfig {
    let mut c = RunConfig::for_scenario(Scenario::LgRun);
    c.seed = 7;
    c.worker_count = workers;
    c.pointer.delta_p = 10.0;
    c.plan.k = 3;
    c.plan.tau = std::f64::consts::PI / 3.0;
    c.plan.n_strong_per_series = 100_000;
    c.plan.n_weak_per_series = 1_000_000;
    c
}

fn lg_payload(workers: usize) -> Result<(LgPayload, String), String> {
    let report = run(&lg_config(workers)).map_err(|e| e.to_string())?;
    let json = report.payload_json();
    match report.payload {
        Payload::LgRun(p) => Ok((p, json)),
        _ => Err("wrong payload".into()),
    }
}

fn lg_violation() -> Outcome {
    let (p, _) = lg_payload(1)?;
    let s = p.all_strong.k3.ok_or("no K3")?;
    let w = p.weak_first.k3.ok_or("no K3")?;
    let strong_ok = (s.value - 1.5).abs() <= 3.0 * s.std_error && s.violated;
    let combined = s.std_error.hypot(w.std_error);
    let agree = (w.value - s.value).abs() <= 5.0 * combined;
    // Weak-first per-event variance = all-strong per-event variance + Delta_p^2 / 2.
    let worst_se = p
        .comparison
        .pairs
        .iter()
        .map(|c| c.weak_std_error_relative_deviation.abs())
        .fold(0.0, f64::max);
    let sd_ratios: Vec<String> = p
        .comparison
        .pairs
        .iter()
        .map(|c| format!("{:.3}", c.per_event_sd_ratio.unwrap_or(f64::NAN)))
        .collect();
    check(
        strong_ok && agree && worst_se <= 0.02,
        format!(
            "all-strong K3 {:.4} +/- {:.4} (oracle 1.5, violated {}); weak-first K3 {:.4} +/- {:.4}, |diff| = {:.2} sigma; \
             weak SE vs sqrt(var_strong + Delta^2/2)/sqrt(n): worst rel dev {worst_se:.4} (tol 0.02); \
             per-event sd ratios [{}] vs sqrt(1 + Delta^2/2) = {:.3}",
            s.value,
            s.std_error,
            s.violated,
            w.value,
            w.std_error,
            (w.value - s.value).abs() / combined,
            sd_ratios.join(", "),
            p.comparison.per_event_inflation
        ),
    )
}

fn determinism() -> Outcome {
    let a = pointer_samples(8);
    let b = pointer_samples(8);
    let bits = |m: &Moments| [m.weak_mean, m.weak_var, m.strong_mean, m.strong_var].map(f64::to_bits);
    let samples_identical = bits(&a) == bits(&b);

    let (base, base_json) = lg_payload(1)?;
    let (_, again_json) = lg_payload(1)?;
    let lg_identical = base_json == again_json;

    let mut worst: f64 = 0.0;
    for workers in [2, 8] {
        let (p, _) = lg_payload(workers)?;
        for (x, y) in [(&base.all_strong, &p.all_strong), (&base.weak_first, &p.weak_first)] {
            for (c, d) in x.correlators.iter().zip(&y.correlators) {
                worst = worst
                    .max((c.value - d.value).abs())
                    .max((c.std_error - d.std_error).abs());
            }
        }
    }
    check(
        samples_identical && lg_identical && worst <= 1e-9,
        format!(
            "pointer samples identical: {samples_identical}; lg payload identical: {lg_identical} ({} bytes); \
             max deviation across workers {{1,2,8}}: {worst:.1e} (tol 1e-9)",
            base_json.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("strong invasiveness closed form", strong_closed_form),
        ("weak expansion convergence", expansion_convergence),
        ("weak invasiveness laws", weak_invasiveness_laws),
        ("pointer statistics", pointer_statistics),
        ("budget reproduction", budget_reproduction),
        ("wastage comparability", wastage_comparability),
        ("LG violation end-to-end", lg_violation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {} ({name}) [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {} ({name}) [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
