//! Run reports and their JSON / CSV emission.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use weaklg_core::budget::{BudgetInput, BudgetReport, MonteCarloError};
use weaklg_core::protocol::{CorrelatorEstimate, K3Estimate, TimePair};

use crate::config::{OutputFormat, RunConfig, Scenario};
use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: &str = "weaklg.report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: String,
    pub scenario: Scenario,
    pub seed: u64,
    /// The configuration as run, with defaults resolved.
    pub config: RunConfig,
    pub payload: Payload,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub worker_count: usize,
    pub started_unix_ms: u128,
    pub wall_clock_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Payload {
    Budget(BudgetPayload),
    LgRun(LgPayload),
    Verify(VerifyPayload),
    Sweep(SweepPayload),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPayload {
    pub input: BudgetInput,
    pub report: BudgetReport,
    pub monte_carlo: Option<BudgetMonteCarlo>,
}

/// Sample-mean errors of both schemes on the configured state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetMonteCarlo {
    /// Variance of the observable in the configured initial state.
    pub var_state: f64,
    pub eps_target: f64,
    pub strong: MonteCarloError,
    pub weak: MonteCarloError,
    pub strong_within_1_1_eps: bool,
    pub weak_within_10_percent_of_eps: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub k: usize,
    pub times: Vec<f64>,
    pub pairs: Vec<TimePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub n_per_series: u64,
    pub correlators: Vec<CorrelatorEstimate>,
    /// Present for three-slice plans.
    pub k3: Option<K3Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LgPayload {
    pub plan: PlanSummary,
    /// Analytic `K3` for the precession benchmark on an evenly spaced three-slice plan.
    pub k3_oracle: Option<f64>,
    pub all_strong: SchemeResult,
    pub weak_first: SchemeResult,
    pub comparison: SchemeComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeComparison {
    pub delta_p: f64,
    /// `sqrt(1 + Delta_p^2 / 2)`: pointer inflation of a unit per-event spread.
    pub per_event_inflation: f64,
    pub pairs: Vec<PairComparison>,
    pub k3_difference: Option<f64>,
    pub k3_combined_std_error: Option<f64>,
}

/// Weak-first against all-strong for one pair. The weak-first per-event
/// variance is the all-strong one plus the pointer variance `Delta_p^2 / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub pair: TimePair,
    pub difference: f64,
    pub combined_std_error: f64,
    /// Standard errors as reported, weak-first over all-strong; `None` when
    /// the all-strong products do not fluctuate.
    pub std_error_ratio: Option<f64>,
    /// Per-event standard deviations, weak-first over all-strong.
    pub per_event_sd_ratio: Option<f64>,
    pub predicted_weak_std_error: f64,
    pub weak_std_error_relative_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    OutOfRegime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    /// Worst observed deviation (or the observed statistic).
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeState {
    InitialState,
    /// Equal superposition of one eigenvector per eigenvalue, used when the
    /// initial state has no spread in the observable.
    BalancedSuperposition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyPayload {
    pub probe: ProbeState,
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub metric: String,
    pub metric_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub axis: String,
    pub metric: String,
    pub slope: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPayload {
    pub probe: ProbeState,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<SlopeFit>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Payload alone; identical across reruns with the same config and seed.
    pub fn payload_json(&self) -> String {
        serde_json::to_string(&self.payload).expect("payload serializes")
    }

    /// Writes `report.json` and the scenario's CSV tables into `dir`.
    /// Returns the written paths.
    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|source| io_error(dir, source))?;
        let mut written = Vec::new();
        if format.json() {
            let path = dir.join("report.json");
            let mut f = File::create(&path).map_err(|source| io_error(&path, source))?;
            writeln!(f, "{}", self.to_json()).map_err(|source| io_error(&path, source))?;
            written.push(path);
        }
        if format.csv() {
            match &self.payload {
                Payload::Budget(p) => written.push(write_budget_csv(dir, p)?),
                Payload::LgRun(p) => {
                    written.push(write_correlators(
                        &dir.join("correlators_all_strong.csv"),
                        &p.all_strong.correlators,
                    )?);
                    written.push(write_correlators(
                        &dir.join("correlators_weak_first.csv"),
                        &p.weak_first.correlators,
                    )?);
                }
                Payload::Verify(p) => written.push(write_rows(&dir.join("verify.csv"), &p.checks)?),
                Payload::Sweep(p) => written.push(write_rows(&dir.join("sweep.csv"), &p.rows)?),
            }
        }
        Ok(written)
    }
}

fn io_error(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_error(path: &Path, source: csv::Error) -> HarnessError {
    HarnessError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|source| io_error(path, source))?;
    Ok(path.to_path_buf())
}

#[derive(Serialize)]
struct CorrelatorRow {
    pair_i: usize,
    pair_j: usize,
    value: f64,
    std_error: f64,
    n_events: u64,
}

pub fn write_correlators(path: &Path, correlators: &[CorrelatorEstimate]) -> Result<PathBuf> {
    let rows: Vec<CorrelatorRow> = correlators
        .iter()
        .map(|c| CorrelatorRow {
            pair_i: c.pair.first,
            pair_j: c.pair.second,
            value: c.value,
            std_error: c.std_error,
            n_events: c.n_events,
        })
        .collect();
    write_rows(path, &rows)
}

#[derive(Serialize)]
struct BudgetRow {
    quantity: &'static str,
    weak_first: f64,
    all_strong: f64,
}

fn write_budget_csv(dir: &Path, p: &BudgetPayload) -> Result<PathBuf> {
    let r = &p.report;
    let k = f64::from(p.input.k);
    let rows = [
        BudgetRow {
            quantity: "error_per_measurement",
            weak_first: r.eps_target,
            all_strong: r.eps_target,
        },
        BudgetRow {
            quantity: "ensemble_required",
            weak_first: p.input.m as f64,
            all_strong: r.m_tot as f64,
        },
        BudgetRow {
            quantity: "subensemble_per_measurement",
            weak_first: (p.input.m / u64::from(p.input.k)) as f64,
            all_strong: r.m_s as f64,
        },
        BudgetRow {
            quantity: "waste_per_measurement",
            weak_first: r.waste_weak_per_measurement as f64,
            all_strong: r.waste_strong_per_measurement as f64,
        },
        BudgetRow {
            quantity: "waste_total",
            weak_first: r.waste_weak_first_total as f64,
            all_strong: r.waste_all_strong_total as f64,
        },
        BudgetRow {
            quantity: "measurements",
            weak_first: k,
            all_strong: 2.0 * k,
        },
    ];
    write_rows(&dir.join("budget_comparison.csv"), &rows)
}
