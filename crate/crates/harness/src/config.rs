//! Run configuration: JSON schema, defaults and validation.
//!
//! Matrices are row-major lists of `[re, im]` pairs. Every struct rejects
//! unknown keys, and parse errors carry the JSON path of the offending key.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use weaklg_core::budget::BudgetInput;
use weaklg_core::invasiveness::DEFAULT_ORDER_UNITY_THRESHOLD;
use weaklg_core::measurement::{PointerModel, Truncation};
use weaklg_core::protocol::{build_series, DynamicsSpec, SeriesPlan};
use weaklg_core::quantum::{spectral_decompose_with, variance, CMatrix, DensityMatrix, Tolerances};
use weaklg_core::Complex64;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Budget,
    LgRun,
    Verify,
    Sweep,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Budget => "budget",
            Self::LgRun => "lg_run",
            Self::Verify => "verify",
            Self::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn json(&self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }

    pub fn csv(&self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }
}

/// Row-major `[re, im]` entries of a square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixRepr(pub Vec<[f64; 2]>);

impl MatrixRepr {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut entries = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Self(entries)
    }

    pub fn to_matrix(&self, dim: usize, key: &str) -> Result<CMatrix> {
        if self.0.len() != dim * dim {
            return Err(HarnessError::validation(
                key,
                format!("expected {} entries for dim {dim}, got {}", dim * dim, self.0.len()),
            ));
        }
        Ok(CMatrix::from_row_iterator(
            dim,
            dim,
            self.0.iter().map(|[re, im]| Complex64::new(*re, *im)),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// State vector as `[re, im]` amplitudes; normalized on load.
    Pure(Vec<[f64; 2]>),
    DensityMatrix(MatrixRepr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSystem {
    pub dim: usize,
    pub hamiltonian: MatrixRepr,
    pub observable: MatrixRepr,
    pub initial_state: InitialState,
    #[serde(default)]
    pub preparation_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Precession {
    #[serde(default = "one")]
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSpec {
    /// Qubit under `H = (omega/2) sigma_x`, measured in `sigma_z`, prepared in `|0>` at `t = 0`.
    Precession(Precession),
    Custom(CustomSystem),
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self::Precession(Precession { omega: 1.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerSpec {
    #[serde(default = "ten")]
    pub delta_p: f64,
    #[serde(default)]
    pub truncation: Truncation,
}

impl Default for PointerSpec {
    fn default() -> Self {
        Self {
            delta_p: 10.0,
            truncation: Truncation::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    #[serde(default = "three")]
    pub k: usize,
    /// Explicit slice times. When absent, slices are `start + i * tau`.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub start: f64,
    #[serde(default = "third_pi")]
    pub tau: f64,
    #[serde(default = "n_strong")]
    pub n_strong_per_series: u64,
    #[serde(default = "n_weak")]
    pub n_weak_per_series: u64,
}

impl Default for PlanSpec {
    fn default() -> Self {
        Self {
            k: 3,
            times: None,
            start: 0.0,
            tau: PI / 3.0,
            n_strong_per_series: n_strong(),
            n_weak_per_series: n_weak(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    #[serde(default = "million")]
    pub m: u64,
    #[serde(default = "four")]
    pub k: u32,
    /// Defaults to the pointer width.
    #[serde(default)]
    pub delta_p: Option<f64>,
    /// Defaults to the observable variance in the initial state.
    #[serde(default)]
    pub var_a: Option<f64>,
    #[serde(default = "threshold")]
    pub order_unity_threshold: f64,
    /// Replicates for the Monte Carlo error check; 0 disables it.
    #[serde(default = "replicates")]
    pub mc_replicates: u64,
}

impl Default for BudgetSpec {
    fn default() -> Self {
        Self {
            m: million(),
            k: 4,
            delta_p: None,
            var_a: None,
            order_unity_threshold: DEFAULT_ORDER_UNITY_THRESHOLD,
            mc_replicates: replicates(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub delta_p: Vec<f64>,
    #[serde(default)]
    pub n: Vec<u64>,
    #[serde(default)]
    pub tau: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// Test hook: feed a non-positive matrix to the positivity check.
    #[serde(default)]
    pub inject_corrupted_state: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_usize")]
    pub worker_count: usize,
    #[serde(default)]
    pub system: SystemSpec,
    #[serde(default)]
    pub pointer: PointerSpec,
    #[serde(default)]
    pub plan: PlanSpec,
    #[serde(default)]
    pub budget: BudgetSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn ten() -> f64 {
    10.0
}
fn three() -> usize {
    3
}
fn four() -> u32 {
    4
}
fn third_pi() -> f64 {
    PI / 3.0
}
fn n_strong() -> u64 {
    100_000
}
fn n_weak() -> u64 {
    1_000_000
}
fn million() -> u64 {
    1_000_000
}
fn threshold() -> f64 {
    DEFAULT_ORDER_UNITY_THRESHOLD
}
fn replicates() -> u64 {
    200
}

impl RunConfig {
    /// Defaults for a scenario.
    pub fn for_scenario(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: 0,
            worker_count: 1,
            system: SystemSpec::default(),
            pointer: PointerSpec::default(),
            plan: PlanSpec::default(),
            budget: BudgetSpec::default(),
            sweep: SweepSpec::default(),
            verify: VerifySpec::default(),
            tolerances: Tolerances::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        if self.worker_count == 0 {
            return Err(HarnessError::validation("worker_count", "must be at least 1"));
        }
        if !(self.tolerances.structural > 0.0) || !(self.tolerances.eigen_gap > 0.0) {
            return Err(HarnessError::validation("tolerances", "tolerances must be positive"));
        }
        self.dynamics()?;
        self.pointer_model()?;
        self.series_plan()?;
        if self.plan.n_strong_per_series < 2 || self.plan.n_weak_per_series < 2 {
            return Err(HarnessError::validation("plan", "need at least 2 events per series"));
        }
        self.budget_input()?
            .validate()
            .map_err(|e| HarnessError::validation("budget", e.to_string()))?;
        if self.scenario == Scenario::Sweep {
            let s = &self.sweep;
            if s.delta_p.is_empty() && s.n.is_empty() && s.tau.is_empty() {
                return Err(HarnessError::validation("sweep", "all sweep grids are empty"));
            }
            if let Some(w) = s.delta_p.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
                return Err(HarnessError::validation(
                    "sweep.delta_p",
                    format!("width {w} is not positive"),
                ));
            }
            if s.n.iter().any(|&n| n < 2) {
                return Err(HarnessError::validation("sweep.n", "need at least 2 events per series"));
            }
            if let Some(t) = s.tau.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
                return Err(HarnessError::validation(
                    "sweep.tau",
                    format!("spacing {t} is not positive"),
                ));
            }
        }
        Ok(())
    }

    pub fn dynamics(&self) -> Result<DynamicsSpec> {
        match &self.system {
            SystemSpec::Precession(p) => {
                if !p.omega.is_finite() {
                    return Err(HarnessError::validation("system.precession.omega", "must be finite"));
                }
                Ok(DynamicsSpec::precession(p.omega))
            }
            SystemSpec::Custom(c) => {
                let key = |k: &str| format!("system.custom.{k}");
                if c.dim == 0 {
                    return Err(HarnessError::validation(&key("dim"), "must be positive"));
                }
                let h = c.hamiltonian.to_matrix(c.dim, &key("hamiltonian"))?;
                let q = c.observable.to_matrix(c.dim, &key("observable"))?;
                let q = spectral_decompose_with(&q, &self.tolerances)
                    .map_err(|e| HarnessError::validation(&key("observable"), e.to_string()))?;
                let rho = match &c.initial_state {
                    InitialState::Pure(amps) => {
                        if amps.len() != c.dim {
                            return Err(HarnessError::validation(
                                &key("initial_state.pure"),
                                format!("expected {} amplitudes, got {}", c.dim, amps.len()),
                            ));
                        }
                        let amps: Vec<Complex64> = amps.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
                        DensityMatrix::pure(&amps)
                    }
                    InitialState::DensityMatrix(m) => DensityMatrix::new_with(
                        m.to_matrix(c.dim, &key("initial_state.density_matrix"))?,
                        &self.tolerances,
                    ),
                }
                .map_err(|e| HarnessError::validation(&key("initial_state"), e.to_string()))?;
                DynamicsSpec::new(&h, q, rho, c.preparation_time)
                    .map_err(|e| HarnessError::validation(&key("hamiltonian"), e.to_string()))
            }
        }
    }

    pub fn pointer_model(&self) -> Result<PointerModel> {
        PointerModel::with_truncation(self.pointer.delta_p, self.pointer.truncation)
            .map_err(|e| HarnessError::validation("pointer.delta_p", e.to_string()))
    }

    pub fn series_plan(&self) -> Result<SeriesPlan> {
        let p = &self.plan;
        let plan = match &p.times {
            Some(times) => build_series(p.k, times),
            None => {
                if !(p.tau > 0.0) {
                    return Err(HarnessError::validation("plan.tau", "spacing must be positive"));
                }
                SeriesPlan::uniform(p.k, p.start, p.tau)
            }
        };
        plan.map_err(|e| HarnessError::validation("plan", e.to_string()))
    }

    /// Budget parameters with defaults filled from the pointer and system.
    pub fn budget_input(&self) -> Result<BudgetInput> {
        let var_a = match self.budget.var_a {
            Some(v) => v,
            None => {
                let d = self.dynamics()?;
                variance(d.initial_state(), d.observable())
                    .map_err(|e| HarnessError::validation("budget.var_a", e.to_string()))?
            }
        };
        Ok(BudgetInput {
            m: self.budget.m,
            k: self.budget.k,
            delta_p: self.budget.delta_p.unwrap_or(self.pointer.delta_p),
            var_a,
            order_unity_threshold: self.budget.order_unity_threshold,
        })
    }
}
