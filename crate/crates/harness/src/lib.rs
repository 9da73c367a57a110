//! Seeded experiment driver for `weaklg-core`.
//!
//! A run is described by a JSON [`config::RunConfig`] and produces a
//! [`report::RunReport`]: a budget comparison, an LG run of both schemes,
//! a verification battery, or a parameter sweep. Given the same config and
//! seed the report payload is reproduced bit for bit, for any worker count.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod report;
pub mod scenario;

pub use config::{RunConfig, Scenario};
pub use error::{HarnessError, Result};
pub use report::RunReport;
pub use scenario::run;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "WEAKLG_OUT_DIR";

/// Output directory when none is given on the command line or in the config.
pub const DEFAULT_OUT_DIR: &str = "weaklg-out";
