//! Strong and weak quantum measurement models, their invasiveness, the
//! Leggett-Garg series schema, and ensemble budgets comparing a weak-first
//! protocol against an all-strong one at equal statistical error.
//!
//! * [`quantum`]: observables, density matrices, expectations, purity,
//!   overlap, unitary evolution.
//! * [`measurement`]: projective and Gaussian-pointer channels, samplers and
//!   pointer statistics.
//! * [`invasiveness`]: purity-drop and overlap-deficit measures, closed forms
//!   and the wasted-resource rule.
//! * [`protocol`]: series planning, correlator estimation, `K3`.
//! * [`budget`]: errors, ensemble sizes and wastage for both schemes.
//! * [`rng`]: counter-addressed random streams.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod budget;
pub mod error;
pub mod invasiveness;
pub mod measurement;
pub mod protocol;
pub mod quantum;
pub mod random;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64;
