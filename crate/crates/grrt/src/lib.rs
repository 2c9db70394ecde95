//! Experiment harness, CSV formats and command-line support for
//! [`grrt_core`].
//!
//! The numerical work lives in the `no_std` core; this crate adds
//! randomness, parallel trial execution, configuration files and file IO.

pub mod config;
pub mod design;
mod error;
pub mod harness;
pub mod io;

pub use config::{Algorithm, DesignKind, ExperimentConfig, Fallback, Selector};
pub use design::{gaussian_design, hadamard_identity_design, sylvester_hadamard};
pub use error::{Error, Result};
pub use harness::{
    ks_critical_1pct, ks_statistic, oracle_selectors, run_experiment, sample_instance, trial_rng,
    validate_residual_ratio_law, Experiment, Instance, Outcome, TrialResult,
};
pub use io::{read_matrix, write_matrix, write_results, ResultRow};
