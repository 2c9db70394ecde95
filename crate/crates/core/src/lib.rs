//! Residual ratio thresholding for sparse support recovery.
//!
//! This crate is the allocation-only numerical core: special functions for
//! the Beta law, an incremental least-squares engine, the OMP family of
//! greedy pursuits, a LARS/LASSO path solver, and the residual-ratio
//! selector that picks a support out of a nested sequence without knowing
//! the sparsity or the noise level.
//!
//! Everything here is `no_std` and only needs `alloc`. Randomness, IO and
//! parallel experiment plumbing live in the companion `grrt` crate.
//!
//! Column and block indices are zero-based throughout the library API.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;

pub mod greedy;
pub mod grrt;
pub mod lasso;
pub mod linalg;
pub mod specfun;

pub use error::{Error, Result};
pub use greedy::{run_greedy, Scenario, ScenarioKind, StoppingRule, SupportTrace, Termination};
pub use grrt::{
    default_kmax, grrt_select, minimal_superset_step, FallbackPolicy, GrrtResult, PosRule,
    SupportSequence, ThresholdProfile,
};
pub use lasso::{
    aggregate_supports, baseline_lambda, lasso_aggregated, lasso_fixed_lambda,
    lasso_fixed_lambda_baseline, lasso_path, lasso_path_with, AggregatedSequence, Knot,
    KnotSequence, PathEvent, PathOptions,
};
pub use linalg::{DesignMatrix, LsFactorization, Matrix};
