use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::greedy::SupportTrace;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A special-function argument outside its domain.
    Domain { what: &'static str, value: f64 },
    /// Inconsistent sizes, parameters or hyper-parameters.
    Config(String),
    /// A design column with zero (or non-finite) norm.
    ZeroColumn { column: usize },
    /// The listed columns (zero-based) are numerically collinear.
    RankDeficient { columns: Vec<usize> },
    /// A greedy run hit a rank failure under a rule that cannot truncate.
    GreedyRank {
        columns: Vec<usize>,
        partial: Box<SupportTrace>,
    },
    /// Every block has already been selected.
    Exhausted,
    /// Two LASSO path events coincide within tolerance.
    PathTie { variables: Vec<usize>, lambda: f64 },
    /// Requested lambda lies below the computed part of the path.
    Extrapolation { lambda: f64, floor: f64 },
    /// Fewer distinct variables than requested for aggregation.
    InsufficientVariables { requested: usize, available: usize },
    /// Selection over a sequence with no steps.
    EmptyTrace,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::ZeroColumn { column } => {
                write!(f, "column {column} has zero norm and cannot be normalized")
            }
            Error::RankDeficient { columns } => {
                write!(f, "rank deficient column set {columns:?}")
            }
            Error::GreedyRank { columns, partial } => write!(
                f,
                "rank failure after {} greedy steps adding columns {columns:?}",
                partial.len()
            ),
            Error::Exhausted => f.write_str("all blocks already selected"),
            Error::PathTie { variables, lambda } => write!(
                f,
                "simultaneous path events for variables {variables:?} at lambda {lambda}"
            ),
            Error::Extrapolation { lambda, floor } => write!(
                f,
                "lambda {lambda} lies below the computed path (floor {floor})"
            ),
            Error::InsufficientVariables {
                requested,
                available,
            } => write!(
                f,
                "requested {requested} aggregated supports but only {available} distinct variables appeared"
            ),
            Error::EmptyTrace => f.write_str("support sequence has no steps"),
        }
    }
}

impl core::error::Error for Error {}
