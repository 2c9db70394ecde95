//! Generic OMP framework covering OMP, SOMP, BOMP and BMMV-OMP.
//!
//! Each iteration picks the block whose columns correlate most with the
//! previous residual, adds it to the support and re-projects the
//! observations. The four algorithms differ only in the correlation norm,
//! and all four reduce to the Frobenius norm of `X[:, I_j]ᵀ R`: for a scalar
//! that is the absolute value and for a row or column it is the vector `l2`
//! norm.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::grrt::residual_ratio;
use crate::linalg::{DesignMatrix, LsFactorization, Matrix};
use crate::{Error, Result};

/// Which of the four measurement models a `(L, l_b)` pair describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// `L = 1`, `l_b = 1`.
    Smv,
    /// `L > 1`, `l_b = 1`.
    Mmv,
    /// `L = 1`, `l_b > 1`.
    Bsmv,
    /// `L > 1`, `l_b > 1`.
    Bmmv,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Smv => "smv",
            ScenarioKind::Mmv => "mmv",
            ScenarioKind::Bsmv => "bsmv",
            ScenarioKind::Bmmv => "bmmv",
        }
    }

    /// Name of the OMP variant used in this scenario.
    pub fn greedy_name(self) -> &'static str {
        match self {
            ScenarioKind::Smv => "omp",
            ScenarioKind::Mmv => "somp",
            ScenarioKind::Bsmv => "bomp",
            ScenarioKind::Bmmv => "bmmv-omp",
        }
    }
}

/// Number of measurement vectors `L` and block length `l_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scenario {
    num_vectors: usize,
    block_len: usize,
}

impl Scenario {
    pub fn new(num_vectors: usize, block_len: usize) -> Result<Self> {
        if num_vectors == 0 || block_len == 0 {
            return Err(Error::Config(format!(
                "scenario needs L >= 1 and l_b >= 1 (got L = {num_vectors}, l_b = {block_len})"
            )));
        }
        Ok(Self {
            num_vectors,
            block_len,
        })
    }

    pub fn smv() -> Self {
        Self {
            num_vectors: 1,
            block_len: 1,
        }
    }

    pub fn num_vectors(&self) -> usize {
        self.num_vectors
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn kind(&self) -> ScenarioKind {
        match (self.num_vectors > 1, self.block_len > 1) {
            (false, false) => ScenarioKind::Smv,
            (true, false) => ScenarioKind::Mmv,
            (false, true) => ScenarioKind::Bsmv,
            (true, true) => ScenarioKind::Bmmv,
        }
    }

    pub(crate) fn check(&self, y: &Matrix, x: &DesignMatrix) -> Result<()> {
        if y.cols() != self.num_vectors {
            return Err(Error::Config(format!(
                "observations have {} columns, scenario expects L = {}",
                y.cols(),
                self.num_vectors
            )));
        }
        if x.block_len() != self.block_len {
            return Err(Error::Config(format!(
                "design has block length {}, scenario expects l_b = {}",
                x.block_len(),
                self.block_len
            )));
        }
        if y.rows() != x.rows() {
            return Err(Error::Config(format!(
                "observations have {} rows but the design has {}",
                y.rows(),
                x.rows()
            )));
        }
        Ok(())
    }
}

/// When to stop the greedy iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// Stop after this many blocks.
    KnownSparsity(usize),
    /// Stop at the first `k` with `‖R^k‖_F` below the realized `‖W‖_F`.
    NoiseNorm(f64),
    /// Stop at the first `k` with `‖R^k‖_F` below a noise bound such as
    /// [`noise_norm_bound`](crate::specfun::noise_norm_bound).
    SigmaBound(f64),
    /// Run until `k_max`; only a rank failure ends the trace earlier.
    RunToKmax,
}

impl StoppingRule {
    fn validate(&self) -> Result<()> {
        match *self {
            StoppingRule::KnownSparsity(0) => Err(Error::Config(
                "known sparsity must be at least one block".into(),
            )),
            StoppingRule::NoiseNorm(v) | StoppingRule::SigmaBound(v) if !(v >= 0.0) => Err(
                Error::Config(format!("noise threshold must be non-negative, got {v}")),
            ),
            _ => Ok(()),
        }
    }

    fn fires(&self, step: usize, residual_norm: f64) -> bool {
        match *self {
            StoppingRule::KnownSparsity(k) => step >= k,
            StoppingRule::NoiseNorm(t) | StoppingRule::SigmaBound(t) => residual_norm < t,
            StoppingRule::RunToKmax => false,
        }
    }
}

/// Why a trace ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    RuleFired,
    KmaxReached,
    /// The next selection made the support rank deficient (zero-based
    /// columns of the attempted support).
    RankDeficient {
        columns: Vec<usize>,
    },
}

/// Nested supports produced by a greedy run.
///
/// Step `k` (1-based, `k = 1..=len()`) owns the first `k` selected blocks.
/// `residual_norms[k]` is `‖R^k‖_F` with `residual_norms[0] = ‖Y‖_F`, and
/// `residual_ratios[k - 1]` is `RR(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportTrace {
    block_len: usize,
    blocks: Vec<usize>,
    residual_norms: Vec<f64>,
    residual_ratios: Vec<f64>,
    termination: Termination,
}

impl SupportTrace {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Blocks in selection order.
    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn block_support(&self, k: usize) -> &[usize] {
        &self.blocks[..k]
    }

    /// Row support after `k` steps, in selection order.
    pub fn row_support(&self, k: usize) -> Vec<usize> {
        expand_blocks(&self.blocks[..k], self.block_len)
    }

    pub fn residual_norms(&self) -> &[f64] {
        &self.residual_norms
    }

    pub fn residual_ratios(&self) -> &[f64] {
        &self.residual_ratios
    }

    pub fn termination(&self) -> &Termination {
        &self.termination
    }
}

pub(crate) fn expand_blocks(blocks: &[usize], block_len: usize) -> Vec<usize> {
    blocks
        .iter()
        .flat_map(|&b| b * block_len..(b + 1) * block_len)
        .collect()
}

/// Block maximizing `‖X[:, I_j]ᵀ R‖_F` over blocks not in `excluded_blocks`.
///
/// Ties go to the lowest block index.
pub fn correlation_select(
    residual: &Matrix,
    x: &DesignMatrix,
    scenario: Scenario,
    excluded_blocks: &[usize],
) -> Result<usize> {
    scenario.check(residual, x)?;
    let mut mask = vec![false; x.num_blocks()];
    for &b in excluded_blocks {
        if b < mask.len() {
            mask[b] = true;
        }
    }
    select_masked(residual, x, &mask)
}

fn select_masked(residual: &Matrix, x: &DesignMatrix, excluded: &[bool]) -> Result<usize> {
    let corr = x.matrix().transpose_mul(residual);
    let mut best: Option<(usize, f64)> = None;
    for (block, &skip) in excluded.iter().enumerate() {
        if skip {
            continue;
        }
        let mut score = 0.0;
        for j in x.block_columns(block) {
            for l in 0..corr.cols() {
                let c = corr[(j, l)];
                score += c * c;
            }
        }
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((block, score)),
        }
    }
    best.map(|(b, _)| b).ok_or(Error::Exhausted)
}

/// Runs the generic OMP iterations until `rule` fires or `k_max` blocks have
/// been selected.
///
/// Under [`StoppingRule::RunToKmax`] a rank failure truncates the trace and
/// is recorded in [`SupportTrace::termination`]; under the other rules it is
/// returned as [`Error::GreedyRank`] carrying the partial trace.
pub fn run_greedy(
    y: &Matrix,
    x: &DesignMatrix,
    scenario: Scenario,
    rule: StoppingRule,
    k_max: usize,
) -> Result<SupportTrace> {
    scenario.check(y, x)?;
    rule.validate()?;
    if k_max == 0 {
        return Err(Error::Config("k_max must be at least 1".into()));
    }
    if k_max * x.block_len() > x.rows() {
        return Err(Error::Config(format!(
            "k_max * l_b = {} exceeds n = {}",
            k_max * x.block_len(),
            x.rows()
        )));
    }
    if k_max > x.num_blocks() {
        return Err(Error::Config(format!(
            "k_max = {k_max} exceeds the {} available blocks",
            x.num_blocks()
        )));
    }

    let y_norm = y.frobenius_norm();
    let mut fact = LsFactorization::new(y);
    let mut excluded = vec![false; x.num_blocks()];
    let mut trace = SupportTrace {
        block_len: x.block_len(),
        blocks: Vec::with_capacity(k_max),
        residual_norms: vec![y_norm],
        residual_ratios: Vec::with_capacity(k_max),
        termination: Termination::KmaxReached,
    };

    loop {
        let step = trace.blocks.len();
        let current = trace.residual_norms[step];
        if rule.fires(step, current) {
            trace.termination = Termination::RuleFired;
            break;
        }
        if step == k_max {
            trace.termination = Termination::KmaxReached;
            break;
        }
        let block = select_masked(fact.residual(), x, &excluded)?;
        let cols: Vec<usize> = x.block_columns(block).collect();
        if let Err(e) = fact.extend(x, &cols) {
            let columns = match e {
                Error::RankDeficient { columns } => columns,
                other => return Err(other),
            };
            if rule == StoppingRule::RunToKmax {
                trace.termination = Termination::RankDeficient { columns };
                break;
            }
            trace.termination = Termination::RankDeficient {
                columns: columns.clone(),
            };
            return Err(Error::GreedyRank {
                columns,
                partial: alloc::boxed::Box::new(trace),
            });
        }
        excluded[block] = true;
        let norm = fact.residual_norm();
        trace.blocks.push(block);
        trace.residual_norms.push(norm);
        trace
            .residual_ratios
            .push(residual_ratio(current, norm, y_norm));
    }
    Ok(trace)
}
