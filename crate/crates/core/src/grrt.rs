//! Residual ratio thresholding over nested support sequences.
//!
//! For a sequence of supports growing by one block per step, the ratio
//! `RR(k) = ‖R^k‖_F / ‖R^{k-1}‖_F` collapses towards zero at the step that
//! first covers the true support, while every later step stays above a
//! deterministic Beta-quantile threshold `Γ(k)` with probability at least
//! `1 - α`, whatever the noise level. The selector returns the last step
//! whose ratio falls below its threshold.

use alloc::format;
use alloc::vec::Vec;

use libm::sqrt;

use crate::greedy::{Scenario, SupportTrace};
use crate::lasso::AggregatedSequence;
use crate::linalg::{DesignMatrix, LsFactorization, Matrix};
use crate::specfun::{beta_inv_cdf, BetaParams};
use crate::{Error, Result};

/// Residual norms at or below this fraction of `‖Y‖_F` count as an exact
/// fit.
pub const EXACT_FIT_REL: f64 = 1e-12;

/// `‖R^k‖ / ‖R^{k-1}‖`, clamped to `[0, 1]`.
///
/// Once the previous residual is an exact fit the ratio carries no
/// information and is reported as 1, so a step after an exact fit is never
/// selected over the step that produced it.
pub(crate) fn residual_ratio(previous: f64, current: f64, y_norm: f64) -> f64 {
    if previous <= EXACT_FIT_REL * y_norm || previous <= 0.0 {
        return 1.0;
    }
    (current / previous).clamp(0.0, 1.0)
}

/// Bound on the number of ways step `k` can extend the support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosRule {
    /// Any unused column (`p - k + 1`) or block (`p_b - k + 1`).
    FullDictionary,
    /// A single candidate per step, as in model-order selection.
    SingleCandidate,
}

/// `⌊(n + 1) / (2 l_b)⌋`.
pub fn default_kmax(n: usize, block_len: usize) -> Result<usize> {
    kmax_for(n, 1, block_len)
}

/// `⌊(n + L) / (2 l_b)⌋`, the variant that accounts for joint sparsity when
/// `L > 1`.
pub fn kmax_for(n: usize, num_vectors: usize, block_len: usize) -> Result<usize> {
    if block_len == 0 || n < 2 * block_len {
        return Err(Error::Config(format!(
            "n = {n} is too small for block length {block_len}"
        )));
    }
    Ok((n + num_vectors) / (2 * block_len))
}

/// The threshold sequence `Γ(k) = √(F⁻¹_{a_k, b}(α / (pos(k) k_max)))` with
/// `a_k = (n - l_b k) L / 2` and `b = l_b L / 2`, for `k = 1..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdProfile {
    n: usize,
    p: usize,
    scenario: Scenario,
    alpha: f64,
    k_max: usize,
    pos_rule: PosRule,
    gamma: Vec<f64>,
}

impl ThresholdProfile {
    pub fn new(
        n: usize,
        p: usize,
        scenario: Scenario,
        alpha: f64,
        k_max: usize,
        pos_rule: PosRule,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        let lb = scenario.block_len();
        if k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if !p.is_multiple_of(lb) {
            return Err(Error::Config(format!(
                "block length {lb} does not divide p = {p}"
            )));
        }
        if k_max * lb >= n {
            return Err(Error::Config(format!(
                "degrees of freedom (n - l_b k) L / 2 vanish: k_max = {k_max}, l_b = {lb}, n = {n} (need k_max <= {})",
                (n - 1) / lb
            )));
        }
        if pos_rule == PosRule::FullDictionary && k_max > p / lb {
            return Err(Error::Config(format!(
                "k_max = {k_max} exceeds the {} candidate blocks",
                p / lb
            )));
        }
        let mut profile = Self {
            n,
            p,
            scenario,
            alpha,
            k_max,
            pos_rule,
            gamma: Vec::with_capacity(k_max),
        };
        for k in 1..=k_max {
            let (a, b) = profile.degrees_of_freedom(k);
            let level = alpha / (profile.pos(k) as f64 * k_max as f64);
            let q = beta_inv_cdf(BetaParams::new(a, b)?, level)?;
            profile.gamma.push(sqrt(q));
        }
        Ok(profile)
    }

    /// The threshold used for an aggregated LASSO path:
    /// `Γ(k) = √(F⁻¹_{(n-k)/2, 1/2}(α / ((p - k + 1) k_max)))`.
    pub fn for_lasso(n: usize, p: usize, alpha: f64, k_max: usize) -> Result<Self> {
        Self::new(n, p, Scenario::smv(), alpha, k_max, PosRule::FullDictionary)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn pos_rule(&self) -> PosRule {
        self.pos_rule
    }

    /// `Γ(1), …, Γ(k_max)`.
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Beta shape parameters behind `Γ(k)`.
    pub fn degrees_of_freedom(&self, k: usize) -> (f64, f64) {
        let lb = self.scenario.block_len() as f64;
        let l = self.scenario.num_vectors() as f64;
        ((self.n as f64 - lb * k as f64) * l / 2.0, lb * l / 2.0)
    }

    /// Candidate count entering the union bound at step `k` (1-based).
    pub fn pos(&self, k: usize) -> usize {
        match self.pos_rule {
            PosRule::SingleCandidate => 1,
            PosRule::FullDictionary => {
                let candidates = self.p / self.scenario.block_len();
                candidates + 1 - k
            }
        }
    }
}

/// Same as [`ThresholdProfile::new`].
pub fn gamma_sequence(
    n: usize,
    p: usize,
    scenario: Scenario,
    alpha: f64,
    k_max: usize,
    pos_rule: PosRule,
) -> Result<ThresholdProfile> {
    ThresholdProfile::new(n, p, scenario, alpha, k_max, pos_rule)
}

/// A nested support sequence with its residual ratios.
pub trait SupportSequence {
    /// Number of available steps.
    fn steps(&self) -> usize;

    /// Row support after `k` steps (`k` in `0..=steps()`).
    fn support_at(&self, k: usize) -> Vec<usize>;

    /// `RR(1), …, RR(steps())`.
    fn ratios(&self) -> &[f64];

    /// `‖R^0‖_F, …, ‖R^steps()‖_F`.
    fn residual_norms(&self) -> &[f64];
}

impl SupportSequence for SupportTrace {
    fn steps(&self) -> usize {
        self.len()
    }

    fn support_at(&self, k: usize) -> Vec<usize> {
        self.row_support(k)
    }

    fn ratios(&self) -> &[f64] {
        self.residual_ratios()
    }

    fn residual_norms(&self) -> &[f64] {
        let norms = self.residual_norms();
        &norms[..norms.len().min(self.ratios().len() + 1)]
    }
}

impl SupportSequence for AggregatedSequence {
    fn steps(&self) -> usize {
        self.residual_ratios().len()
    }

    fn support_at(&self, k: usize) -> Vec<usize> {
        self.support(k).to_vec()
    }

    fn ratios(&self) -> &[f64] {
        self.residual_ratios()
    }

    fn residual_norms(&self) -> &[f64] {
        let norms = self.residual_norms();
        &norms[..norms.len().min(self.ratios().len() + 1)]
    }
}

/// What to return when no step has `RR(k) < Γ(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FallbackPolicy {
    /// Empty support and zero estimate.
    #[default]
    EmptySupport,
    /// The step minimizing `RR(k) / Γ(k)`.
    MinRatio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrrtResult {
    /// Selected step (1-based), `None` when the empty support is returned.
    pub k_selected: Option<usize>,
    /// Selected row support, in the order the sequence added it.
    pub support: Vec<usize>,
    /// Least-squares estimate on `support`, `p × L`.
    pub estimate: Matrix,
    pub residual_ratios: Vec<f64>,
    pub gamma: Vec<f64>,
    pub fallback_engaged: bool,
}

/// `max {k : RR(k) < Γ(k)}` over the available steps (1-based).
pub fn select_step(ratios: &[f64], gamma: &[f64]) -> Option<usize> {
    ratios
        .iter()
        .zip(gamma)
        .enumerate()
        .filter(|(_, (rr, g))| rr < g)
        .map(|(i, _)| i + 1)
        .next_back()
}

/// `k_min`: the first step whose support contains every index of `truth`,
/// or `None` if no available step does.
pub fn minimal_superset_step<S: SupportSequence + ?Sized>(
    sequence: &S,
    truth: &[usize],
) -> Option<usize> {
    (0..=sequence.steps()).find(|&k| {
        let s = sequence.support_at(k);
        truth.iter().all(|j| s.contains(j))
    })
}

/// Applies the thresholding rule to `sequence` and re-estimates the signal
/// by least squares on the chosen support.
pub fn grrt_select<S: SupportSequence + ?Sized>(
    sequence: &S,
    profile: &ThresholdProfile,
    y: &Matrix,
    x: &DesignMatrix,
    policy: FallbackPolicy,
) -> Result<GrrtResult> {
    let ratios = sequence.ratios();
    if ratios.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if ratios.len() > profile.k_max() {
        return Err(Error::Config(format!(
            "sequence has {} steps but the threshold profile stops at k_max = {}",
            ratios.len(),
            profile.k_max()
        )));
    }
    let gamma = profile.gamma();
    let (k_selected, fallback_engaged) = match select_step(ratios, gamma) {
        Some(k) => (Some(k), false),
        None => match policy {
            FallbackPolicy::EmptySupport => (None, true),
            FallbackPolicy::MinRatio => {
                let k = ratios
                    .iter()
                    .zip(gamma)
                    .enumerate()
                    .fold((0, f64::INFINITY), |best, (i, (rr, g))| {
                        let score = rr / g;
                        if score < best.1 {
                            (i, score)
                        } else {
                            best
                        }
                    })
                    .0;
                (Some(k + 1), true)
            }
        },
    };
    let support = k_selected.map_or_else(Vec::new, |k| sequence.support_at(k));
    let estimate = LsFactorization::from_support(y, x, &support)?.estimate(x.cols());
    Ok(GrrtResult {
        k_selected,
        support,
        estimate,
        residual_ratios: ratios.to_vec(),
        gamma: gamma[..ratios.len()].to_vec(),
        fallback_engaged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn kmax_defaults() {
        assert_eq!(default_kmax(64, 1).unwrap(), 32);
        assert_eq!(default_kmax(64, 4).unwrap(), 8);
        assert_eq!(default_kmax(5, 1).unwrap(), 3);
        assert_eq!(kmax_for(64, 10, 1).unwrap(), 37);
        assert!(default_kmax(7, 4).is_err());
    }

    #[test]
    fn pos_rules() {
        let omp =
            ThresholdProfile::new(64, 128, Scenario::smv(), 0.01, 32, PosRule::FullDictionary)
                .unwrap();
        assert_eq!(omp.pos(1), 128);
        let bomp = ThresholdProfile::new(
            64,
            128,
            Scenario::new(1, 4).unwrap(),
            0.01,
            8,
            PosRule::FullDictionary,
        )
        .unwrap();
        assert_eq!(bomp.pos(3), 30);
        let mos =
            ThresholdProfile::new(64, 128, Scenario::smv(), 0.01, 32, PosRule::SingleCandidate)
                .unwrap();
        assert_eq!(mos.pos(7), 1);
    }

    #[test]
    fn profile_validation() {
        let sc = Scenario::smv();
        assert!(ThresholdProfile::new(64, 128, sc, 0.0, 32, PosRule::FullDictionary).is_err());
        assert!(ThresholdProfile::new(64, 128, sc, 1.0, 32, PosRule::FullDictionary).is_err());
        assert!(ThresholdProfile::new(64, 128, sc, 0.1, 64, PosRule::FullDictionary).is_err());
        assert!(ThresholdProfile::new(64, 128, sc, 0.1, 63, PosRule::FullDictionary).is_ok());
        let blk = Scenario::new(1, 4).unwrap();
        assert!(ThresholdProfile::new(64, 128, blk, 0.1, 16, PosRule::FullDictionary).is_err());
        assert!(ThresholdProfile::new(64, 128, blk, 0.1, 15, PosRule::FullDictionary).is_ok());
    }

    #[test]
    fn selection_rule() {
        assert_eq!(
            select_step(&[0.9, 0.05, 0.95], &[0.30, 0.30, 0.50]),
            Some(2)
        );
        assert_eq!(select_step(&[0.9, 0.9, 0.9], &[0.3, 0.3, 0.3]), None);
        // equality does not select
        assert_eq!(select_step(&[0.3, 0.2], &[0.3, 0.1]), None);
        assert_eq!(select_step(&[0.1, 0.9, 0.2], &[0.3, 0.3, 0.3]), Some(3));
    }

    #[test]
    fn ratio_after_exact_fit() {
        assert_eq!(residual_ratio(2.0, 1.0, 4.0), 0.5);
        assert_eq!(residual_ratio(1e-15, 1e-16, 4.0), 1.0);
        assert_eq!(residual_ratio(0.0, 0.0, 0.0), 1.0);
        assert_eq!(residual_ratio(1.0, 1.0 + 1e-16, 4.0), 1.0);
    }

    struct Fixed {
        ratios: Vec<f64>,
    }

    impl SupportSequence for Fixed {
        fn steps(&self) -> usize {
            self.ratios.len()
        }
        fn support_at(&self, k: usize) -> Vec<usize> {
            (0..k).collect()
        }
        fn ratios(&self) -> &[f64] {
            &self.ratios
        }
        fn residual_norms(&self) -> &[f64] {
            &[]
        }
    }

    #[test]
    fn fallback_policies() {
        let x = DesignMatrix::new(Matrix::identity(8), 1).unwrap();
        let y = Matrix::column_vector(&[1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let profile =
            ThresholdProfile::new(8, 8, Scenario::smv(), 0.1, 3, PosRule::FullDictionary).unwrap();
        let seq = Fixed {
            ratios: vec![0.99, 0.999, 0.9999],
        };
        let r = grrt_select(&seq, &profile, &y, &x, FallbackPolicy::EmptySupport).unwrap();
        assert!(r.fallback_engaged);
        assert_eq!(r.k_selected, None);
        assert!(r.support.is_empty());
        assert_eq!(r.estimate, Matrix::zeros(8, 1));

        let r = grrt_select(&seq, &profile, &y, &x, FallbackPolicy::MinRatio).unwrap();
        assert!(r.fallback_engaged);
        let expect = (0..3)
            .min_by(|&a, &b| {
                (seq.ratios[a] / profile.gamma()[a])
                    .partial_cmp(&(seq.ratios[b] / profile.gamma()[b]))
                    .unwrap()
            })
            .unwrap()
            + 1;
        assert_eq!(r.k_selected, Some(expect));

        let empty = Fixed { ratios: vec![] };
        assert_eq!(
            grrt_select(&empty, &profile, &y, &x, FallbackPolicy::EmptySupport),
            Err(Error::EmptyTrace)
        );
        let long = Fixed {
            ratios: vec![0.5; 4],
        };
        assert!(grrt_select(&long, &profile, &y, &x, FallbackPolicy::EmptySupport).is_err());
    }
}
