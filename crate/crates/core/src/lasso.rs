//! LASSO regularization path and support aggregation.
//!
//! The path solves `min_D ‖Y - X D‖² + λ ‖D‖₁` for every `λ` at once with
//! LARS plus the lasso modification (a variable is dropped when its
//! coefficient crosses zero). With the un-halved quadratic term the KKT
//! balance is `X_jᵀ (Y - X D) = (λ/2) sign(D_j)`, so the path runs
//! internally on the correlation level `γ = λ/2` and reports `λ = 2γ`.
//!
//! Knot supports change by exactly one variable, but they are not nested.
//! [`aggregate_supports`] turns them into a nested sequence by keeping the
//! first appearance of every variable.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{log, sqrt};

use crate::grrt::residual_ratio;
use crate::linalg::{axpy, dot, DesignMatrix, LsFactorization, Matrix};
use crate::{Error, Result};

/// Relative gap (in units of the current correlation level) under which two
/// path events count as simultaneous.
pub const TIE_TOL: f64 = 1e-10;

/// Pivot floor for the active-set Gram matrix.
const GRAM_PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathEvent {
    Enter(usize),
    Leave(usize),
}

impl PathEvent {
    pub fn variable(self) -> usize {
        match self {
            PathEvent::Enter(j) | PathEvent::Leave(j) => j,
        }
    }
}

/// A breakpoint of the path: the solution at `lambda` and the signed active
/// set that holds just below it.
#[derive(Debug, Clone, PartialEq)]
pub struct Knot {
    pub lambda: f64,
    pub event: PathEvent,
    /// Active variables in order of entry.
    pub active: Vec<usize>,
    /// `±1` for each entry of `active`.
    pub signs: Vec<f64>,
    /// Dense coefficients (length `p`) at `lambda`.
    pub coef: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOptions {
    /// Stop once this many variables are active.
    pub max_active: usize,
    /// Stop once a knot at or below this `λ` has been reached.
    pub min_lambda: f64,
    /// Stop once this many distinct variables have entered at least once.
    pub max_distinct: Option<usize>,
}

impl PathOptions {
    pub fn new(max_active: usize) -> Self {
        Self {
            max_active,
            min_lambda: 0.0,
            max_distinct: None,
        }
    }
}

/// The computed part of the LASSO path.
///
/// `end` is the solution at the lowest `λ` the last segment was followed
/// to: the next (unapplied) event, or `λ = 0` when the path ran out.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotSequence {
    p: usize,
    lambda_max: f64,
    knots: Vec<Knot>,
    end: Option<(f64, Vec<f64>)>,
}

impl KnotSequence {
    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// `λ_1 = 2 ‖Xᵀ Y‖_∞`; the solution is zero for every `λ ≥ λ_1`.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Lowest `λ` at which [`solution_at_lambda`](Self::solution_at_lambda)
    /// is defined.
    pub fn floor(&self) -> f64 {
        match (&self.end, self.knots.last()) {
            (Some((l, _)), _) => *l,
            (None, Some(k)) => k.lambda,
            (None, None) => 0.0,
        }
    }

    /// Knot active sets in path order.
    pub fn supports(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.knots.iter().map(|k| k.active.as_slice())
    }

    /// Number of distinct variables that have entered.
    pub fn distinct_variables(&self) -> usize {
        let mut seen = vec![false; self.p];
        self.knots
            .iter()
            .filter_map(|k| match k.event {
                PathEvent::Enter(j) if !seen[j] => {
                    seen[j] = true;
                    Some(())
                }
                _ => None,
            })
            .count()
    }

    /// Solution at `lambda`, by affine interpolation between the bracketing
    /// knots.
    pub fn solution_at_lambda(&self, lambda: f64) -> Result<Vec<f64>> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain {
                what: "lambda",
                value: lambda,
            });
        }
        if self.knots.is_empty() || lambda >= self.lambda_max {
            return Ok(vec![0.0; self.p]);
        }
        if lambda < self.floor() {
            return Err(Error::Extrapolation {
                lambda,
                floor: self.floor(),
            });
        }
        // knots are strictly decreasing in lambda
        let idx = self.knots.partition_point(|k| k.lambda > lambda);
        if idx < self.knots.len() && self.knots[idx].lambda == lambda {
            return Ok(self.knots[idx].coef.clone());
        }
        let upper = &self.knots[idx - 1];
        let (lo_lambda, lo_coef) = match self.knots.get(idx) {
            Some(k) => (k.lambda, &k.coef),
            None => {
                let (l, c) = self
                    .end
                    .as_ref()
                    .expect("floor check guarantees an end point");
                (*l, c)
            }
        };
        let span = upper.lambda - lo_lambda;
        let t = if span > 0.0 {
            (upper.lambda - lambda) / span
        } else {
            0.0
        };
        Ok(upper
            .coef
            .iter()
            .zip(lo_coef)
            .map(|(a, b)| a + t * (b - a))
            .collect())
    }

    /// One row per knot: `(knot, λ, event, active-set size)`.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, PathEvent, usize)> + '_ {
        self.knots
            .iter()
            .enumerate()
            .map(|(i, k)| (i + 1, k.lambda, k.event, k.active.len()))
    }
}

/// Path from `λ_1` down until `max_active` variables are active or the
/// active set reaches the rank of `X`.
pub fn lasso_path(y: &Matrix, x: &DesignMatrix, max_active: usize) -> Result<KnotSequence> {
    lasso_path_with(y, x, &PathOptions::new(max_active))
}

pub fn lasso_path_with(y: &Matrix, x: &DesignMatrix, opts: &PathOptions) -> Result<KnotSequence> {
    if y.cols() != 1 {
        return Err(Error::Config(format!(
            "the LASSO path needs a single measurement vector, got L = {}",
            y.cols()
        )));
    }
    if y.rows() != x.rows() {
        return Err(Error::Config(format!(
            "observations have {} rows but the design has {}",
            y.rows(),
            x.rows()
        )));
    }
    if opts.max_active == 0 {
        return Err(Error::Config("max_active must be at least 1".into()));
    }
    Lars::new(y.col(0), x).run(opts)
}

struct Lars<'a> {
    x: &'a DesignMatrix,
    y: &'a [f64],
    p: usize,
    active: Vec<usize>,
    signs: Vec<f64>,
    in_active: Vec<bool>,
    beta: Vec<f64>,
    /// Current correlation level `γ = λ/2`.
    level: f64,
}

struct Step {
    delta: f64,
    event: Option<PathEvent>,
    direction: Vec<f64>,
}

impl<'a> Lars<'a> {
    fn new(y: &'a [f64], x: &'a DesignMatrix) -> Self {
        let p = x.cols();
        Self {
            x,
            y,
            p,
            active: Vec::new(),
            signs: Vec::new(),
            in_active: vec![false; p],
            beta: vec![0.0; p],
            level: 0.0,
        }
    }

    fn correlations(&self) -> Vec<f64> {
        let mut r = self.y.to_vec();
        for (j, &b) in self.beta.iter().enumerate() {
            if b != 0.0 {
                axpy(-b, self.x.col(j), &mut r);
            }
        }
        (0..self.p).map(|j| dot(self.x.col(j), &r)).collect()
    }

    fn run(mut self, opts: &PathOptions) -> Result<KnotSequence> {
        let c = self.correlations();
        let (first, top) = c.iter().enumerate().fold((0, 0.0_f64), |best, (j, v)| {
            if v.abs() > best.1 {
                (j, v.abs())
            } else {
                best
            }
        });
        let mut path = KnotSequence {
            p: self.p,
            lambda_max: 2.0 * top,
            knots: Vec::new(),
            end: None,
        };
        if top <= 0.0 {
            return Ok(path);
        }
        let ties: Vec<usize> = c
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() >= top * (1.0 - TIE_TOL))
            .map(|(j, _)| j)
            .collect();
        if ties.len() > 1 {
            return Err(Error::PathTie {
                variables: ties,
                lambda: 2.0 * top,
            });
        }
        self.level = top;
        self.enter(first, c[first].signum());
        path.knots.push(self.knot(PathEvent::Enter(first)));

        let mut seen = vec![false; self.p];
        seen[first] = true;
        let mut distinct = 1;
        let mut last_dropped: Option<usize> = None;

        loop {
            let finishing = self.active.len() >= opts.max_active
                || path
                    .knots
                    .last()
                    .is_some_and(|k| k.lambda <= opts.min_lambda)
                || opts.max_distinct.is_some_and(|m| distinct >= m);

            let step = match self.next_step(last_dropped)? {
                Some(s) => s,
                None => break,
            };
            for (&j, &w) in self.active.iter().zip(&step.direction) {
                self.beta[j] += step.delta * w;
            }
            self.level -= step.delta;
            let event = match step.event {
                Some(e) if !finishing => e,
                _ => {
                    let lambda = if step.event.is_none() {
                        0.0
                    } else {
                        2.0 * self.level
                    };
                    path.end = Some((lambda, self.beta.clone()));
                    break;
                }
            };
            last_dropped = None;
            match event {
                PathEvent::Enter(j) => {
                    let c = self.correlations();
                    self.enter(j, c[j].signum());
                    if !seen[j] {
                        seen[j] = true;
                        distinct += 1;
                    }
                }
                PathEvent::Leave(j) => {
                    self.leave(j);
                    last_dropped = Some(j);
                }
            }
            path.knots.push(self.knot(event));
        }
        Ok(path)
    }

    fn enter(&mut self, j: usize, sign: f64) {
        self.active.push(j);
        self.signs.push(sign);
        self.in_active[j] = true;
    }

    fn leave(&mut self, j: usize) {
        let pos = self
            .active
            .iter()
            .position(|&a| a == j)
            .expect("leaving variable is active");
        self.active.remove(pos);
        self.signs.remove(pos);
        self.in_active[j] = false;
        self.beta[j] = 0.0;
    }

    fn knot(&self, event: PathEvent) -> Knot {
        Knot {
            lambda: 2.0 * self.level,
            event,
            active: self.active.clone(),
            signs: self.signs.clone(),
            coef: self.beta.clone(),
        }
    }

    /// Direction of the current segment and the distance (in `γ`) to the
    /// next event. `None` when the active Gram matrix is singular.
    fn next_step(&self, last_dropped: Option<usize>) -> Result<Option<Step>> {
        let k = self.active.len();
        let mut gram = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..=a {
                let v = dot(self.x.col(self.active[a]), self.x.col(self.active[b]));
                gram[a * k + b] = v;
                gram[b * k + a] = v;
            }
        }
        let direction = match cholesky_solve(&mut gram, k, &self.signs) {
            Some(w) => w,
            None => return Ok(None),
        };
        let mut u = vec![0.0; self.x.rows()];
        for (&j, &w) in self.active.iter().zip(&direction) {
            axpy(w, self.x.col(j), &mut u);
        }
        let c = self.correlations();
        let level = self.level;

        let mut events: Vec<(f64, PathEvent)> = Vec::new();
        for (j, &cj) in c.iter().enumerate() {
            if self.in_active[j] || Some(j) == last_dropped {
                continue;
            }
            let a = dot(self.x.col(j), &u);
            let mut best = f64::INFINITY;
            for (num, den) in [(level - cj, 1.0 - a), (level + cj, 1.0 + a)] {
                if den > 0.0 {
                    let d = num / den;
                    if d > 0.0 && d < best {
                        best = d;
                    }
                }
            }
            if best.is_finite() {
                events.push((best, PathEvent::Enter(j)));
            }
        }
        for (&j, &w) in self.active.iter().zip(&direction) {
            if w != 0.0 {
                let d = -self.beta[j] / w;
                if d > 0.0 {
                    events.push((d, PathEvent::Leave(j)));
                }
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));

        // events this close to λ = 0 are where the fit becomes exact, and
        // once the active set spans the observations all of them crowd there
        match events.first() {
            Some(&(delta, event)) if delta < level * (1.0 - TIE_TOL) => {
                if let Some(&(second, other)) = events.get(1) {
                    if second - delta <= TIE_TOL * level {
                        return Err(Error::PathTie {
                            variables: vec![event.variable(), other.variable()],
                            lambda: 2.0 * (level - delta),
                        });
                    }
                }
                Ok(Some(Step {
                    delta,
                    event: Some(event),
                    direction,
                }))
            }
            _ => Ok(Some(Step {
                delta: level,
                event: None,
                direction,
            })),
        }
    }
}

/// Solves `G w = rhs` for symmetric positive definite `G` (row-major,
/// overwritten by its Cholesky factor). `None` when a pivot is too small.
fn cholesky_solve(g: &mut [f64], k: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    for j in 0..k {
        let mut diag = g[j * k + j];
        for m in 0..j {
            diag -= g[j * k + m] * g[j * k + m];
        }
        if !(diag > GRAM_PIVOT_TOL) {
            return None;
        }
        let diag = sqrt(diag);
        g[j * k + j] = diag;
        for i in (j + 1)..k {
            let mut v = g[i * k + j];
            for m in 0..j {
                v -= g[i * k + m] * g[j * k + m];
            }
            g[i * k + j] = v / diag;
        }
    }
    let mut z = rhs.to_vec();
    for i in 0..k {
        for m in 0..i {
            z[i] -= g[i * k + m] * z[m];
        }
        z[i] /= g[i * k + i];
    }
    for i in (0..k).rev() {
        for m in (i + 1)..k {
            z[i] -= g[m * k + i] * z[m];
        }
        z[i] /= g[i * k + i];
    }
    Some(z)
}

/// Nested supports `S_agg^k` made of the first `k` distinct variables in
/// order of first appearance, with residual ratios once
/// [`compute_residuals`](Self::compute_residuals) has run.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedSequence {
    order: Vec<usize>,
    residual_norms: Vec<f64>,
    residual_ratios: Vec<f64>,
}

impl AggregatedSequence {
    /// Number of aggregated supports.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `S_agg^k`, the first `k` variables.
    pub fn support(&self, k: usize) -> &[usize] {
        &self.order[..k]
    }

    /// All aggregated supports `S_agg^1, …, S_agg^len`.
    pub fn supports(&self) -> impl Iterator<Item = &[usize]> + '_ {
        (1..=self.order.len()).map(|k| &self.order[..k])
    }

    /// Variables in order of first appearance.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `‖R_agg^k‖_F` for `k = 0..=steps` (empty until computed).
    pub fn residual_norms(&self) -> &[f64] {
        &self.residual_norms
    }

    /// `RR_agg(1), …` (empty until computed).
    pub fn residual_ratios(&self) -> &[f64] {
        &self.residual_ratios
    }

    /// Fills residual norms and ratios for every aggregated support. A rank
    /// failure truncates the ratios at the last full-rank support.
    pub fn compute_residuals(&mut self, y: &Matrix, x: &DesignMatrix) -> Result<()> {
        let y_norm = y.frobenius_norm();
        let mut fact = LsFactorization::from_support(y, x, &[])?;
        self.residual_norms = vec![y_norm];
        self.residual_ratios.clear();
        for &j in &self.order {
            match fact.extend(x, &[j]) {
                Ok(()) => {}
                Err(Error::RankDeficient { .. }) => break,
                Err(e) => return Err(e),
            }
            let prev = *self.residual_norms.last().expect("non-empty");
            let cur = fact.residual_norm();
            self.residual_norms.push(cur);
            self.residual_ratios.push(residual_ratio(prev, cur, y_norm));
        }
        Ok(())
    }
}

/// First-appearance aggregation of a (possibly non-nested) support
/// sequence, truncated to `k_max` supports.
pub fn aggregate_supports<'s, I>(supports: I, k_max: usize) -> Result<AggregatedSequence>
where
    I: IntoIterator<Item = &'s [usize]>,
{
    let mut order: Vec<usize> = Vec::with_capacity(k_max);
    'outer: for set in supports {
        for &j in set {
            if order.len() == k_max {
                break 'outer;
            }
            if !order.contains(&j) {
                order.push(j);
            }
        }
    }
    if order.len() < k_max {
        return Err(Error::InsufficientVariables {
            requested: k_max,
            available: order.len(),
        });
    }
    Ok(AggregatedSequence {
        order,
        residual_norms: Vec::new(),
        residual_ratios: Vec::new(),
    })
}

/// Follows the path only until `k_max` distinct variables have appeared,
/// aggregates its supports and computes the aggregated residual ratios.
///
/// When the path runs out first the sequence holds every variable that did
/// appear; it is empty when `Y` has no correlation with any column.
pub fn lasso_aggregated(y: &Matrix, x: &DesignMatrix, k_max: usize) -> Result<AggregatedSequence> {
    let opts = PathOptions {
        max_active: x.rows().min(x.cols()),
        min_lambda: 0.0,
        max_distinct: Some(k_max),
    };
    let path = lasso_path_with(y, x, &opts)?;
    let available = path.distinct_variables().min(k_max);
    let mut agg = aggregate_supports(path.supports(), available)?;
    agg.compute_residuals(y, x)?;
    Ok(agg)
}

/// `λ = 2σ √(10 ln p)`.
pub fn baseline_lambda(sigma: f64, p: usize) -> f64 {
    2.0 * sigma * sqrt(10.0 * log(p as f64))
}

/// Support of the LASSO solution at `lambda` and its least-squares
/// re-estimate.
pub fn lasso_fixed_lambda(
    y: &Matrix,
    x: &DesignMatrix,
    lambda: f64,
) -> Result<(Vec<usize>, Matrix)> {
    let opts = PathOptions {
        max_active: x.rows().min(x.cols()),
        min_lambda: lambda,
        max_distinct: None,
    };
    let path = lasso_path_with(y, x, &opts)?;
    let coef = path.solution_at_lambda(lambda)?;
    let support: Vec<usize> = coef
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, _)| j)
        .collect();
    let estimate = LsFactorization::from_support(y, x, &support)?.estimate(x.cols());
    Ok((support, estimate))
}

/// [`lasso_fixed_lambda`] at [`baseline_lambda`].
pub fn lasso_fixed_lambda_baseline(
    y: &Matrix,
    x: &DesignMatrix,
    sigma: f64,
) -> Result<(Vec<usize>, Matrix)> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain {
            what: "baseline sigma",
            value: sigma,
        });
    }
    lasso_fixed_lambda(y, x, baseline_lambda(sigma, x.cols()))
}
