//! Monte Carlo trials on planted sparse signals.

use grrt_core::grrt::EXACT_FIT_REL;
use grrt_core::lasso::{baseline_lambda, lasso_aggregated, lasso_fixed_lambda};
use grrt_core::specfun::{beta_cdf, noise_norm_bound, BetaParams};
use grrt_core::{
    grrt_select, minimal_superset_step, run_greedy, DesignMatrix, FallbackPolicy, LsFactorization,
    Matrix, PosRule, Scenario, StoppingRule, SupportSequence, ThresholdProfile,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::{Algorithm, DesignKind, ExperimentConfig, Selector};
use crate::design::{gaussian_design, hadamard_identity_design};
use crate::io::ResultRow;
use crate::{Error, Result};

/// Stream reserved for drawing a random design.
const DESIGN_STREAM: u64 = u64::MAX;

/// Independent generator for one trial; the stream depends only on the
/// SNR index and the trial index, never on scheduling.
pub fn trial_rng(seed: u64, snr_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((snr_index as u64) << 40) | trial as u64);
    rng
}

/// One planted instance `Y = X B + W`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub y: Matrix,
    pub signal: Matrix,
    pub noise: Matrix,
    pub sigma: f64,
    pub block_support: Vec<usize>,
    pub row_support: Vec<usize>,
}

impl Instance {
    pub fn noise_norm(&self) -> f64 {
        self.noise.frobenius_norm()
    }
}

/// Uniform block support, `±1` entries, Gaussian noise of deviation `sigma`.
pub fn sample_instance(
    x: &DesignMatrix,
    scenario: Scenario,
    k_block: usize,
    sigma: f64,
    rng: &mut impl Rng,
) -> Instance {
    let l = scenario.num_vectors();
    let mut block_support = sample(rng, x.num_blocks(), k_block).into_vec();
    block_support.sort_unstable();
    let row_support: Vec<usize> = block_support
        .iter()
        .flat_map(|&b| x.block_columns(b))
        .collect();
    let mut signal = Matrix::zeros(x.cols(), l);
    for &j in &row_support {
        for c in 0..l {
            signal[(j, c)] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        }
    }
    let noise = Matrix::from_fn(x.rows(), l, |_, _| {
        sigma * rng.sample::<f64, _>(StandardNormal)
    });
    let y = x.matrix().mul(&signal).add(&noise);
    Instance {
        y,
        signal,
        noise,
        sigma,
        block_support,
        row_support,
    }
}

/// A step picked from a nested sequence. `flagged` marks a rule that could
/// not be met on the available steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Pick {
    pub step: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePicks {
    pub k_aware: Pick,
    pub noise_norm: Pick,
    pub sigma: Pick,
}

/// First step whose residual norm is at most `bound` (exact fits always
/// qualify), else the last step, flagged.
fn first_below(norms: &[f64], bound: f64) -> Pick {
    let floor = EXACT_FIT_REL * norms.first().copied().unwrap_or(0.0);
    match norms.iter().position(|&r| r <= bound.max(floor)) {
        Some(step) => Pick {
            step,
            flagged: false,
        },
        None => Pick {
            step: norms.len().saturating_sub(1),
            flagged: true,
        },
    }
}

/// The three oracle stopping points read off one run-to-`k_max` sequence.
pub fn oracle_selectors<S: SupportSequence + ?Sized>(
    seq: &S,
    k_block: usize,
    noise_norm: f64,
    epsilon: f64,
) -> OraclePicks {
    let norms = seq.residual_norms();
    OraclePicks {
        k_aware: Pick {
            step: k_block.min(seq.steps()),
            flagged: seq.steps() < k_block,
        },
        noise_norm: first_below(norms, noise_norm),
        sigma: first_below(norms, epsilon),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub selector: Selector,
    pub alpha: Option<f64>,
    /// Row support, sorted.
    pub support: Vec<usize>,
    pub k_selected: usize,
    pub exact: bool,
    /// `‖B - B̂‖_F² / L`.
    pub sq_error: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub algorithm: Algorithm,
    pub outcomes: Vec<Outcome>,
    pub sigma: f64,
    pub noise_norm: f64,
    pub residual_ratios: Vec<f64>,
    pub k_min: Option<usize>,
}

/// Everything shared by the trials of one experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    scenario: Scenario,
    k_max: usize,
    design: DesignMatrix,
    greedy_profiles: Vec<ThresholdProfile>,
    lasso_profiles: Vec<ThresholdProfile>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let scenario = config.scenario()?;
        let k_max = config.k_max()?;
        let design = match config.design {
            DesignKind::HadamardIdentity => hadamard_identity_design(config.n, config.block_len)?,
            DesignKind::Gaussian => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(DESIGN_STREAM);
                gaussian_design(&mut rng, config.n, config.p, config.block_len)?
            }
        };
        let grrt = config.selectors.contains(&Selector::Grrt);
        let alphas: &[f64] = if grrt { &config.alphas } else { &[] };
        let greedy_profiles = alphas
            .iter()
            .map(|&a| {
                ThresholdProfile::new(
                    config.n,
                    config.p,
                    scenario,
                    a,
                    k_max,
                    PosRule::FullDictionary,
                )
            })
            .collect::<grrt_core::Result<Vec<_>>>()?;
        let lasso_profiles = if config.algorithms.contains(&Algorithm::Lasso) {
            alphas
                .iter()
                .map(|&a| ThresholdProfile::for_lasso(config.n, config.p, a, k_max))
                .collect::<grrt_core::Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(Self {
            config,
            scenario,
            k_max,
            design,
            greedy_profiles,
            lasso_profiles,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Runs every configured algorithm on one instance drawn for
    /// (`snr_index`, `trial`).
    pub fn run_trial(&self, snr_index: usize, trial: usize) -> Result<Vec<TrialResult>> {
        let cfg = &self.config;
        let sigma = cfg.sigma(cfg.snr_db[snr_index]);
        let mut rng = trial_rng(cfg.seed, snr_index, trial);
        let inst = sample_instance(&self.design, self.scenario, cfg.k_block, sigma, &mut rng);
        cfg.algorithms
            .iter()
            .map(|&alg| match alg {
                Algorithm::Greedy => self.greedy_trial(&inst),
                Algorithm::Lasso => self.lasso_trial(&inst),
            })
            .collect()
    }

    fn outcome(
        &self,
        inst: &Instance,
        selector: Selector,
        alpha: Option<f64>,
        mut support: Vec<usize>,
        k_selected: usize,
        flagged: bool,
    ) -> Result<Outcome> {
        let estimate = LsFactorization::from_support(&inst.y, &self.design, &support)?
            .estimate(self.design.cols());
        support.sort_unstable();
        Ok(Outcome {
            selector,
            alpha,
            exact: support == inst.row_support,
            support,
            k_selected,
            sq_error: estimate.sub(&inst.signal).frobenius_norm_sq()
                / self.scenario.num_vectors() as f64,
            flagged,
        })
    }

    fn sequence_outcomes<S: SupportSequence>(
        &self,
        inst: &Instance,
        seq: &S,
        profiles: &[ThresholdProfile],
    ) -> Result<Vec<Outcome>> {
        let cfg = &self.config;
        let eps = noise_norm_bound(cfg.n, cfg.num_vectors, inst.sigma)?;
        let picks = oracle_selectors(seq, cfg.k_block, inst.noise_norm(), eps);
        let mut out = Vec::new();
        for &sel in &cfg.selectors {
            let pick = match sel {
                Selector::KAware => &picks.k_aware,
                Selector::NoiseNorm => &picks.noise_norm,
                Selector::Sigma => &picks.sigma,
                Selector::Grrt => {
                    for profile in profiles {
                        out.push(self.grrt_outcome(inst, seq, profile)?);
                    }
                    continue;
                }
                Selector::LassoFixed => continue,
            };
            out.push(self.outcome(
                inst,
                sel,
                None,
                seq.support_at(pick.step),
                pick.step,
                pick.flagged,
            )?);
        }
        Ok(out)
    }

    fn grrt_outcome<S: SupportSequence>(
        &self,
        inst: &Instance,
        seq: &S,
        profile: &ThresholdProfile,
    ) -> Result<Outcome> {
        let alpha = Some(profile.alpha());
        if seq.steps() == 0 {
            return self.outcome(inst, Selector::Grrt, alpha, Vec::new(), 0, true);
        }
        let policy: FallbackPolicy = self.config.fallback.into();
        let res = grrt_select(seq, profile, &inst.y, &self.design, policy)?;
        let k = res.k_selected.unwrap_or(0);
        let mut out = self.outcome(
            inst,
            Selector::Grrt,
            alpha,
            res.support,
            k,
            res.fallback_engaged,
        )?;
        if res.fallback_engaged && policy == FallbackPolicy::EmptySupport {
            // an empty answer never counts as recovery, even for a zero signal
            out.exact = false;
        }
        Ok(out)
    }

    fn greedy_trial(&self, inst: &Instance) -> Result<TrialResult> {
        let trace = run_greedy(
            &inst.y,
            &self.design,
            self.scenario,
            StoppingRule::RunToKmax,
            self.k_max,
        )?;
        Ok(TrialResult {
            algorithm: Algorithm::Greedy,
            outcomes: self.sequence_outcomes(inst, &trace, &self.greedy_profiles)?,
            sigma: inst.sigma,
            noise_norm: inst.noise_norm(),
            residual_ratios: trace.residual_ratios().to_vec(),
            k_min: minimal_superset_step(&trace, &inst.row_support),
        })
    }

    fn lasso_trial(&self, inst: &Instance) -> Result<TrialResult> {
        let mut outcomes = match lasso_aggregated(&inst.y, &self.design, self.k_max) {
            Ok(agg) => self.sequence_outcomes(inst, &agg, &self.lasso_profiles)?,
            Err(grrt_core::Error::PathTie { .. }) => self.degenerate_lasso(inst, false)?,
            Err(e) => return Err(e.into()),
        };
        if self.config.selectors.contains(&Selector::LassoFixed) {
            let lambda = baseline_lambda(inst.sigma, self.design.cols());
            match lasso_fixed_lambda(&inst.y, &self.design, lambda) {
                Ok((support, _)) => {
                    let k = support.len();
                    outcomes.push(self.outcome(
                        inst,
                        Selector::LassoFixed,
                        None,
                        support,
                        k,
                        false,
                    )?);
                }
                Err(grrt_core::Error::PathTie { .. } | grrt_core::Error::Extrapolation { .. }) => {
                    outcomes.extend(self.degenerate_lasso(inst, true)?);
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(TrialResult {
            algorithm: Algorithm::Lasso,
            outcomes,
            sigma: inst.sigma,
            noise_norm: inst.noise_norm(),
            residual_ratios: Vec::new(),
            k_min: None,
        })
    }

    /// Flagged empty answers for a path that hit a degenerate tie.
    fn degenerate_lasso(&self, inst: &Instance, fixed: bool) -> Result<Vec<Outcome>> {
        let mut out = Vec::new();
        for &sel in &self.config.selectors {
            let alphas: Vec<Option<f64>> = match (sel, fixed) {
                (Selector::LassoFixed, true) => vec![None],
                (Selector::Grrt, false) => self
                    .lasso_profiles
                    .iter()
                    .map(|p| Some(p.alpha()))
                    .collect(),
                (Selector::LassoFixed, false) | (Selector::Grrt, true) => continue,
                (_, false) => vec![None],
                (_, true) => continue,
            };
            for alpha in alphas {
                let mut o = self.outcome(inst, sel, alpha, Vec::new(), 0, true)?;
                o.exact = false;
                out.push(o);
            }
        }
        Ok(out)
    }

    /// All trials at every SNR point, reduced in trial order.
    pub fn run(&self) -> Result<Vec<ResultRow>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers.unwrap_or(0))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        let mut per_snr = Vec::with_capacity(self.config.snr_db.len());
        for si in 0..self.config.snr_db.len() {
            let trials: Vec<Vec<TrialResult>> = pool.install(|| {
                (0..self.config.trials)
                    .into_par_iter()
                    .map(|t| self.run_trial(si, t))
                    .collect::<Result<_>>()
            })?;
            per_snr.push(trials);
        }
        Ok(self.reduce(&per_snr))
    }

    fn reduce(&self, per_snr: &[Vec<Vec<TrialResult>>]) -> Vec<ResultRow> {
        let cfg = &self.config;
        let mut rows = Vec::new();
        for (ai, &alg) in cfg.algorithms.iter().enumerate() {
            let alg_name = match alg {
                Algorithm::Greedy => self.scenario.kind().greedy_name(),
                Algorithm::Lasso => "lasso",
            };
            let n_outcomes = per_snr
                .first()
                .and_then(|t| t.first())
                .map_or(0, |t| t[ai].outcomes.len());
            for oi in 0..n_outcomes {
                for (si, trials) in per_snr.iter().enumerate() {
                    let first = &trials[0][ai].outcomes[oi];
                    let (mut fails, mut se, mut ks, mut flags) = (0usize, 0.0, 0usize, 0usize);
                    for t in trials {
                        let o = &t[ai].outcomes[oi];
                        fails += usize::from(!o.exact);
                        se += o.sq_error;
                        ks += o.k_selected;
                        flags += usize::from(o.flagged);
                    }
                    let n = trials.len() as f64;
                    rows.push(ResultRow {
                        scenario: self.scenario.kind().name().to_string(),
                        algorithm: alg_name.to_string(),
                        selector: first.selector.name().to_string(),
                        alpha: first.alpha,
                        snr_db: cfg.snr_db[si],
                        trials: trials.len(),
                        pe: fails as f64 / n,
                        mse: se / n,
                        mean_k_selected: ks as f64 / n,
                        fallback_rate: flags as f64 / n,
                    });
                }
            }
        }
        rows
    }
}

/// Validates the configuration, then runs every trial.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Experiment::new(config.clone())?.run()
}

/// Kolmogorov-Smirnov distance between `samples` and a continuous CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let f = cdf(s);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(samples: usize) -> f64 {
    1.63 / (samples as f64).sqrt()
}

/// KS distance between the empirical law of
/// `‖(I - P(S₂)) W‖_F² / ‖(I - P(S₁)) W‖_F²` and
/// `Beta((n - k₂) L / 2, (k₂ - k₁) L / 2)`, for Gaussian `W` of deviation
/// `sigma` and nested supports made of the first `k₁ ⊂ k₂` columns of a
/// Gaussian design drawn from `rng`.
pub fn validate_residual_ratio_law(
    n: usize,
    l: usize,
    k1: usize,
    k2: usize,
    num_samples: usize,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<f64> {
    if !(k1 < k2 && k2 < n) || l == 0 || num_samples == 0 || sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Config(format!(
            "need k1 < k2 < n, L >= 1, samples >= 1 and sigma > 0 (n = {n}, L = {l}, k1 = {k1}, k2 = {k2}, sigma = {sigma})"
        )));
    }
    let x = gaussian_design(rng, n, k2, 1)?;
    let s1: Vec<usize> = (0..k1).collect();
    let extra: Vec<usize> = (k1..k2).collect();
    let mut ratios = Vec::with_capacity(num_samples);
    for _ in 0..num_samples {
        let w = Matrix::from_fn(n, l, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
        let mut f = LsFactorization::from_support(&w, &x, &s1)?;
        let r1 = f.residual().frobenius_norm_sq();
        f.extend(&x, &extra)?;
        ratios.push(f.residual().frobenius_norm_sq() / r1);
    }
    let law = BetaParams::new(
        (n - k2) as f64 * l as f64 / 2.0,
        (k2 - k1) as f64 * l as f64 / 2.0,
    )?;
    Ok(ks_statistic(&mut ratios, |v| {
        beta_cdf(law, v.clamp(0.0, 1.0)).unwrap_or(f64::NAN)
    }))
}
