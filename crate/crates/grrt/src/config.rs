//! Experiment configuration.
//!
//! The file format is flat TOML:
//!
//! ```toml
//! num_vectors = 10          # L
//! block_len = 1             # l_b
//! n = 64
//! p = 128
//! k_block = 6               # nonzero blocks per signal
//! snr_db = [0, 10, 20, inf] # inf means noiseless
//! trials = 2000
//! seed = 1
//! algorithms = ["greedy"]   # greedy, lasso
//! selectors = ["k-aware", "noise-norm", "sigma", "grrt"]
//! alphas = [0.1, 0.01]
//! k_max = 32                # optional, defaults to floor((n + 1) / (2 l_b))
//! design = "hadamard-identity"  # or "gaussian"
//! fallback = "empty"        # or "min-ratio"
//! workers = 8               # optional, defaults to all cores
//! ```

use std::path::Path;

use grrt_core::{default_kmax, FallbackPolicy, Scenario};
use serde::Deserialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// The OMP variant matching the scenario.
    Greedy,
    /// LASSO path with support aggregation.
    Lasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selector {
    KAware,
    NoiseNorm,
    Sigma,
    Grrt,
    LassoFixed,
}

impl Selector {
    pub fn name(self) -> &'static str {
        match self {
            Selector::KAware => "k-aware",
            Selector::NoiseNorm => "noise-norm",
            Selector::Sigma => "sigma",
            Selector::Grrt => "grrt",
            Selector::LassoFixed => "lasso-fixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    #[default]
    HadamardIdentity,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    #[default]
    Empty,
    MinRatio,
}

impl From<Fallback> for FallbackPolicy {
    fn from(f: Fallback) -> Self {
        match f {
            Fallback::Empty => FallbackPolicy::EmptySupport,
            Fallback::MinRatio => FallbackPolicy::MinRatio,
        }
    }
}

fn one() -> usize {
    1
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Greedy]
}

fn default_selectors() -> Vec<Selector> {
    vec![
        Selector::KAware,
        Selector::NoiseNorm,
        Selector::Sigma,
        Selector::Grrt,
    ]
}

fn default_alphas() -> Vec<f64> {
    vec![0.1]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "one")]
    pub num_vectors: usize,
    #[serde(default = "one")]
    pub block_len: usize,
    pub n: usize,
    pub p: usize,
    pub k_block: usize,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_selectors")]
    pub selectors: Vec<Selector>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default)]
    pub design: DesignKind,
    #[serde(default)]
    pub fallback: Fallback,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// Experiment defaults for `n = 64`, `p = 128` on the
    /// Hadamard+identity design.
    pub fn new(scenario: Scenario, k_block: usize, snr_db: Vec<f64>, trials: usize) -> Self {
        Self {
            num_vectors: scenario.num_vectors(),
            block_len: scenario.block_len(),
            n: 64,
            p: 128,
            k_block,
            snr_db,
            trials,
            seed: 0,
            algorithms: default_algorithms(),
            selectors: default_selectors(),
            alphas: default_alphas(),
            k_max: None,
            design: DesignKind::HadamardIdentity,
            fallback: Fallback::Empty,
            workers: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|source| Error::Toml {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Ok(Scenario::new(self.num_vectors, self.block_len)?)
    }

    pub fn k_max(&self) -> Result<usize> {
        match self.k_max {
            Some(k) => Ok(k),
            None => Ok(default_kmax(self.n, self.block_len)?),
        }
    }

    /// Row sparsity `k_row = k_block · l_b`.
    pub fn k_row(&self) -> usize {
        self.k_block * self.block_len
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.scenario()?;
        if self.design == DesignKind::HadamardIdentity
            && (self.n < 2 || !self.n.is_power_of_two() || self.p != 2 * self.n)
        {
            return bad(format!(
                "the Hadamard+identity design needs n a power of two and p = 2n, got n = {}, p = {}",
                self.n, self.p
            ));
        }
        if !self.p.is_multiple_of(self.block_len) {
            return bad(format!(
                "block length {} does not divide p = {}",
                self.block_len, self.p
            ));
        }
        let k_max = self.k_max()?;
        if self.k_block == 0 || self.k_block > k_max {
            return bad(format!(
                "need 1 <= k_block <= k_max, got k_block = {}, k_max = {k_max}",
                self.k_block
            ));
        }
        if k_max * self.block_len >= self.n || k_max > self.p / self.block_len {
            return bad(format!(
                "k_max = {k_max} is too large for n = {}, p = {}, l_b = {}",
                self.n, self.p, self.block_len
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| s.is_nan()) {
            return bad("snr_db must list at least one value".into());
        }
        if self.algorithms.is_empty() || self.selectors.is_empty() {
            return bad("need at least one algorithm and one selector".into());
        }
        if self.selectors.contains(&Selector::Grrt)
            && (self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)))
        {
            return bad("every alpha must lie in (0, 1)".into());
        }
        if self.algorithms.contains(&Algorithm::Lasso)
            && (self.num_vectors != 1 || self.block_len != 1)
        {
            return bad("the LASSO path is only available for L = 1, l_b = 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }

    /// `σ = √(k_row / (n · 10^(dB/10)))`; zero for an infinite SNR.
    pub fn sigma(&self, snr_db: f64) -> f64 {
        if snr_db == f64::INFINITY {
            return 0.0;
        }
        let snr = 10f64.powf(snr_db / 10.0);
        (self.k_row() as f64 / (self.n as f64 * snr)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_toml() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            num_vectors = 10
            n = 64
            p = 128
            k_block = 6
            snr_db = [10, inf]
            trials = 5
            selectors = ["grrt", "lasso-fixed"]
            fallback = "min-ratio"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.num_vectors, 10);
        assert_eq!(cfg.block_len, 1);
        assert_eq!(cfg.snr_db[1], f64::INFINITY);
        assert_eq!(cfg.selectors, vec![Selector::Grrt, Selector::LassoFixed]);
        assert_eq!(cfg.fallback, Fallback::MinRatio);
        assert_eq!(cfg.k_max().unwrap(), 32);
        cfg.validate().unwrap();
        assert!(toml::from_str::<ExperimentConfig>("n = 4\nbogus = 1").is_err());
    }

    #[test]
    fn sigma_follows_snr_formula() {
        let cfg = ExperimentConfig::new(Scenario::smv(), 6, vec![10.0], 1);
        assert!((cfg.sigma(10.0).powi(2) - 6.0 / 640.0).abs() < 1e-15);
        assert_eq!(cfg.sigma(f64::INFINITY), 0.0);
    }

    #[test]
    fn validation() {
        let ok = ExperimentConfig::new(Scenario::smv(), 6, vec![10.0], 1);
        ok.validate().unwrap();
        let mut c = ok.clone();
        c.n = 60;
        c.p = 120;
        assert!(c.validate().is_err());
        c.design = DesignKind::Gaussian;
        c.validate().unwrap();
        let mut c = ok.clone();
        c.k_block = 40;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.alphas = vec![0.0];
        c.selectors = vec![Selector::Grrt];
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.num_vectors = 10;
        c.algorithms = vec![Algorithm::Lasso];
        assert!(c.validate().is_err());
    }
}
