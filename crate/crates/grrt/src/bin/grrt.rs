//! Command-line front end. Indices printed or written by any command are
//! 1-based.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grrt::harness::trial_rng;
use grrt::io::{write_diagnostics, write_knots, DiagnosticRow};
use grrt::{
    gaussian_design, hadamard_identity_design, read_matrix, sample_instance,
    validate_residual_ratio_law, write_matrix, write_results, Algorithm, DesignKind, Error,
    ExperimentConfig, Fallback, Result, Selector,
};
use grrt_core::grrt::kmax_for;
use grrt_core::{
    default_kmax, grrt_select, lasso_aggregated, lasso_path, run_greedy, DesignMatrix, Matrix,
    PosRule, Scenario, ScenarioKind, StoppingRule, SupportSequence, ThresholdProfile,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "grrt",
    version,
    about = "Residual ratio thresholding for sparse recovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo PE/MSE experiment, one CSV row per selector and SNR.
    RunExperiment(RunArgs),
    /// GRRT support selection on a matrix and observation file.
    Solve(SolveArgs),
    /// LASSO path knots for a single observation vector.
    TracePath(TraceArgs),
    /// KS check of the residual-ratio Beta law.
    ValidateDist(ValidateArgs),
    /// Threshold sequence for a configuration.
    GammaTable(GammaArgs),
    /// Writes a random planted instance for `solve`.
    MakeFixture(FixtureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioName {
    Smv,
    Mmv,
    Bsmv,
    Bmmv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgorithmName {
    Omp,
    Somp,
    Bomp,
    #[value(name = "bmmv-omp")]
    BmmvOmp,
    Lasso,
}

#[derive(Clone, Copy, ValueEnum)]
enum PosName {
    Full,
    Single,
}

impl From<PosName> for PosRule {
    fn from(p: PosName) -> Self {
        match p {
            PosName::Full => PosRule::FullDictionary,
            PosName::Single => PosRule::SingleCandidate,
        }
    }
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Sets the default L and l_b: smv 1/1, mmv 10/1, bsmv 1/4, bmmv 10/4.
    #[arg(long, value_enum)]
    scenario: Option<ScenarioName>,
    /// Number of measurement vectors.
    #[arg(long = "L")]
    l: Option<usize>,
    /// Block length.
    #[arg(long)]
    lb: Option<usize>,
}

impl ScenarioArgs {
    fn resolve(&self, data_l: Option<usize>) -> Result<Scenario> {
        let (dl, dlb) = match self.scenario {
            None | Some(ScenarioName::Smv) => (1, 1),
            Some(ScenarioName::Mmv) => (10, 1),
            Some(ScenarioName::Bsmv) => (1, 4),
            Some(ScenarioName::Bmmv) => (10, 4),
        };
        let l = match (self.l, data_l) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!(
                    "--L {a} disagrees with the {b} observation columns"
                )))
            }
            (_, Some(b)) => b,
            (Some(a), None) => a,
            (None, None) => dl,
        };
        let scenario = Scenario::new(l, self.lb.unwrap_or(dlb))?;
        if let Some(name) = self.scenario {
            let want = match name {
                ScenarioName::Smv => ScenarioKind::Smv,
                ScenarioName::Mmv => ScenarioKind::Mmv,
                ScenarioName::Bsmv => ScenarioKind::Bsmv,
                ScenarioName::Bmmv => ScenarioKind::Bmmv,
            };
            if scenario.kind() != want {
                return Err(Error::Config(format!(
                    "--scenario {} does not match L = {}, l_b = {}",
                    want.name(),
                    scenario.num_vectors(),
                    scenario.block_len()
                )));
            }
        }
        Ok(scenario)
    }
}

fn check_algorithm(alg: AlgorithmName, scenario: Scenario) -> Result<Algorithm> {
    let kind = scenario.kind();
    let ok = match alg {
        AlgorithmName::Omp => kind == ScenarioKind::Smv,
        AlgorithmName::Somp => kind == ScenarioKind::Mmv,
        AlgorithmName::Bomp => kind == ScenarioKind::Bsmv,
        AlgorithmName::BmmvOmp => kind == ScenarioKind::Bmmv,
        AlgorithmName::Lasso => kind == ScenarioKind::Smv,
    };
    if !ok {
        return Err(Error::Config(format!(
            "algorithm does not apply to the {} scenario (use {} or lasso for smv)",
            kind.name(),
            kind.greedy_name()
        )));
    }
    Ok(if alg == AlgorithmName::Lasso {
        Algorithm::Lasso
    } else {
        Algorithm::Greedy
    })
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Results CSV (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    k_block: Option<usize>,
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long = "algorithm", value_enum)]
    algorithms: Vec<AlgorithmName>,
    #[arg(long = "selector", value_enum)]
    selectors: Vec<SelectorName>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    snr_db: Vec<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    design: Option<DesignName>,
    #[arg(long, value_enum)]
    fallback: Option<FallbackName>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectorName {
    KAware,
    NoiseNorm,
    Sigma,
    Grrt,
    LassoFixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignName {
    HadamardIdentity,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum FallbackName {
    Empty,
    MinRatio,
}

impl From<FallbackName> for Fallback {
    fn from(f: FallbackName) -> Self {
        match f {
            FallbackName::Empty => Fallback::Empty,
            FallbackName::MinRatio => Fallback::MinRatio,
        }
    }
}

fn experiment_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let scenario = args.scenario.resolve(None)?;
            ExperimentConfig::new(scenario, 6, vec![10.0], 100)
        }
    };
    if args.config.is_some()
        && (args.scenario.scenario.is_some()
            || args.scenario.l.is_some()
            || args.scenario.lb.is_some())
    {
        let s = args.scenario.resolve(None)?;
        cfg.num_vectors = s.num_vectors();
        cfg.block_len = s.block_len();
    }
    if let Some(n) = args.n {
        cfg.n = n;
        cfg.p = 2 * n;
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    if let Some(k) = args.k_block {
        cfg.k_block = k;
    }
    if !args.alphas.is_empty() {
        cfg.alphas = args.alphas.clone();
    }
    if args.kmax.is_some() {
        cfg.k_max = args.kmax;
    }
    if !args.algorithms.is_empty() {
        let scenario = cfg.scenario()?;
        cfg.algorithms = args
            .algorithms
            .iter()
            .map(|&a| check_algorithm(a, scenario))
            .collect::<Result<_>>()?;
    }
    if !args.selectors.is_empty() {
        cfg.selectors = args
            .selectors
            .iter()
            .map(|s| match s {
                SelectorName::KAware => Selector::KAware,
                SelectorName::NoiseNorm => Selector::NoiseNorm,
                SelectorName::Sigma => Selector::Sigma,
                SelectorName::Grrt => Selector::Grrt,
                SelectorName::LassoFixed => Selector::LassoFixed,
            })
            .collect();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if !args.snr_db.is_empty() {
        cfg.snr_db = args.snr_db.clone();
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if let Some(d) = args.design {
        cfg.design = match d {
            DesignName::HadamardIdentity => DesignKind::HadamardIdentity,
            DesignName::Gaussian => DesignKind::Gaussian,
        };
    }
    if let Some(f) = args.fallback {
        cfg.fallback = f.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_experiment(args: RunArgs) -> Result<ExitCode> {
    let cfg = experiment_config(&args)?;
    let rows = grrt::run_experiment(&cfg)?;
    match &args.out {
        Some(path) => {
            let f = File::create(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            write_results(BufWriter::new(f), &rows)?;
        }
        None => write_results(io::stdout().lock(), &rows)?,
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
struct SolveArgs {
    /// Design matrix CSV (n rows, p columns).
    #[arg(long)]
    matrix: PathBuf,
    /// Observation CSV (n rows, L columns).
    #[arg(long)]
    observations: PathBuf,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Defaults to floor((n + 1) / (2 l_b)).
    #[arg(long)]
    kmax: Option<usize>,
    /// Defaults to the OMP variant of the scenario.
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmName>,
    #[arg(long, value_enum, default_value = "empty")]
    fallback: FallbackName,
    #[arg(long, value_enum, default_value = "full")]
    pos: PosName,
    /// Writes the p × L estimate.
    #[arg(long)]
    estimate_out: Option<PathBuf>,
    /// Writes k, residual norm, ratio, threshold and the selected flag.
    #[arg(long)]
    diagnostics_out: Option<PathBuf>,
}

fn load_design(path: &Path, block_len: usize) -> Result<DesignMatrix> {
    let x = DesignMatrix::new(read_matrix(path)?, block_len).map_err(|e| match e {
        grrt_core::Error::ZeroColumn { column } => Error::Config(format!(
            "{}: column {} is zero and cannot be normalized",
            path.display(),
            column + 1
        )),
        other => other.into(),
    })?;
    if x.renormalization() > 1e-6 {
        eprintln!(
            "warning: {}: columns rescaled to unit norm (largest change {:.3e})",
            path.display(),
            x.renormalization()
        );
    }
    Ok(x)
}

fn load_problem(
    matrix: &Path,
    observations: &Path,
    scenario: &ScenarioArgs,
) -> Result<(DesignMatrix, Matrix, Scenario)> {
    let y = read_matrix(observations)?;
    let scenario = scenario.resolve(Some(y.cols()))?;
    let x = load_design(matrix, scenario.block_len())?;
    if x.rows() != y.rows() {
        return Err(Error::Config(format!(
            "{} has {} rows but {} has {}",
            matrix.display(),
            x.rows(),
            observations.display(),
            y.rows()
        )));
    }
    Ok((x, y, scenario))
}

fn one_based(support: &[usize]) -> String {
    support
        .iter()
        .map(|j| (j + 1).to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })
}

fn solve(args: SolveArgs) -> Result<ExitCode> {
    let (x, y, scenario) = load_problem(&args.matrix, &args.observations, &args.scenario)?;
    let alg = match args.algorithm {
        Some(a) => check_algorithm(a, scenario)?,
        None => Algorithm::Greedy,
    };
    let n = x.rows();
    let lb = scenario.block_len();
    let k_max = match args.kmax {
        Some(k) => k,
        None => default_kmax(n, lb)?.min(x.num_blocks()),
    };
    let profile = ThresholdProfile::new(n, x.cols(), scenario, args.alpha, k_max, args.pos.into())?;
    let policy = Fallback::from(args.fallback).into();
    let (result, norms) = match alg {
        Algorithm::Greedy => {
            let trace = run_greedy(&y, &x, scenario, StoppingRule::RunToKmax, k_max)?;
            let norms = SupportSequence::residual_norms(&trace).to_vec();
            (grrt_select(&trace, &profile, &y, &x, policy)?, norms)
        }
        Algorithm::Lasso => {
            let agg = lasso_aggregated(&y, &x, k_max)?;
            let norms = SupportSequence::residual_norms(&agg).to_vec();
            (grrt_select(&agg, &profile, &y, &x, policy)?, norms)
        }
    };
    let mut support = result.support.clone();
    support.sort_unstable();
    println!("support: {}", one_based(&support));
    match result.k_selected {
        Some(k) => println!("k_selected: {k}"),
        None => println!("k_selected: none"),
    }
    if result.fallback_engaged {
        println!("fallback engaged: no step has RR(k) < Gamma(k)");
    }
    if let Some(path) = &args.estimate_out {
        write_matrix(path, &result.estimate)?;
    }
    if let Some(path) = &args.diagnostics_out {
        let rows: Vec<DiagnosticRow> = norms
            .iter()
            .enumerate()
            .map(|(k, &r)| DiagnosticRow {
                k,
                residual_norm: r,
                residual_ratio: k.checked_sub(1).map(|i| result.residual_ratios[i]),
                gamma: k.checked_sub(1).map(|i| result.gamma[i]),
                selected: result.k_selected == Some(k),
            })
            .collect();
        write_diagnostics(create(path)?, &rows)?;
    }
    Ok(if result.fallback_engaged {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    observations: PathBuf,
    /// Defaults to min(n, p).
    #[arg(long)]
    max_active: Option<usize>,
    /// Knot CSV (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn trace_path(args: TraceArgs) -> Result<ExitCode> {
    let y = read_matrix(&args.observations)?;
    if y.cols() != 1 {
        return Err(Error::Config(format!(
            "{}: the LASSO path needs one observation column, found {}",
            args.observations.display(),
            y.cols()
        )));
    }
    let x = load_design(&args.matrix, 1)?;
    let path = lasso_path(&y, &x, args.max_active.unwrap_or(x.rows().min(x.cols())))?;
    match &args.out {
        Some(p) => write_knots(create(p)?, &path)?,
        None => write_knots(io::stdout().lock(), &path)?,
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long = "L", default_value_t = 1)]
    l: usize,
    #[arg(long, default_value_t = 2)]
    k1: usize,
    #[arg(long, default_value_t = 3)]
    k2: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

fn validate_dist(args: ValidateArgs) -> Result<ExitCode> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let ks = validate_residual_ratio_law(
        args.n,
        args.l,
        args.k1,
        args.k2,
        args.samples,
        args.sigma,
        &mut rng,
    )?;
    let crit = grrt::ks_critical_1pct(args.samples);
    println!("ks_statistic: {ks:.6}");
    println!("critical_1pct: {crit:.6}");
    println!(
        "verdict: {}",
        if ks < crit { "consistent" } else { "rejected" }
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
struct GammaArgs {
    #[arg(long)]
    n: usize,
    /// Defaults to 2n.
    #[arg(long)]
    p: Option<usize>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    alpha: f64,
    /// Defaults to floor((n + 1) / (2 l_b)).
    #[arg(long)]
    kmax: Option<usize>,
    /// Use floor((n + L) / (2 l_b)) as the default k_max.
    #[arg(long)]
    joint_kmax: bool,
    #[arg(long, value_enum, default_value = "full")]
    pos: PosName,
}

fn gamma_table(args: GammaArgs) -> Result<ExitCode> {
    let scenario = args.scenario.resolve(None)?;
    let lb = scenario.block_len();
    let k_max = match (args.kmax, args.joint_kmax) {
        (Some(k), _) => k,
        (None, true) => kmax_for(args.n, scenario.num_vectors(), lb)?,
        (None, false) => default_kmax(args.n, lb)?,
    };
    let p = args.p.unwrap_or(2 * args.n);
    let profile = ThresholdProfile::new(args.n, p, scenario, args.alpha, k_max, args.pos.into())?;
    let mut out = io::stdout().lock();
    let w = |e| Error::Io {
        path: "<stdout>".into(),
        source: e,
    };
    writeln!(out, "k,dof_a,dof_b,pos,gamma").map_err(w)?;
    for k in 1..=k_max {
        let (a, b) = profile.degrees_of_freedom(k);
        writeln!(
            out,
            "{k},{a},{b},{},{:?}",
            profile.pos(k),
            profile.gamma()[k - 1]
        )
        .map_err(w)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Nonzero blocks.
    #[arg(long, default_value_t = 4)]
    k_block: usize,
    #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
    snr_db: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussian design instead of Hadamard+identity.
    #[arg(long)]
    gaussian: bool,
    #[arg(long)]
    matrix_out: PathBuf,
    #[arg(long)]
    observations_out: PathBuf,
    /// Writes the planted p × L signal.
    #[arg(long)]
    signal_out: Option<PathBuf>,
}

fn make_fixture(args: FixtureArgs) -> Result<ExitCode> {
    let scenario = args.scenario.resolve(None)?;
    let mut rng = trial_rng(args.seed, 0, 0);
    let x = if args.gaussian {
        gaussian_design(&mut rng, args.n, 2 * args.n, scenario.block_len())?
    } else {
        hadamard_identity_design(args.n, scenario.block_len())?
    };
    let mut cfg = ExperimentConfig::new(scenario, args.k_block, vec![args.snr_db], 1);
    cfg.n = args.n;
    cfg.p = 2 * args.n;
    let sigma = cfg.sigma(args.snr_db);
    if args.k_block == 0 || args.k_block > x.num_blocks() {
        return Err(Error::Config(format!(
            "k_block must lie in 1..={}",
            x.num_blocks()
        )));
    }
    let inst = sample_instance(&x, scenario, args.k_block, sigma, &mut rng);
    write_matrix(&args.matrix_out, x.matrix())?;
    write_matrix(&args.observations_out, &inst.y)?;
    if let Some(path) = &args.signal_out {
        write_matrix(path, &inst.signal)?;
    }
    println!("support: {}", one_based(&inst.row_support));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RunExperiment(a) => run_experiment(a),
        Command::Solve(a) => solve(a),
        Command::TracePath(a) => trace_path(a),
        Command::ValidateDist(a) => validate_dist(a),
        Command::GammaTable(a) => gamma_table(a),
        Command::MakeFixture(a) => make_fixture(a),
    };
    match result {
        Ok(code) => code,
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(e));
            ExitCode::FAILURE
        }
    }
}

fn broken_pipe(e: &Error) -> bool {
    match e {
        Error::Io { source, .. } => source.kind() == io::ErrorKind::BrokenPipe,
        Error::Csv(c) => {
            matches!(c.kind(), csv::ErrorKind::Io(s) if s.kind() == io::ErrorKind::BrokenPipe)
        }
        _ => false,
    }
}

/// Error text with 1-based column numbers.
fn describe(e: Error) -> String {
    let Error::Core(core) = e else {
        return e.to_string();
    };
    match core {
        grrt_core::Error::RankDeficient { columns } => {
            format!("columns {} are linearly dependent", one_based(&columns))
        }
        grrt_core::Error::GreedyRank { columns, .. } => format!(
            "greedy selection reached linearly dependent columns {}",
            one_based(&columns)
        ),
        grrt_core::Error::PathTie { variables, lambda } => format!(
            "simultaneous LASSO path events for variables {} at lambda {lambda:e}; \
             the design has exactly dependent columns there, try a smaller --max-active",
            one_based(&variables)
        ),
        other => other.to_string(),
    }
}
