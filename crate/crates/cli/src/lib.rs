//! Argument handling and study execution for the `semidiscrete` binary.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semidiscrete::montecarlo::{
    builtin_system, run_experiment, write_artifacts, ConfigError, Executor, ExperimentConfig, ExperimentResult,
    StudyError,
};
use semidiscrete::{check_split_consistency, probe_local_lipschitz, SchemeKind};
use serde::{Deserialize, Serialize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_STUDY_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Environment variable overriding the default output directory.
pub const OUT_ENV: &str = "SEMIDISCRETE_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "semidiscrete",
    version,
    about = "Convergence, positivity and moment studies for semi-discrete SDE schemes",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Strong mean-square error against the finest-grid reference
    Convergence(StudyArgs),
    /// Count paths leaving the positive orthant, per scheme
    Positivity(StudyArgs),
    /// Estimate E max ‖y‖^p per scheme and step size
    Moments(StudyArgs),
    /// Run all three studies
    All(StudyArgs),
    /// Check a built-in split against its system on random points
    ValidateSplit(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    /// JSON config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Initial state; a single value is repeated across all coordinates
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Step count of the reference grid
    #[arg(long)]
    pub fine_steps: Option<usize>,
    /// Coarsening factors relative to the reference grid
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    #[arg(long)]
    pub paths: Option<usize>,
    /// Master seed (required here or in the config file)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Moment exponent
    #[arg(long = "p")]
    pub moment_p: Option<f64>,
    /// Schemes for the positivity and moment studies
    #[arg(long = "scheme", value_delimiter = ',')]
    pub schemes: Option<Vec<SchemeKind>>,
    #[arg(long)]
    pub convergence_scheme: Option<SchemeKind>,
    /// Step count for the positivity study
    #[arg(long = "steps")]
    pub positivity_steps: Option<usize>,
    /// Drive every path with zero increments
    #[arg(long)]
    pub zero_noise: bool,
    #[arg(long, env = OUT_ENV, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (defaults to available parallelism)
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value = "example")]
    pub system: String,
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ball radius for the Lipschitz probe and the point cloud
    #[arg(long, default_value_t = 2.0)]
    pub radius: f64,
    #[arg(long, default_value_t = semidiscrete::DEFAULT_CONSISTENCY_TOL)]
    pub tol: f64,
}

/// Values a config file may set. Absent keys fall back to defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: Option<String>,
    pub dim: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub t_final: Option<f64>,
    pub fine_steps: Option<usize>,
    pub levels: Option<Vec<usize>>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub moment_p: Option<f64>,
    pub schemes: Option<Vec<SchemeKind>>,
    pub convergence_scheme: Option<SchemeKind>,
    pub positivity_steps: Option<usize>,
    pub zero_noise: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudySet {
    Convergence,
    Positivity,
    Moments,
    All,
}

/// Run-level settings that do not affect results.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub studies: StudySet,
    pub out: PathBuf,
    pub workers: usize,
    pub verbosity: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Study(CliConfig, ExperimentConfig),
    ValidateSplit(ValidateArgs),
}

#[derive(Debug)]
pub enum CliError {
    Usage(clap::Error),
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) => e.exit_code(),
            CliError::Config(_) => EXIT_CONFIG,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn load_file(path: &Path) -> Result<ConfigFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid config file {}: {e}", path.display())))
}

/// Layers defaults, then the config file, then flags.
pub fn resolve(args: &StudyArgs, studies: StudySet) -> Result<ExperimentConfig, CliError> {
    let file = match &args.config {
        Some(path) => load_file(path)?,
        None => ConfigFile::default(),
    };
    let defaults = ExperimentConfig::default();

    let seed = args.seed.or(file.seed).ok_or_else(|| ConfigError {
        field: "seed",
        constraint: "is required (pass --seed or set \"seed\" in the config file)".into(),
    })?;
    let dim = args.dim.or(file.dim).unwrap_or(defaults.dim);
    let mut x0 = args.x0.clone().or(file.x0).unwrap_or_else(|| vec![0.5]);
    if x0.len() == 1 && dim > 1 {
        x0 = vec![x0[0]; dim];
    }

    let cfg = ExperimentConfig {
        system: args.system.clone().or(file.system).unwrap_or(defaults.system),
        dim,
        x0,
        t_final: args.t_final.or(file.t_final).unwrap_or(defaults.t_final),
        fine_steps: args.fine_steps.or(file.fine_steps).unwrap_or(defaults.fine_steps),
        levels: args.levels.clone().or(file.levels).unwrap_or(defaults.levels),
        paths: args.paths.or(file.paths).unwrap_or(defaults.paths),
        seed,
        moment_p: args.moment_p.or(file.moment_p).unwrap_or(defaults.moment_p),
        schemes: args.schemes.clone().or(file.schemes).unwrap_or(defaults.schemes),
        convergence_scheme: args
            .convergence_scheme
            .or(file.convergence_scheme)
            .unwrap_or(defaults.convergence_scheme),
        positivity_steps: args
            .positivity_steps
            .or(file.positivity_steps)
            .unwrap_or(defaults.positivity_steps),
        convergence: matches!(studies, StudySet::Convergence | StudySet::All),
        positivity: matches!(studies, StudySet::Positivity | StudySet::All),
        moments: matches!(studies, StudySet::Moments | StudySet::All),
        zero_noise: args.zero_noise || file.zero_noise.unwrap_or(false),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_and_validate<I, T>(args: I) -> Result<Invocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(CliError::Usage)?;
    let (studies, args) = match cli.command {
        Command::Convergence(a) => (StudySet::Convergence, a),
        Command::Positivity(a) => (StudySet::Positivity, a),
        Command::Moments(a) => (StudySet::Moments, a),
        Command::All(a) => (StudySet::All, a),
        Command::ValidateSplit(v) => {
            if v.dim == 0 {
                return Err(ConfigError {
                    field: "dim",
                    constraint: "must be >= 1".into(),
                }
                .into());
            }
            return Ok(Invocation::ValidateSplit(v));
        }
    };
    let cfg = resolve(&args, studies)?;
    let workers = match args.workers {
        Some(0) => {
            return Err(ConfigError {
                field: "workers",
                constraint: "must be >= 1".into(),
            }
            .into())
        }
        Some(k) => k,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    Ok(Invocation::Study(
        CliConfig {
            studies,
            out: args.out.clone(),
            workers,
            verbosity: args.verbose,
        },
        cfg,
    ))
}

/// One line per study for stdout.
pub fn summary_lines(result: &ExperimentResult) -> Vec<String> {
    let mut lines = Vec::new();
    if let Some(study) = &result.strong_error {
        let first = study.rows.first();
        let last = study.rows.last();
        let order = match result.order.as_ref().and_then(|o| o.estimate.as_ref()) {
            Some(est) => format!(
                "slope {:.3} (strong order {:.3}, r^2 {:.4})",
                est.slope, est.strong_order, est.r_squared
            ),
            None => format!(
                "order not estimated ({})",
                result.order.as_ref().and_then(|o| o.note.clone()).unwrap_or_default()
            ),
        };
        let diverged: usize = study.rows.iter().map(|r| r.n_diverged).sum();
        lines.push(format!(
            "convergence: {} vs reference, {} levels, mse {:.4e} -> {:.4e}, {order}, {diverged} diverged, {} non-monotone pairs",
            study.scheme,
            study.rows.len(),
            first.map_or(f64::NAN, |r| r.mse),
            last.map_or(f64::NAN, |r| r.mse),
            study.non_monotone.len()
        ));
    }
    for rep in result.positivity.iter().flatten() {
        lines.push(format!(
            "positivity: {} delta {:.4e}: {}/{} paths violated ({} diverged), min coordinate {:.4e}",
            rep.scheme, rep.delta, rep.n_paths_with_violation, rep.n_paths, rep.n_diverged, rep.min_coordinate
        ));
    }
    for rep in result.moments.iter().flatten() {
        lines.push(format!(
            "moments: {} p={}: {} step sizes, max/min {:.4}, {}",
            rep.scheme,
            rep.p,
            rep.rows.len(),
            rep.spread_ratio(),
            if rep.unbounded { "UNBOUNDED (diverged paths)" } else { "bounded" }
        ));
    }
    lines
}

#[derive(Serialize)]
struct Timing {
    wall_clock_seconds: f64,
    workers: usize,
}

fn run_study(cli: &CliConfig, cfg: &ExperimentConfig) -> i32 {
    if let Err(e) = fs::create_dir_all(&cli.out) {
        eprintln!("error: output directory {} is not writable: {e}", cli.out.display());
        return EXIT_CONFIG;
    }
    let exec = match Executor::new(cli.workers) {
        Ok(exec) => exec,
        Err(e) => {
            eprintln!("error: cannot start {} workers: {e}", cli.workers);
            return EXIT_STUDY_FAILURE;
        }
    };
    if cli.verbosity > 0 {
        eprintln!(
            "running {:?} with {} workers into {}; config hash {}",
            cli.studies,
            exec.workers(),
            cli.out.display(),
            cfg.hash()
        );
    }
    let start = Instant::now();
    let result = match run_experiment(cfg, &exec) {
        Ok(r) => r,
        Err(StudyError::Config(e)) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("error: study failed: {e}");
            return EXIT_STUDY_FAILURE;
        }
    };
    let elapsed = start.elapsed().as_secs_f64();

    let write = || -> io::Result<()> {
        write_artifacts(&result, &cli.out)?;
        let timing = Timing {
            wall_clock_seconds: elapsed,
            workers: exec.workers(),
        };
        fs::write(
            cli.out.join("timing.json"),
            serde_json::to_vec_pretty(&timing).expect("timing serializes"),
        )
    };
    if let Err(e) = write() {
        eprintln!("error: writing artifacts to {}: {e}", cli.out.display());
        return EXIT_STUDY_FAILURE;
    }
    for line in summary_lines(&result) {
        println!("{line}");
    }
    if cli.verbosity > 0 {
        eprintln!("finished in {elapsed:.2}s");
    }
    EXIT_OK
}

fn validate_split(args: &ValidateArgs) -> i32 {
    let (system, split) = match builtin_system(&args.system, args.dim) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let points: Vec<Vec<f64>> = (0..args.points)
        .map(|_| (0..args.dim).map(|_| rng.random_range(-args.radius..=args.radius)).collect())
        .collect();
    let consistency = match check_split_consistency(&split, &system, &points, args.tol) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    println!(
        "validate-split: system {} dim {}: max consistency deviation {:e} over {} points (tol {:e})",
        args.system, args.dim, consistency.max_abs_deviation, consistency.n_points, args.tol
    );
    let f = |x: &[f64], y: &[f64], out: &mut [f64]| split.f_into(x, y, out).expect("dimensions match");
    let g = |x: &[f64], y: &[f64], out: &mut [f64]| split.g_into(x, y, 0, out).expect("dimensions match");
    for (name, probe) in [
        ("f", probe_local_lipschitz(f, args.dim, args.radius, 2000, args.seed)),
        ("g", probe_local_lipschitz(g, args.dim, args.radius, 2000, args.seed)),
    ] {
        match probe {
            Ok(rep) => println!(
                "validate-split: local Lipschitz estimate for {name} on radius {}: {:.6}",
                args.radius,
                rep.estimated_lipschitz.unwrap_or(f64::NAN)
            ),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        }
    }
    if consistency.within_tol {
        EXIT_OK
    } else {
        EXIT_STUDY_FAILURE
    }
}

pub fn execute(invocation: &Invocation) -> i32 {
    match invocation {
        Invocation::Study(cli, cfg) => run_study(cli, cfg),
        Invocation::ValidateSplit(args) => validate_split(args),
    }
}
