//! `jointsl` — joint-model super learning for dynamic risk prediction.
//!
//! Subcommands: `simulate`, `fit`, `superlearn`, `evaluate`, `replicate`.
//! Exit codes: 0 success, 2 validation error, 3 numerical failure,
//! 4 partial replication.

use clap::{Args, Parser, Subcommand};
use jointsl::cli::commands::{
    self, CensoringChoice, DiffChoice, EvaluateArgs, FitArgs, MetricChoice, ReplicateArgs,
    SimulateArgs, SuperlearnArgs, DEFAULT_TARGET_CENSORING,
};
use jointsl::error::Error;
use jointsl::scoring::DEFAULT_EPSILON;
use jointsl::simulate::Scenario;
use std::path::PathBuf;

/// Environment variable overriding the default worker count.
const WORKERS_ENV: &str = "JOINTSL_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "jointsl",
    version,
    about = "Super learning of joint models for dynamic risk prediction",
    propagate_version = true
)]
struct Cli {
    /// Worker threads (default: JOINTSL_WORKERS or the number of cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    Scenario::parse(s).map_err(|e| e.to_string())
}

/// Shared scoring/optimization flags.
#[derive(Debug, Args)]
struct ScoreOpts {
    /// Landmark prediction times, comma separated (e.g. 6,8).
    #[arg(long, value_delimiter = ',', required = true)]
    landmarks: Vec<f64>,

    /// Width of the prediction window (t, t+dt].
    #[arg(long)]
    dt: f64,

    /// Accuracy metric family to optimize and report.
    #[arg(long, value_enum, default_value = "both")]
    metric: MetricChoice,

    /// Censoring handling for the Brier score.
    #[arg(long, value_enum, default_value = "ipcw")]
    censoring_weights: CensoringChoice,

    /// Half-width of the EPCE density bracket.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,

    /// Differencing scheme for the EPCE density bracket.
    #[arg(long, value_enum, default_value = "forward")]
    diff: DiffChoice,

    /// Monte Carlo draws per conditional risk.
    #[arg(long, default_value_t = 200)]
    mc_draws: usize,

    /// MCMC iterations per model fit.
    #[arg(long, default_value_t = 6000)]
    iterations: usize,

    /// MCMC burn-in iterations.
    #[arg(long, default_value_t = 3000)]
    burn_in: usize,

    /// MCMC thinning stride.
    #[arg(long, default_value_t = 3)]
    thin: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate train/test dataset pairs under a standard scenario.
    Simulate {
        /// Scenario I, II, or III.
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,

        /// Training-set size.
        #[arg(long, default_value_t = 750)]
        n: usize,

        /// Test-set size (defaults to n).
        #[arg(long)]
        test_n: Option<usize>,

        /// Number of dataset pairs.
        #[arg(long, default_value_t = 1)]
        reps: usize,

        /// Master seed; outputs are a pure function of the configuration.
        #[arg(long)]
        seed: u64,

        /// Target censoring fraction.
        #[arg(long, default_value_t = DEFAULT_TARGET_CENSORING)]
        target_censoring: f64,

        /// Output directory.
        #[arg(long)]
        out: PathBuf,

        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
    },

    /// Fit one joint model by MCMC and save the posterior archive.
    Fit {
        /// Training data CSV (id,time,value,obs_time,event,covariates...).
        #[arg(long)]
        data: PathBuf,

        /// Model specification JSON (a single library entry).
        #[arg(long)]
        model: PathBuf,

        /// Output archive path.
        #[arg(long)]
        out: PathBuf,

        /// MCMC seed.
        #[arg(long)]
        seed: u64,

        #[arg(long, default_value_t = 6000)]
        iterations: usize,

        #[arg(long, default_value_t = 3000)]
        burn_in: usize,

        #[arg(long, default_value_t = 3)]
        thin: usize,

        /// Keep per-draw random effects in the archive.
        #[arg(long)]
        store_random_effects: bool,

        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
    },

    /// Cross-validate a model library and optimize interval weights.
    Superlearn {
        /// Training data CSV.
        #[arg(long)]
        data: PathBuf,

        /// Model-library JSON (array of model specifications).
        #[arg(long)]
        library: PathBuf,

        /// Output panel JSON path.
        #[arg(long)]
        out: PathBuf,

        /// Master seed for folds, fits, and predictions.
        #[arg(long)]
        seed: u64,

        /// Cross-validation folds.
        #[arg(long, default_value_t = 5)]
        folds: usize,

        #[command(flatten)]
        score: ScoreOpts,

        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
    },

    /// Score frozen panel weights on an external test set.
    Evaluate {
        /// Training data CSV (the data the panel was built on).
        #[arg(long)]
        train: PathBuf,

        /// Test data CSV.
        #[arg(long)]
        test: PathBuf,

        /// Model-library JSON matching the panel.
        #[arg(long)]
        library: PathBuf,

        /// Panel JSON produced by `superlearn`.
        #[arg(long)]
        panel: PathBuf,

        /// Output evaluation JSON path.
        #[arg(long)]
        out: PathBuf,

        /// Override the panel's fit/prediction seed.
        #[arg(long)]
        seed: Option<u64>,

        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
    },

    /// Run the full simulate → super-learn → test pipeline repeatedly.
    Replicate {
        /// Scenario I, II, or III.
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,

        /// Number of replications.
        #[arg(long, default_value_t = 30)]
        reps: usize,

        /// Training-set size per replication.
        #[arg(long, default_value_t = 300)]
        n: usize,

        /// Test-set size per replication (defaults to n).
        #[arg(long)]
        test_n: Option<usize>,

        /// Cross-validation folds.
        #[arg(long, default_value_t = 3)]
        folds: usize,

        /// Master seed; replication r derives all of its randomness from it.
        #[arg(long)]
        seed: u64,

        /// Target censoring fraction.
        #[arg(long, default_value_t = DEFAULT_TARGET_CENSORING)]
        target_censoring: f64,

        /// Model-library JSON (default: the built-in six-model library).
        #[arg(long)]
        library: Option<PathBuf>,

        #[command(flatten)]
        score: ScoreOpts,

        /// Output directory.
        #[arg(long)]
        out: PathBuf,

        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
    },
}

fn worker_count(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&w| w > 0)
    })
    .unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

fn run(cli: Cli) -> jointsl::Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            n,
            test_n,
            reps,
            seed,
            target_censoring,
            out,
            force,
        } => commands::cmd_simulate(&SimulateArgs {
            scenario,
            n,
            test_n: test_n.unwrap_or(n),
            reps,
            seed,
            target_censoring,
            out_dir: out,
            force,
        }),
        Command::Fit {
            data,
            model,
            out,
            seed,
            iterations,
            burn_in,
            thin,
            store_random_effects,
            force,
        } => commands::cmd_fit(&FitArgs {
            data,
            model,
            out,
            seed,
            iterations,
            burn_in,
            thin,
            store_random_effects,
            force,
        }),
        Command::Superlearn {
            data,
            library,
            out,
            seed,
            folds,
            score,
            force,
        } => commands::cmd_superlearn(&SuperlearnArgs {
            data,
            library,
            out,
            seed,
            folds,
            landmarks: score.landmarks,
            dt: score.dt,
            metric: score.metric,
            censoring_weights: score.censoring_weights,
            epsilon: score.epsilon,
            diff: score.diff,
            mc_draws: score.mc_draws,
            iterations: score.iterations,
            burn_in: score.burn_in,
            thin: score.thin,
            force,
        }),
        Command::Evaluate {
            train,
            test,
            library,
            panel,
            out,
            seed,
            force,
        } => commands::cmd_evaluate(&EvaluateArgs {
            train,
            test,
            library,
            panel,
            out,
            seed,
            force,
        }),
        Command::Replicate {
            scenario,
            reps,
            n,
            test_n,
            folds,
            seed,
            target_censoring,
            library,
            score,
            out,
            force,
        } => commands::cmd_replicate(&ReplicateArgs {
            scenario,
            reps,
            n,
            test_n: test_n.unwrap_or(n),
            folds,
            landmarks: score.landmarks,
            dt: score.dt,
            metric: score.metric,
            censoring_weights: score.censoring_weights,
            epsilon: score.epsilon,
            diff: score.diff,
            seed,
            target_censoring,
            library,
            mc_draws: score.mc_draws,
            iterations: score.iterations,
            burn_in: score.burn_in,
            thin: score.thin,
            out_dir: out,
            force,
        }),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let workers = worker_count(cli.workers);
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
    {
        log::warn!("could not size the worker pool: {e}");
    }
    log::debug!("using {workers} worker(s)");
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        let code = e.exit_code();
        debug_assert!(matches!(e, Error::PartialReplication { .. }) == (code == 4));
        std::process::exit(code);
    }
}
