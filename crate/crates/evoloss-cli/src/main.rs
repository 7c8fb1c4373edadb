//! `evoloss` — evolve a parametrized loss function and compare it
//! against cross-entropy and squared error on few-shot episodes.
//!
//! Three subcommands:
//!
//! * `meta-train` — run the (μ+λ) evolution strategy on the meta-train
//!   split and write `checkpoint.txt` + `fitness_history.csv`.
//! * `meta-test` — train fresh classifiers on meta-test episodes under
//!   each requested loss and write `curves.csv` + `summary.csv`.
//! * `baseline LOSS` — `meta-test` restricted to one classical loss.
//!
//! Settings resolve in three layers: built-in defaults, then a
//! `key=value` config file (`--config`), then command-line flags.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 unreadable or
//! malformed data files, 3 internal failure.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod checkpoint;
mod runner;
mod settings;

use settings::{DatasetKind, Overrides, Settings};

/// Anything that can end a run early, sorted by whose fault it is.
#[derive(Debug)]
pub enum CliError {
    /// The invocation or configuration is wrong; fix the command line.
    Usage(String),
    /// A dataset or checkpoint file is missing or malformed.
    Data(String),
    /// The run itself failed (I/O on outputs, numerical blow-up).
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Data(msg) => write!(f, "data error: {msg}"),
            CliError::Internal(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl From<evoloss::Error> for CliError {
    fn from(e: evoloss::Error) -> Self {
        match e {
            evoloss::Error::Config(m) | evoloss::Error::Invalid(m) => CliError::Usage(m),
            evoloss::Error::Data(d) => CliError::Data(d.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "evoloss", version, about = "Evolved-loss meta-learning harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve an MLN genome on the meta-train split.
    MetaTrain(RunArgs),
    /// Compare losses on fresh meta-test episodes.
    MetaTest(RunArgs),
    /// Meta-test a single classical loss (ce or mse).
    Baseline {
        /// Which loss to run: ce or mse.
        loss: String,
        #[command(flatten)]
        args: RunArgs,
    },
}

/// Every knob, all optional: unset flags leave the config-file or
/// built-in value in force.
#[derive(Args)]
struct RunArgs {
    /// key=value settings file applied between defaults and flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Task family: synth, fashionmnist, or cifar10.
    #[arg(long)]
    dataset: Option<DatasetKind>,
    /// Directory holding the dataset files (ignored for synth).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Master seed; every random draw in the run derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Parent population size T (the strategy evaluates 2T per episode).
    #[arg(long)]
    pop: Option<usize>,
    /// Outer evolution episodes E.
    #[arg(long)]
    episodes: Option<usize>,
    /// Inner-loop SGD steps N per classifier.
    #[arg(long)]
    inner_steps: Option<usize>,
    /// Inner-loop learning rate α.
    #[arg(long)]
    lr: Option<f64>,
    /// Training examples per class in each episode.
    #[arg(long)]
    train_per_class: Option<usize>,
    /// Validation examples per class in each episode.
    #[arg(long)]
    val_per_class: Option<usize>,
    /// Worker threads: 0 = all cores, 1 = sequential, k = exactly k.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory for checkpoints and CSVs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Synth task noise variance (std = √spread).
    #[arg(long)]
    spread: Option<f64>,
    /// Initial self-adaptive mutation scale σ.
    #[arg(long)]
    sigma_init: Option<f64>,
    /// Episodes averaged per fitness evaluation R.
    #[arg(long)]
    evals_per_fitness: Option<usize>,
    /// Evaluate every candidate on one fixed episode set instead of
    /// fresh draws each episode (makes best-so-far non-decreasing).
    #[arg(long)]
    frozen_lanes: bool,
    /// Checkpoint the candidate that scores best on held-out episodes
    /// instead of the training-fitness incumbent.
    #[arg(long)]
    select_on_holdout: bool,
    /// Final parents re-scored during holdout selection.
    #[arg(long)]
    holdout_k: Option<usize>,
    /// Held-out episodes averaged per holdout score.
    #[arg(long)]
    holdout_episodes: Option<usize>,
    /// Meta-test episodes (one fresh classifier each).
    #[arg(long)]
    test_seeds: Option<usize>,
    /// Losses to compare, comma-separated from ce, mse, mln.
    #[arg(long, value_delimiter = ',')]
    losses: Option<Vec<String>>,
    /// MLN checkpoint to load (required when testing mln).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            dataset: self.dataset,
            data_dir: self.data_dir.clone(),
            seed: self.seed,
            pop: self.pop,
            episodes: self.episodes,
            inner_steps: self.inner_steps,
            lr: self.lr,
            train_per_class: self.train_per_class,
            val_per_class: self.val_per_class,
            jobs: self.jobs,
            out: self.out.clone(),
            spread: self.spread,
            sigma_init: self.sigma_init,
            evals_per_fitness: self.evals_per_fitness,
            // Bool flags can only switch the setting on; absence defers
            // to the config file rather than forcing false.
            frozen_lanes: self.frozen_lanes.then_some(true),
            select_on_holdout: self.select_on_holdout.then_some(true),
            holdout_k: self.holdout_k,
            holdout_episodes: self.holdout_episodes,
            test_seeds: self.test_seeds,
            losses: self.losses.clone(),
            checkpoint: self.checkpoint.clone(),
        }
    }

    fn settings(&self) -> Result<Settings, CliError> {
        Settings::resolve(self.config.as_deref(), self.overrides())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::MetaTrain(args) => runner::cmd_meta_train(&args.settings()?),
        Command::MetaTest(args) => runner::cmd_meta_test(&args.settings()?),
        Command::Baseline { loss, args } => runner::cmd_baseline(&args.settings()?, &loss),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; they are not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
