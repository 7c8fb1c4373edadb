//! Run configuration: a flat `key=value` file merged with command-line
//! flags. Flags win over file values; file values win over defaults.
//!
//! The file format is deliberately primitive — one `key=value` per line,
//! `#` comments, blank lines ignored — so configs diff cleanly and need
//! no extra dependencies. Keys are the flag names with `-` replaced by
//! `_` (e.g. `--inner-steps` ↔ `inner_steps`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use evoloss::classifier::{HIDDEN1, HIDDEN2};
use evoloss::evolve::{EvoConfig, SIGMA_MAX, SIGMA_MIN};
use evoloss::loss::MlnArch;

use crate::CliError;

/// Which task source feeds the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    FashionMnist,
    Cifar10,
    Synth,
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fashionmnist" => Ok(Self::FashionMnist),
            "cifar10" => Ok(Self::Cifar10),
            "synth" => Ok(Self::Synth),
            other => Err(format!(
                "unknown dataset '{other}' (expected fashionmnist, cifar10, or synth)"
            )),
        }
    }
}

/// Fully resolved run parameters after merging defaults, config file, and
/// flags.
#[derive(Debug, Clone)]
pub struct Settings {
    pub dataset: DatasetKind,
    pub data_dir: PathBuf,
    pub seed: u64,
    pub pop: usize,
    pub episodes: usize,
    pub inner_steps: usize,
    pub lr: f64,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub jobs: usize,
    pub out: PathBuf,
    pub spread: f64,
    pub sigma_init: f64,
    pub evals_per_fitness: usize,
    pub frozen_lanes: bool,
    pub select_on_holdout: bool,
    pub holdout_k: usize,
    pub holdout_episodes: usize,
    pub test_seeds: usize,
    pub losses: Vec<String>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Synth,
            data_dir: PathBuf::from("data"),
            seed: 0,
            pop: 10,
            episodes: 100,
            inner_steps: 20,
            lr: 0.2,
            train_per_class: 5,
            val_per_class: 100,
            jobs: 0,
            out: PathBuf::from("out"),
            spread: 1.0,
            sigma_init: 0.05,
            evals_per_fitness: 1,
            frozen_lanes: false,
            select_on_holdout: false,
            holdout_k: 8,
            holdout_episodes: 10,
            test_seeds: 10,
            losses: vec!["ce".into(), "mse".into()],
            checkpoint: None,
        }
    }
}

/// The optional values a config file or the flag layer may supply.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<DatasetKind>,
    pub data_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub pop: Option<usize>,
    pub episodes: Option<usize>,
    pub inner_steps: Option<usize>,
    pub lr: Option<f64>,
    pub train_per_class: Option<usize>,
    pub val_per_class: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub spread: Option<f64>,
    pub sigma_init: Option<f64>,
    pub evals_per_fitness: Option<usize>,
    pub frozen_lanes: Option<bool>,
    pub select_on_holdout: Option<bool>,
    pub holdout_k: Option<usize>,
    pub holdout_episodes: Option<usize>,
    pub test_seeds: Option<usize>,
    pub losses: Option<Vec<String>>,
    pub checkpoint: Option<PathBuf>,
}

fn parse_as<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| CliError::Usage(format!("config key '{key}': cannot parse '{raw}': {e}")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, CliError> {
    match raw {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Usage(format!(
            "config key '{key}': expected a boolean, got '{raw}'"
        ))),
    }
}

/// Parses a config file into an override set. Unknown keys are an error —
/// a typo silently falling back to a default would be worse.
pub fn parse_config_file(path: &Path) -> Result<Overrides, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut kv = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "config {} line {}: expected key=value, got '{line}'",
                path.display(),
                lineno + 1
            ))
        })?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }

    let mut o = Overrides::default();
    for (k, v) in kv {
        match k.as_str() {
            "dataset" => o.dataset = Some(parse_as(&k, &v)?),
            "data_dir" => o.data_dir = Some(PathBuf::from(v)),
            "seed" => o.seed = Some(parse_as(&k, &v)?),
            "pop" => o.pop = Some(parse_as(&k, &v)?),
            "episodes" => o.episodes = Some(parse_as(&k, &v)?),
            "inner_steps" => o.inner_steps = Some(parse_as(&k, &v)?),
            "lr" => o.lr = Some(parse_as(&k, &v)?),
            "train_per_class" => o.train_per_class = Some(parse_as(&k, &v)?),
            "val_per_class" => o.val_per_class = Some(parse_as(&k, &v)?),
            "jobs" => o.jobs = Some(parse_as(&k, &v)?),
            "out" => o.out = Some(PathBuf::from(v)),
            "spread" => o.spread = Some(parse_as(&k, &v)?),
            "sigma_init" => o.sigma_init = Some(parse_as(&k, &v)?),
            "evals_per_fitness" => o.evals_per_fitness = Some(parse_as(&k, &v)?),
            "frozen_lanes" => o.frozen_lanes = Some(parse_bool(&k, &v)?),
            "select_on_holdout" => o.select_on_holdout = Some(parse_bool(&k, &v)?),
            "holdout_k" => o.holdout_k = Some(parse_as(&k, &v)?),
            "holdout_episodes" => o.holdout_episodes = Some(parse_as(&k, &v)?),
            "test_seeds" => o.test_seeds = Some(parse_as(&k, &v)?),
            "losses" => {
                o.losses = Some(v.split(',').map(|s| s.trim().to_string()).collect())
            }
            "checkpoint" => o.checkpoint = Some(PathBuf::from(v)),
            other => {
                return Err(CliError::Usage(format!(
                    "config {}: unknown key '{other}'",
                    path.display()
                )))
            }
        }
    }
    Ok(o)
}

macro_rules! apply {
    ($dst:expr, $src:expr, [$($field:ident),+ $(,)?]) => {
        $(if let Some(v) = $src.$field { $dst.$field = v; })+
    };
}

impl Settings {
    /// Defaults, overlaid by the config file (if any), overlaid by flags.
    pub fn resolve(config_path: Option<&Path>, flags: Overrides) -> Result<Self, CliError> {
        let mut s = Settings::default();
        if let Some(path) = config_path {
            let file = parse_config_file(path)?;
            s.apply(file);
        }
        s.apply(flags);
        s.validate()?;
        Ok(s)
    }

    fn apply(&mut self, o: Overrides) {
        apply!(self, o, [
            dataset, data_dir, seed, pop, episodes, inner_steps, lr,
            train_per_class, val_per_class, jobs, out, spread, sigma_init,
            evals_per_fitness, frozen_lanes, select_on_holdout, holdout_k,
            holdout_episodes, test_seeds, losses,
        ]);
        if o.checkpoint.is_some() {
            self.checkpoint = o.checkpoint;
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.pop == 0
            || self.episodes == 0
            || self.inner_steps == 0
            || self.evals_per_fitness == 0
            || self.train_per_class == 0
            || self.val_per_class == 0
            || self.test_seeds == 0
            || self.holdout_episodes == 0
            || self.holdout_k == 0
        {
            return Err(CliError::Usage(
                "all count parameters must be positive".into(),
            ));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(CliError::Usage(format!(
                "lr must be > 0, got {}",
                self.lr
            )));
        }
        if !self.spread.is_finite() || self.spread < 0.0 {
            return Err(CliError::Usage(format!(
                "spread must be ≥ 0, got {}",
                self.spread
            )));
        }
        for l in &self.losses {
            if !matches!(l.as_str(), "ce" | "mse" | "mln") {
                return Err(CliError::Usage(format!(
                    "unknown loss '{l}' (expected ce, mse, or mln)"
                )));
            }
        }
        Ok(())
    }

    /// The evolution configuration this run implies.
    pub fn evo_config(&self) -> EvoConfig {
        EvoConfig {
            population: self.pop,
            episodes: self.episodes,
            inner_steps: self.inner_steps,
            learning_rate: self.lr,
            evals_per_fitness: self.evals_per_fitness,
            sigma_init: self.sigma_init,
            sigma_min: SIGMA_MIN,
            sigma_max: SIGMA_MAX,
            master_seed: self.seed,
            frozen_lanes: self.frozen_lanes,
            arch: MlnArch::default(),
            hidden: (HIDDEN1, HIDDEN2),
            jobs: self.jobs,
        }
    }
}
