//! The outer loop: a (μ+λ) evolution strategy with per-parameter
//! self-adaptive mutation strengths, evolving MLN genomes by
//! validation-precision fitness.
//!
//! Each of E episodes expands T parents to 2T candidates (`make_kids`),
//! scores every candidate by training fresh classifiers through its loss
//! (`evaluate_population`), and keeps the top T (`select`). Parents are
//! retained in the population and re-evaluated every episode, which
//! combats fitness noise without caching stale scores.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::classifier::{train_inner, Classifier, HIDDEN1, HIDDEN2};
use crate::episodes::{sample_episode, Dataset, Episode};
use crate::error::{Error, Result};
use crate::exec::indexed_map;
use crate::loss::{genome_init, LossKind, MlnArch, MlnGenome};
use crate::rng::{stream, Lane, Purpose};

/// Hard bounds on every per-parameter mutation strength.
pub const SIGMA_MIN: f64 = 1e-5;
pub const SIGMA_MAX: f64 = 1.0;

/// One member of the population: a genome, its per-parameter mutation
/// strengths, and its most recent fitness (unset until evaluated).
#[derive(Debug, Clone)]
pub struct Candidate {
    pub genome: MlnGenome,
    pub sigma: Vec<f64>,
    pub fitness: Option<f64>,
}

/// Knobs of the evolution run.
#[derive(Debug, Clone)]
pub struct EvoConfig {
    /// Population size T (and litter size: one child per parent).
    pub population: usize,
    /// Outer-loop episodes E.
    pub episodes: usize,
    /// Inner-loop SGD steps N per evaluation.
    pub inner_steps: usize,
    /// Inner-loop learning rate α.
    pub learning_rate: f64,
    /// Evaluations averaged into one fitness value (R).
    pub evals_per_fitness: usize,
    /// Initial per-parameter mutation strength.
    pub sigma_init: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Master seed from which every RNG lane is derived.
    pub master_seed: u64,
    /// `true` pins the R evaluation episodes and classifier inits, shared
    /// by all candidates and all outer episodes. Scoring becomes a pure
    /// function of the genome, so best-so-far fitness is literally
    /// non-decreasing; candidates can overfit the pinned episodes, which
    /// is the desk-scale trade. `false` samples fresh episodes per
    /// candidate per outer episode, the setting for long runs.
    pub frozen_lanes: bool,
    /// MLN shape under evolution.
    pub arch: MlnArch,
    /// Classifier hidden widths.
    pub hidden: (usize, usize),
    /// Parallelism degree for candidate evaluation (0 = all cores).
    pub jobs: usize,
}

impl Default for EvoConfig {
    fn default() -> Self {
        Self {
            population: 10,
            episodes: 100,
            inner_steps: 20,
            learning_rate: 0.05,
            evals_per_fitness: 1,
            sigma_init: 0.05,
            sigma_min: SIGMA_MIN,
            sigma_max: SIGMA_MAX,
            master_seed: 0,
            frozen_lanes: false,
            arch: MlnArch::default(),
            hidden: (HIDDEN1, HIDDEN2),
            jobs: 0,
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 1 {
            return Err(Error::Config("population must be ≥ 1".into()));
        }
        if self.episodes < 1 {
            return Err(Error::Config("episodes must be ≥ 1".into()));
        }
        if self.inner_steps < 1 {
            return Err(Error::Config("inner_steps must be ≥ 1".into()));
        }
        if self.evals_per_fitness < 1 {
            return Err(Error::Config("evals_per_fitness must be ≥ 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min <= self.sigma_max) {
            return Err(Error::Config("sigma bounds must satisfy 0 < min ≤ max".into()));
        }
        if self.sigma_init < self.sigma_min || self.sigma_init > self.sigma_max {
            return Err(Error::Config(format!(
                "sigma_init {} outside [{}, {}]",
                self.sigma_init, self.sigma_min, self.sigma_max
            )));
        }
        self.arch.validate()
    }
}

/// Where evaluation episodes come from: a shared dataset plus the episode
/// cut sizes. Sampling is a pure function of (dataset, seed, lane).
#[derive(Clone)]
pub struct TaskSource {
    dataset: Arc<Dataset>,
    pub n_train_per_class: usize,
    pub n_val_per_class: usize,
}

impl TaskSource {
    pub fn new(dataset: Dataset, n_train_per_class: usize, n_val_per_class: usize) -> Self {
        Self {
            dataset: Arc::new(dataset),
            n_train_per_class,
            n_val_per_class,
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn episode(&self, master_seed: u64, lane: Lane) -> Result<Episode> {
        sample_episode(
            &self.dataset,
            self.n_train_per_class,
            self.n_val_per_class,
            master_seed,
            lane,
        )
    }
}

/// What one outer episode recorded.
#[derive(Debug, Clone)]
pub struct EpisodeStats {
    /// 1-based outer episode index.
    pub episode: usize,
    /// Fitness of all 2T candidates, by candidate index.
    pub fitnesses: Vec<f64>,
    /// Best fitness in this episode's population.
    pub best: f64,
    /// Running maximum of `best` up to this episode.
    pub best_so_far: f64,
    /// Indices (into the 2T vector) of the survivors, selection order.
    pub survivors: Vec<usize>,
}

impl EpisodeStats {
    pub fn mean(&self) -> f64 {
        self.fitnesses.iter().sum::<f64>() / self.fitnesses.len() as f64
    }
}

/// Per-episode statistics of a full evolution run.
#[derive(Debug, Clone, Default)]
pub struct RunHistory {
    pub episodes: Vec<EpisodeStats>,
}

/// Result of [`evolve`]: the best candidate ever observed, the episode
/// that produced it, the final parent population (selection order), and
/// the full per-episode history.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub best: Candidate,
    pub episode_found: usize,
    pub final_parents: Vec<Candidate>,
    pub history: RunHistory,
}

/// Expands T parents into 2T candidates: the parents themselves
/// (positions 0…T−1, bit-exact) followed by one child per parent.
///
/// Child of parent i, with n = genome length, τ = 1/√(2√n), τ′ = 1/√(2n):
///
/// ```text
/// σ′_j = clamp(σ_j · exp(τ′·g + τ·g_j), σ_min, σ_max)
/// φ′_j = φ_j + σ′_j · ν_j
/// ```
///
/// Draw order from `rng` is part of the determinism contract: per parent,
/// one shared g, then all n of g_j, then all n of ν_j. Children carry
/// unset fitness.
pub fn make_kids(
    parents: &[Candidate],
    sigma_min: f64,
    sigma_max: f64,
    rng: &mut impl Rng,
) -> Vec<Candidate> {
    let mut out = Vec::with_capacity(parents.len() * 2);
    out.extend(parents.iter().cloned());
    for parent in parents {
        let n = parent.genome.len();
        let tau = 1.0 / (2.0 * (n as f64).sqrt()).sqrt();
        let tau_prime = 1.0 / (2.0 * n as f64).sqrt();
        let g: f64 = StandardNormal.sample(rng);
        let mut sigma = Vec::with_capacity(n);
        for &s in &parent.sigma {
            let gj: f64 = StandardNormal.sample(rng);
            sigma.push((s * (tau_prime * g + tau * gj).exp()).clamp(sigma_min, sigma_max));
        }
        let mut phi = parent.genome.encode().to_vec();
        for (j, v) in phi.iter_mut().enumerate() {
            let nu: f64 = StandardNormal.sample(rng);
            *v += sigma[j] * nu;
        }
        let genome = MlnGenome::decode(parent.genome.arch(), phi)
            .expect("child genome length equals parent genome length");
        out.push(Candidate {
            genome,
            sigma,
            fitness: None,
        });
    }
    out
}

/// The R (episode, classifier-init) lane pairs scoring candidate `i`
/// during outer episode `episode_idx`.
///
/// Fresh mode keys lanes by (outer episode, candidate index, repeat), so
/// every candidate faces new tasks each generation. Frozen mode drops
/// both the outer episode and the candidate index: all candidates share
/// the same R pinned evaluation lanes forever.
fn eval_lanes(cfg: &EvoConfig, episode_idx: usize, i: usize) -> Vec<(Lane, Lane)> {
    let r = cfg.evals_per_fitness;
    (0..r)
        .map(|rep| {
            let (ep, worker) = if cfg.frozen_lanes {
                (0, rep as u64)
            } else {
                (episode_idx as u64, (i * r + rep) as u64)
            };
            (
                Lane::new(Purpose::EpisodeSample, ep, worker),
                Lane::new(Purpose::ClassifierInit, ep, worker),
            )
        })
        .collect()
}

/// Scores one genome: mean validation precision over R inner-loop runs.
/// Any evaluation failure (divergence included) scores 0 for that run —
/// evolution must survive pathological genomes, so failures are selected
/// against rather than propagated.
fn fitness_of(
    genome: &MlnGenome,
    lanes: &[(Lane, Lane)],
    source: &TaskSource,
    cfg: &EvoConfig,
) -> f64 {
    let d = source.dataset().feature_dim();
    let c = source.dataset().class_count();
    let dims = [d, cfg.hidden.0, cfg.hidden.1, c];
    let kind = LossKind::Mln(genome.clone());
    let mut acc = 0.0;
    for &(ep_lane, init_lane) in lanes {
        let score = source
            .episode(cfg.master_seed, ep_lane)
            .and_then(|episode| {
                let clf = Classifier::init(&dims, cfg.master_seed, init_lane)?;
                train_inner(&clf, &kind, &episode, cfg.inner_steps, cfg.learning_rate, ep_lane)
            })
            .map(|(_, record)| record.val_precision);
        match score {
            Ok(p) => acc += p,
            Err(Error::Diverged { step }) => {
                log::debug!("inner run diverged at step {step}; scoring 0");
            }
            Err(e) => {
                log::warn!("evaluation failed ({e}); scoring 0");
            }
        }
    }
    acc / lanes.len() as f64
}

/// Scores every candidate in place-order: candidate i's fitness is the
/// mean precision over its R lanes. Results are merged by candidate
/// index, so the fitness vector is identical for any `jobs` degree.
pub fn evaluate_population(
    cands: Vec<Candidate>,
    source: &TaskSource,
    cfg: &EvoConfig,
    episode_idx: usize,
) -> Vec<Candidate> {
    let fitnesses = indexed_map(&cands, cfg.jobs, |i, cand: &Candidate| {
        fitness_of(&cand.genome, &eval_lanes(cfg, episode_idx, i), source, cfg)
    });
    cands
        .into_iter()
        .zip(fitnesses)
        .map(|(mut cand, f)| {
            cand.fitness = Some(f);
            cand
        })
        .collect()
}

/// Indices of `fitnesses` sorted by descending fitness, ties broken by
/// lower index.
fn selection_order(fitnesses: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitnesses.len()).collect();
    order.sort_by(|&a, &b| {
        fitnesses[b]
            .partial_cmp(&fitnesses[a])
            .expect("fitness values are finite")
            .then(a.cmp(&b))
    });
    order
}

/// Keeps the `t` highest-fitness candidates, ordered by descending
/// fitness with ties broken by lower input index.
pub fn select(cands: Vec<Candidate>, t: usize) -> Result<Vec<Candidate>> {
    if t > cands.len() {
        return Err(Error::Invalid(format!(
            "cannot select {t} candidates from {}",
            cands.len()
        )));
    }
    let fitnesses: Vec<f64> = cands
        .iter()
        .map(|c| {
            c.fitness
                .ok_or_else(|| Error::Invalid("selection requires every fitness set".into()))
        })
        .collect::<Result<_>>()?;
    let order = selection_order(&fitnesses);
    let mut slots: Vec<Option<Candidate>> = cands.into_iter().map(Some).collect();
    Ok(order[..t]
        .iter()
        .map(|&i| slots[i].take().expect("selection order indices are unique"))
        .collect())
}

/// Runs the full outer loop and returns the best candidate ever observed
/// (earliest episode wins ties) with the per-episode history.
pub fn evolve(cfg: &EvoConfig, source: &TaskSource) -> Result<EvolveOutcome> {
    cfg.validate()?;
    // Surface structural problems (bad dims, undersized dataset) before
    // the long loop; inside it, failures only degrade fitness.
    source.episode(cfg.master_seed, Lane::new(Purpose::EpisodeSample, 0, 0))?;
    let d = source.dataset().feature_dim();
    let c = source.dataset().class_count();
    Classifier::init(
        &[d, cfg.hidden.0, cfg.hidden.1, c],
        cfg.master_seed,
        Lane::new(Purpose::ClassifierInit, 0, 0),
    )?;
    if c != cfg.arch.class_count {
        return Err(Error::Config(format!(
            "dataset has {c} classes but the MLN is built for {}",
            cfg.arch.class_count
        )));
    }

    let n = cfg.arch.genome_len();
    let mut parents: Vec<Candidate> = (0..cfg.population)
        .map(|i| Candidate {
            genome: genome_init(cfg.arch, cfg.master_seed, i as u64),
            sigma: vec![cfg.sigma_init; n],
            fitness: None,
        })
        .collect();

    let mut history = RunHistory::default();
    let mut best: Option<Candidate> = None;
    let mut episode_found = 0;
    let mut best_so_far = f64::NEG_INFINITY;

    for episode_idx in 1..=cfg.episodes {
        let mut rng = stream(cfg.master_seed, Lane::new(Purpose::Mutation, episode_idx as u64, 0));
        let pop = make_kids(&parents, cfg.sigma_min, cfg.sigma_max, &mut rng);
        let pop = evaluate_population(pop, source, cfg, episode_idx);

        let fitnesses: Vec<f64> = pop.iter().map(|c| c.fitness.unwrap_or(0.0)).collect();
        let order = selection_order(&fitnesses);
        let ep_best = fitnesses[order[0]];
        if ep_best > best_so_far {
            best_so_far = ep_best;
            best = Some(pop[order[0]].clone());
            episode_found = episode_idx;
        }
        let survivors: Vec<usize> = order[..cfg.population].to_vec();
        history.episodes.push(EpisodeStats {
            episode: episode_idx,
            fitnesses,
            best: ep_best,
            best_so_far,
            survivors: survivors.clone(),
        });
        log::info!(
            "episode {episode_idx}: best {ep_best:.4}, best_so_far {best_so_far:.4}, mean {:.4}",
            history.episodes.last().expect("just pushed").mean()
        );

        let mut slots: Vec<Option<Candidate>> = pop.into_iter().map(Some).collect();
        parents = survivors
            .iter()
            .map(|&i| slots[i].take().expect("survivor indices are unique"))
            .collect();
    }

    Ok(EvolveOutcome {
        best: best.expect("E ≥ 1 guarantees at least one episode"),
        episode_found,
        final_parents: parents,
        history,
    })
}
