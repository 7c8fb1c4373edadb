//! The three commands: `meta-train` (evolve a genome and checkpoint it),
//! `meta-test` (compare losses on fresh meta-test episodes), and
//! `baseline` (meta-test restricted to one classical loss).
//!
//! Every output is a function of (settings, master seed): episode and
//! init lanes are derived per (purpose, index), evaluations fan out over
//! the worker pool, and results merge by index — so CSVs and checkpoints
//! are byte-identical for any `--jobs` value.

use std::fs;
use std::path::{Path, PathBuf};

use evoloss::classifier::{precision, train_inner, train_step, Classifier};
use evoloss::episodes::{load_cifar10, load_idx, synth_task, Dataset, Split};
use evoloss::evolve::{evolve, Candidate, TaskSource};
use evoloss::exec::indexed_map;
use evoloss::loss::{LossKind, MlnGenome};
use evoloss::rng::{Lane, Purpose};

use crate::checkpoint::{self, Checkpoint};
use crate::settings::{DatasetKind, Settings};
use crate::CliError;

/// Builds the dataset for one side of the meta-split.
fn load_dataset(s: &Settings, split: Split) -> Result<Dataset, CliError> {
    match s.dataset {
        DatasetKind::Synth => Ok(synth_task(s.seed, 10, 32, s.spread, split)),
        DatasetKind::FashionMnist => {
            let (img, lab) = match split {
                Split::MetaTrain => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
                Split::MetaTest => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
            };
            load_idx(&s.data_dir.join(img), &s.data_dir.join(lab), split)
                .map_err(|e| CliError::Data(e.to_string()))
        }
        DatasetKind::Cifar10 => {
            let dir = s.data_dir.join("cifar-10-batches-bin");
            let paths: Vec<PathBuf> = match split {
                Split::MetaTrain => (1..=5)
                    .map(|i| dir.join(format!("data_batch_{i}.bin")))
                    .collect(),
                Split::MetaTest => vec![dir.join("test_batch.bin")],
            };
            load_cifar10(&paths, split).map_err(|e| CliError::Data(e.to_string()))
        }
    }
}

fn write_out(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, content)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Mean validation precision of a genome over dedicated held-out lanes.
/// Used to pick which candidate gets checkpointed when training fitness
/// is measured on frozen lanes (which candidates can memorize).
fn holdout_score(
    genome: &MlnGenome,
    source: &TaskSource,
    s: &Settings,
) -> f64 {
    let d = source.dataset().feature_dim();
    let c = source.dataset().class_count();
    let dims = [d, s.evo_config().hidden.0, s.evo_config().hidden.1, c];
    let kind = LossKind::Mln(genome.clone());
    let mut acc = 0.0;
    for h in 0..s.holdout_episodes as u64 {
        let ep_lane = Lane::new(Purpose::HoldoutEpisode, h, 0);
        let init_lane = Lane::new(Purpose::HoldoutInit, h, 0);
        let score = source
            .episode(s.seed, ep_lane)
            .and_then(|ep| {
                let clf = Classifier::init(&dims, s.seed, init_lane)?;
                train_inner(&clf, &kind, &ep, s.inner_steps, s.lr, ep_lane)
            })
            .map(|(_, rec)| rec.val_precision)
            .unwrap_or(0.0);
        acc += score;
    }
    acc / s.holdout_episodes as f64
}

/// Evolves an MLN on the meta-train split, writes `checkpoint.txt` and
/// `fitness_history.csv` into the output directory.
pub fn cmd_meta_train(s: &Settings) -> Result<(), CliError> {
    let dataset = load_dataset(s, Split::MetaTrain)?;
    let source = TaskSource::new(dataset, s.train_per_class, s.val_per_class);
    let cfg = s.evo_config();
    let outcome = evolve(&cfg, &source).map_err(CliError::from)?;

    let mut csv = String::from("episode,best_fitness,best_so_far,mean_fitness\n");
    for ep in &outcome.history.episodes {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            ep.episode,
            ep.best,
            ep.best_so_far,
            ep.mean()
        ));
    }
    let history_path = write_out(&s.out, "fitness_history.csv", &csv)?;

    let cp = if s.select_on_holdout {
        // Re-score the incumbent best and the top-k final parents on
        // held-out lanes; checkpoint whichever generalizes best. The
        // recorded best_fitness is then the holdout mean.
        let mut pool: Vec<(&Candidate, usize)> = vec![(&outcome.best, outcome.episode_found)];
        for p in outcome.final_parents.iter().take(s.holdout_k) {
            pool.push((p, cfg.episodes));
        }
        let mut picked = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, (cand, _)) in pool.iter().enumerate() {
            let score = holdout_score(&cand.genome, &source, s);
            log::info!("holdout: candidate {i} scores {score:.4}");
            if score > best_score {
                best_score = score;
                picked = i;
            }
        }
        let (cand, found) = pool[picked];
        Checkpoint {
            genome: cand.genome.clone(),
            best_fitness: best_score,
            episode_found: found,
        }
    } else {
        Checkpoint {
            genome: outcome.best.genome.clone(),
            best_fitness: outcome.best.fitness.unwrap_or(0.0),
            episode_found: outcome.episode_found,
        }
    };
    let cp_path = s.out.join("checkpoint.txt");
    checkpoint::write(&cp_path, &cp)?;

    println!(
        "meta-train done: best fitness {} (episode {}), checkpoint {}, history {}",
        cp.best_fitness,
        cp.episode_found,
        cp_path.display(),
        history_path.display()
    );
    Ok(())
}

/// One loss's training curve on one meta-test episode.
struct Curve {
    loss_name: &'static str,
    seed_idx: usize,
    /// Per step (1-based): training loss before the update, validation
    /// precision after it.
    rows: Vec<(f64, f64)>,
}

fn canonical_losses(names: &[String]) -> Vec<&'static str> {
    let mut out = Vec::new();
    for canonical in ["ce", "mse", "mln"] {
        if names.iter().any(|n| n == canonical) {
            out.push(canonical);
        }
    }
    out
}

/// Trains one classifier for `inner_steps`, recording the curve. If a
/// step diverges the classifier stops updating and the remaining rows
/// repeat the last finite measurement, keeping row counts predictable.
fn run_curve(
    kind: &LossKind,
    loss_name: &'static str,
    seed_idx: usize,
    source: &TaskSource,
    s: &Settings,
) -> Result<Curve, CliError> {
    let ep_lane = Lane::new(Purpose::MetaTestEpisode, seed_idx as u64, 0);
    let init_lane = Lane::new(Purpose::MetaTestInit, seed_idx as u64, 0);
    let episode = source
        .episode(s.seed, ep_lane)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let d = source.dataset().feature_dim();
    let c = source.dataset().class_count();
    let dims = [d, s.evo_config().hidden.0, s.evo_config().hidden.1, c];
    let mut clf = Classifier::init(&dims, s.seed, init_lane).map_err(CliError::from)?;

    let mut rows = Vec::with_capacity(s.inner_steps);
    let mut frozen: Option<(f64, f64)> = None;
    for step in 0..s.inner_steps {
        if let Some(last) = frozen {
            rows.push(last);
            continue;
        }
        match train_step(&mut clf, kind, &episode, s.lr, step) {
            Ok(train_loss) => {
                let val = precision(&clf, &episode.val_x, &episode.val_y)
                    .map_err(CliError::from)?;
                rows.push((train_loss, val));
            }
            Err(evoloss::Error::Diverged { step }) => {
                log::warn!(
                    "{loss_name} seed {seed_idx}: diverged at step {step}; freezing curve"
                );
                let last = rows.last().copied().unwrap_or((f64::NAN, 0.0));
                rows.push(last);
                frozen = Some(last);
            }
            Err(e) => return Err(CliError::from(e)),
        }
    }
    Ok(Curve {
        loss_name,
        seed_idx,
        rows,
    })
}

/// Compares the requested losses over `test_seeds` meta-test episodes,
/// writing `curves.csv` (long format) and `summary.csv`, and printing the
/// summary table.
pub fn cmd_meta_test(s: &Settings) -> Result<(), CliError> {
    let losses = canonical_losses(&s.losses);
    if losses.is_empty() {
        return Err(CliError::Usage("no losses requested".into()));
    }
    let mln_genome = if losses.contains(&"mln") {
        let path = s.checkpoint.as_ref().ok_or_else(|| {
            CliError::Usage("loss 'mln' requested but no --checkpoint supplied".into())
        })?;
        Some(checkpoint::read(path)?.genome)
    } else {
        None
    };

    let dataset = load_dataset(s, Split::MetaTest)?;
    let source = TaskSource::new(dataset, s.train_per_class, s.val_per_class);

    // One work item per (loss, seed); merged by index, so the CSV is
    // identical at any parallelism degree. Episode and init lanes depend
    // only on the seed index: every loss sees the same tasks and the same
    // starting classifier — a paired comparison.
    let items: Vec<(&'static str, usize)> = losses
        .iter()
        .flat_map(|&l| (0..s.test_seeds).map(move |i| (l, i)))
        .collect();
    let curves: Vec<Result<Curve, CliError>> = indexed_map(&items, s.jobs, |_, &(l, i)| {
        let kind = match l {
            "ce" => LossKind::CrossEntropy,
            "mse" => LossKind::MeanSquaredError,
            _ => LossKind::Mln(mln_genome.clone().expect("checked above")),
        };
        run_curve(&kind, l, i, &source, s)
    });

    let mut csv = String::from("loss,seed,step,train_loss,val_precision\n");
    let mut finals: Vec<(&'static str, Vec<f64>)> =
        losses.iter().map(|&l| (l, Vec::new())).collect();
    for curve in curves {
        let curve = curve?;
        for (step, (train_loss, val)) in curve.rows.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                curve.loss_name,
                curve.seed_idx,
                step + 1,
                train_loss,
                val
            ));
        }
        let last = curve.rows.last().expect("inner_steps ≥ 1").1;
        finals
            .iter_mut()
            .find(|(l, _)| *l == curve.loss_name)
            .expect("loss registered")
            .1
            .push(last);
    }
    let curves_path = write_out(&s.out, "curves.csv", &csv)?;

    // Population statistics over seeds (divide by S, not S−1).
    let mut summary = String::from("loss,mean_precision,std_precision,seeds,inner_steps\n");
    println!("loss  mean_precision  std_precision  (seeds={}, steps={})", s.test_seeds, s.inner_steps);
    for (l, vals) in &finals {
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        summary.push_str(&format!("{l},{mean},{std},{},{}\n", vals.len(), s.inner_steps));
        println!("{l:<5} {mean:<15.4} {std:<14.4}");
    }
    let summary_path = write_out(&s.out, "summary.csv", &summary)?;
    println!(
        "curves {}, summary {}",
        curves_path.display(),
        summary_path.display()
    );
    Ok(())
}

/// `baseline LOSS` is exactly `meta-test --losses LOSS` for ce/mse.
pub fn cmd_baseline(s: &Settings, loss: &str) -> Result<(), CliError> {
    if !matches!(loss, "ce" | "mse") {
        return Err(CliError::Usage(format!(
            "baseline expects 'ce' or 'mse', got '{loss}'"
        )));
    }
    let mut s = s.clone();
    s.losses = vec![loss.to_string()];
    cmd_meta_test(&s)
}
