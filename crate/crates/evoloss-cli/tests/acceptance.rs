//! Release gate. One test walks the seven acceptance criteria in order and
//! prints one `A<n> PASS` / `A<n> FAIL` line per criterion; it panics at the
//! end if any line failed. Run with
//!
//! ```text
//! cargo test -p evoloss-cli --test acceptance -- --nocapture
//! ```
//!
//! to see the report on success (the harness swallows stdout of passing
//! tests otherwise; on failure the captured report is printed anyway).
//!
//! - A1: every backward pass matches central finite differences to 1e-4
//!   relative over 100 random instances per path, in under 30 s.
//! - A2: dense/conv1d forwards match naive nested-loop references to 1e-12;
//!   truncation selection matches brute-force enumeration with the tie rule.
//! - A3: FashionMNIST cross-entropy baseline lands in the published band
//!   (needs the real dataset; see scripts/fetch_data.sh).
//! - A4: the desk-preset evolution run makes measurable progress.
//! - A5: the evolved checkpoint beats chance and the zero genome on fresh
//!   episodes.
//! - A6: reruns with equal seed and any --jobs value are byte-identical.
//! - A7: IDX/CIFAR-10 fixtures parse exactly; corrupt ones fail distinctly.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use evoloss::classifier::{softmax_backward, train_step, Classifier};
use evoloss::episodes::{load_cifar10, load_idx, one_hot, Split};
use evoloss::evolve::{select, Candidate};
use evoloss::loss::{
    ce_grad, ce_loss, genome_init, mln_forward, mln_input_grad, mse_grad, mse_loss, LossKind,
    MlnArch, MlnGenome,
};
use evoloss::nn::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, elu, grad_check, relu,
    softmax,
};
use evoloss::{DataError, Episode, Error, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

// ---------------------------------------------------------------- utilities

fn rng_for(check: &str, instance: u64) -> ChaCha12Rng {
    let tag: u64 = check
        .bytes()
        .fold(0u64, |h, b| h.wrapping_mul(131).wrapping_add(b as u64));
    ChaCha12Rng::seed_from_u64(tag ^ (instance.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

fn tensor_uniform(rng: &mut impl Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

fn one_hot_batch(rng: &mut impl Rng, b: usize, c: usize) -> Tensor {
    let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..c)).collect();
    one_hot(&labels, c)
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root")
}

fn evoloss(args: &[&str]) -> Result<Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_evoloss"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| format!("cannot launch binary: {e}"))?;
    if out.status.success() {
        Ok(out)
    } else {
        Err(format!(
            "exit {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn read_file(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("read {}: {e}", path.display()))
}

/// Final-step mean precision for one loss row of a summary.csv.
fn summary_mean(summary: &str, loss: &str) -> Result<f64, String> {
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[0] == loss {
            return f[1].parse().map_err(|e| format!("summary mean: {e}"));
        }
    }
    Err(format!("loss '{loss}' missing from summary"))
}

fn write_checkpoint(path: &Path, phi: &[f64]) {
    let mut text = String::from(
        "format_version=1\nclass_count=10\nfilter_count=8\nkernel_width=3\n",
    );
    text.push_str(&format!("genome_length={}\n", phi.len()));
    text.push_str("best_fitness=0\nepisode_found=0\n\n");
    for v in phi {
        text.push_str(&format!("{v:.17e}\n"));
    }
    fs::write(path, text).unwrap();
}

// ------------------------------------------------------------ A1: gradients

const A1_INSTANCES: u64 = 100;
const A1_TOL: f64 = 1e-4;

/// Worst relative FD error across instances of one differentiation path.
fn a1_path(name: &str, f: impl Fn(&mut ChaCha12Rng) -> f64) -> (String, f64) {
    let mut worst = 0.0f64;
    for inst in 0..A1_INSTANCES {
        let mut rng = rng_for(name, inst);
        worst = worst.max(f(&mut rng));
    }
    (name.to_string(), worst)
}

fn a1_end_to_end(kind: &LossKind, rng: &mut ChaCha12Rng) -> f64 {
    let dims = [5usize, 6, 4, 3];
    let b = rng.random_range(2..=4);
    let episode = Episode {
        train_x: tensor_uniform(rng, vec![b, dims[0]], 0.0, 1.0),
        train_y: one_hot_batch(rng, b, dims[3]),
        val_x: tensor_uniform(rng, vec![1, dims[0]], 0.0, 1.0),
        val_y: one_hot_batch(rng, 1, dims[3]),
    };
    let pack = |clf: &Classifier| {
        let mut flat = Vec::new();
        for (w, bias) in clf.weights().iter().zip(clf.biases()) {
            flat.extend_from_slice(w.data());
            flat.extend_from_slice(bias.data());
        }
        flat
    };
    let unpack = |clf: &mut Classifier, flat: &[f64]| {
        let mut at = 0;
        for layer in 0..clf.weights().len() {
            let wlen = clf.weights()[layer].data().len();
            clf.weights_mut()[layer]
                .data_mut()
                .copy_from_slice(&flat[at..at + wlen]);
            at += wlen;
            let blen = clf.biases()[layer].data().len();
            clf.biases_mut()[layer]
                .data_mut()
                .copy_from_slice(&flat[at..at + blen]);
            at += blen;
        }
    };
    let mut clf = Classifier::zeros(&dims).unwrap();
    let flat0: Vec<f64> = (0..pack(&clf).len())
        .map(|_| rng.random_range(-0.7..0.7))
        .collect();
    unpack(&mut clf, &flat0);

    // One SGD step at α = 1 makes (before − after) exactly the loss gradient.
    let mut stepped = clf.clone();
    train_step(&mut stepped, kind, &episode, 1.0, 0).unwrap();
    let analytic: Vec<f64> = pack(&clf)
        .iter()
        .zip(pack(&stepped))
        .map(|(b0, a0)| b0 - a0)
        .collect();
    let probe = |pt: &[f64]| {
        let mut probed = clf.clone();
        unpack(&mut probed, pt);
        let p = probed.forward(&episode.train_x).unwrap();
        kind.loss(&p, &episode.train_y).unwrap()
    };
    grad_check(probe, &flat0, &analytic)
}

fn a1_gradients() -> (bool, String) {
    let start = Instant::now();
    let mut paths: Vec<(String, f64)> = Vec::new();

    paths.push(a1_path("dense", |rng| {
        let (b, i, o) = (
            rng.random_range(1..=4),
            rng.random_range(1..=6),
            rng.random_range(1..=5),
        );
        let x = tensor_uniform(rng, vec![b, i], -1.5, 1.5);
        let w = tensor_uniform(rng, vec![i, o], -1.5, 1.5);
        let bias = tensor_uniform(rng, vec![o], -1.0, 1.0);
        let g = tensor_uniform(rng, vec![b, o], -1.0, 1.0);
        let (dx, dw, db) = dense_backward(&x, &w, &g).unwrap();
        let dot = |t: &Tensor| {
            t.data()
                .iter()
                .zip(g.data())
                .map(|(a, w0)| a * w0)
                .sum::<f64>()
        };
        let px = |pt: &[f64]| {
            let xt = Tensor::new(vec![b, i], pt.to_vec()).unwrap();
            dot(&dense_forward(&xt, &w, &bias).unwrap())
        };
        let pw = |pt: &[f64]| {
            let wt = Tensor::new(vec![i, o], pt.to_vec()).unwrap();
            dot(&dense_forward(&x, &wt, &bias).unwrap())
        };
        let pb = |pt: &[f64]| {
            let bt = Tensor::new(vec![o], pt.to_vec()).unwrap();
            dot(&dense_forward(&x, &w, &bt).unwrap())
        };
        grad_check(px, x.data(), dx.data())
            .max(grad_check(pw, w.data(), dw.data()))
            .max(grad_check(pb, bias.data(), db.data()))
    }));

    paths.push(a1_path("conv1d", |rng| {
        let (b, cin, cout) = (
            rng.random_range(1..=3),
            rng.random_range(1..=3),
            rng.random_range(1..=3),
        );
        let kw = [1, 3, 5][rng.random_range(0..3)];
        let w = rng.random_range(kw..=kw + 4);
        let x = tensor_uniform(rng, vec![b, cin, w], -1.5, 1.5);
        let k = tensor_uniform(rng, vec![cout, cin, kw], -1.5, 1.5);
        let bias = tensor_uniform(rng, vec![cout], -1.0, 1.0);
        let g = tensor_uniform(rng, vec![b, cout, w], -1.0, 1.0);
        let (dx, dk, db) = conv1d_backward(&x, &k, &g).unwrap();
        let dot = |t: &Tensor| {
            t.data()
                .iter()
                .zip(g.data())
                .map(|(a, w0)| a * w0)
                .sum::<f64>()
        };
        let px = |pt: &[f64]| {
            let xt = Tensor::new(vec![b, cin, w], pt.to_vec()).unwrap();
            dot(&conv1d_forward(&xt, &k, &bias).unwrap())
        };
        let pk = |pt: &[f64]| {
            let kt = Tensor::new(vec![cout, cin, kw], pt.to_vec()).unwrap();
            dot(&conv1d_forward(&x, &kt, &bias).unwrap())
        };
        let pb = |pt: &[f64]| {
            let bt = Tensor::new(vec![cout], pt.to_vec()).unwrap();
            dot(&conv1d_forward(&x, &k, &bt).unwrap())
        };
        grad_check(px, x.data(), dx.data())
            .max(grad_check(pk, k.data(), dk.data()))
            .max(grad_check(pb, bias.data(), db.data()))
    }));

    paths.push(a1_path("activations", |rng| {
        let n = rng.random_range(2..=12);
        // Keep ReLU probes away from its kink at zero.
        let z = Tensor::from_fn(vec![n], |_| {
            let v: f64 = rng.random_range(0.01..2.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        });
        let g = tensor_uniform(rng, vec![n], -1.0, 1.0);
        let dot = |t: &Tensor| {
            t.data()
                .iter()
                .zip(g.data())
                .map(|(a, w0)| a * w0)
                .sum::<f64>()
        };
        let mut worst = 0.0f64;
        for act in [true, false] {
            let analytic: Vec<f64> = if act {
                evoloss::nn::relu_grad(&z)
            } else {
                evoloss::nn::elu_grad(&z)
            }
            .data()
            .iter()
            .zip(g.data())
            .map(|(d, w0)| d * w0)
            .collect();
            let probe = |pt: &[f64]| {
                let zt = Tensor::new(vec![n], pt.to_vec()).unwrap();
                dot(&if act { relu(&zt) } else { elu(&zt) })
            };
            worst = worst.max(grad_check(probe, z.data(), &analytic));
        }
        worst
    }));

    paths.push(a1_path("softmax", |rng| {
        let (b, c) = (rng.random_range(1..=4), rng.random_range(2..=6));
        let z = tensor_uniform(rng, vec![b, c], -2.5, 2.5);
        let g = tensor_uniform(rng, vec![b, c], -1.0, 1.0);
        let p = softmax(&z);
        let dz = softmax_backward(&p, &g);
        let probe = |pt: &[f64]| {
            let zt = Tensor::new(vec![b, c], pt.to_vec()).unwrap();
            softmax(&zt)
                .data()
                .iter()
                .zip(g.data())
                .map(|(a, w0)| a * w0)
                .sum::<f64>()
        };
        grad_check(probe, z.data(), dz.data())
    }));

    paths.push(a1_path("ce", |rng| {
        let (b, c) = (rng.random_range(1..=4), rng.random_range(2..=6));
        let p = softmax(&tensor_uniform(rng, vec![b, c], -2.5, 2.5));
        let y = one_hot_batch(rng, b, c);
        let d = ce_grad(&p, &y).unwrap();
        let probe = |pt: &[f64]| {
            let t = Tensor::new(vec![b, c], pt.to_vec()).unwrap();
            ce_loss(&t, &y).unwrap()
        };
        grad_check(probe, p.data(), d.data())
    }));

    paths.push(a1_path("mse", |rng| {
        let (b, c) = (rng.random_range(1..=4), rng.random_range(2..=6));
        let p = tensor_uniform(rng, vec![b, c], 0.05, 0.95);
        let y = one_hot_batch(rng, b, c);
        let d = mse_grad(&p, &y).unwrap();
        let probe = |pt: &[f64]| {
            let t = Tensor::new(vec![b, c], pt.to_vec()).unwrap();
            mse_loss(&t, &y).unwrap()
        };
        grad_check(probe, p.data(), d.data())
    }));

    paths.push(a1_path("mln-input", |rng| {
        let arch = MlnArch {
            class_count: 6,
            filter_count: 4,
            kernel_width: 3,
        };
        let inst = rng.random_range(0..1_000_000);
        let genome = genome_init(arch, 9000 + inst, inst);
        let b = rng.random_range(1..=4);
        let p = tensor_uniform(rng, vec![b, 6], 0.02, 0.98);
        let y = one_hot_batch(rng, b, 6);
        let d = mln_input_grad(&genome, &p, &y).unwrap();
        let probe = |pt: &[f64]| {
            let t = Tensor::new(vec![b, 6], pt.to_vec()).unwrap();
            mln_forward(&genome, &t, &y).unwrap()
        };
        grad_check(probe, p.data(), d.data())
    }));

    paths.push(a1_path("end-to-end-ce", |rng| {
        a1_end_to_end(&LossKind::CrossEntropy, rng)
    }));
    paths.push(a1_path("end-to-end-mse", |rng| {
        a1_end_to_end(&LossKind::MeanSquaredError, rng)
    }));
    paths.push(a1_path("end-to-end-mln", |rng| {
        let arch = MlnArch {
            class_count: 3,
            filter_count: 2,
            kernel_width: 3,
        };
        let inst = rng.random_range(0..1_000_000);
        let genome = genome_init(arch, 17_000 + inst, inst);
        a1_end_to_end(&LossKind::Mln(genome), rng)
    }));

    let elapsed = start.elapsed().as_secs_f64();
    let (worst_name, worst) = paths
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .unwrap();
    let pass = worst < A1_TOL && elapsed < 30.0;
    (
        pass,
        format!(
            "{} paths × {A1_INSTANCES} instances, worst rel err {worst:.2e} ({worst_name}), {elapsed:.1}s (< 30s)",
            paths.len()
        ),
    )
}

// -------------------------------------------------------------- A2: oracles

fn dense_naive(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (n, i, o) = (x.rows(), x.cols(), b.data().len());
    Tensor::from_fn(vec![n, o], |flat| {
        let (r, c) = (flat / o, flat % o);
        let mut acc = b.data()[c];
        for k in 0..i {
            acc += x.at2(r, k) * w.at2(k, c);
        }
        acc
    })
}

fn conv1d_naive(x: &Tensor, k: &Tensor, b: &Tensor) -> Tensor {
    let (bs, cin, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (cout, kw) = (k.shape()[0], k.shape()[2]);
    let pad = (kw - 1) / 2;
    let mut out = Tensor::zeros(vec![bs, cout, w]);
    for n in 0..bs {
        for co in 0..cout {
            for t in 0..w {
                let mut acc = b.data()[co];
                for ci in 0..cin {
                    for dt in 0..kw {
                        let src = t as isize + dt as isize - pad as isize;
                        if src >= 0 && (src as usize) < w {
                            acc += x.at3(n, ci, src as usize) * k.at3(co, ci, dt);
                        }
                    }
                }
                let idx = out.idx3(n, co, t);
                out.data_mut()[idx] = acc;
            }
        }
    }
    out
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0f64.max(a.abs()).max(b.abs())
}

fn a2_oracles() -> (bool, String) {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for inst in 0..100u64 {
        let mut rng = rng_for("a2", inst);
        let (b, i, o) = (
            rng.random_range(1..=5),
            rng.random_range(1..=7),
            rng.random_range(1..=6),
        );
        let x = tensor_uniform(&mut rng, vec![b, i], -2.0, 2.0);
        let w = tensor_uniform(&mut rng, vec![i, o], -2.0, 2.0);
        let bias = tensor_uniform(&mut rng, vec![o], -1.0, 1.0);
        let fast = dense_forward(&x, &w, &bias).unwrap();
        let slow = dense_naive(&x, &w, &bias);
        for (a0, b0) in fast.data().iter().zip(slow.data()) {
            worst = worst.max(rel_err(*a0, *b0));
        }

        let (cin, cout) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let kw = [1, 3, 5][rng.random_range(0..3)];
        let width = rng.random_range(kw..=kw + 5);
        let xc = tensor_uniform(&mut rng, vec![b, cin, width], -2.0, 2.0);
        let kc = tensor_uniform(&mut rng, vec![cout, cin, kw], -2.0, 2.0);
        let bc = tensor_uniform(&mut rng, vec![cout], -1.0, 1.0);
        let fast = conv1d_forward(&xc, &kc, &bc).unwrap();
        let slow = conv1d_naive(&xc, &kc, &bc);
        for (a0, b0) in fast.data().iter().zip(slow.data()) {
            worst = worst.max(rel_err(*a0, *b0));
        }
    }
    let forwards_ok = worst < 1e-12;

    // Truncation selection versus brute-force enumeration (2T ≤ 8), with the
    // equal-fitness-prefers-lower-index tie rule. Genomes are tagged through
    // φ[0] so survivors can be mapped back to their original indices.
    let arch = MlnArch {
        class_count: 2,
        filter_count: 1,
        kernel_width: 1,
    };
    let mut select_ok = true;
    'outer: for inst in 0..100u64 {
        let mut rng = rng_for("a2-select", inst);
        let t = rng.random_range(1..=4usize);
        let n = 2 * t;
        let cands: Vec<Candidate> = (0..n)
            .map(|i| {
                let mut phi = vec![0.0; arch.genome_len()];
                phi[0] = i as f64;
                Candidate {
                    genome: MlnGenome::decode(arch, phi).unwrap(),
                    sigma: vec![0.1; arch.genome_len()],
                    fitness: Some(rng.random_range(0..=4) as f64 / 4.0),
                }
            })
            .collect();
        let fit: Vec<f64> = cands.iter().map(|c| c.fitness.unwrap()).collect();

        let beats = |a: usize, b: usize| fit[a] > fit[b] || (fit[a] == fit[b] && a < b);
        let mut expected: Option<Vec<usize>> = None;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != t {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let wins = members.iter().all(|&m| {
                (0..n)
                    .filter(|i| mask >> i & 1 == 0)
                    .all(|loser| beats(m, loser))
            });
            if wins {
                assert!(expected.is_none(), "tie rule must make the winner unique");
                expected = Some(members);
            }
        }
        let picked = select(cands, t).unwrap();
        let mut got: Vec<usize> = picked
            .iter()
            .map(|c| c.genome.encode()[0] as usize)
            .collect();
        got.sort_unstable();
        if got != expected.unwrap() {
            select_ok = false;
            break 'outer;
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    let pass = forwards_ok && select_ok && elapsed < 10.0;
    (
        pass,
        format!(
            "forwards worst rel err {worst:.2e} (< 1e-12), selection {} brute force on 100 draws, {elapsed:.1}s (< 10s)",
            if select_ok { "matches" } else { "DIVERGES from" }
        ),
    )
}

// ------------------------------- A3: FashionMNIST CE vs. the published band

fn a3_fashionmnist(tmp: &Path) -> (bool, String) {
    let data_dir = std::env::var_os("EVOLOSS_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("data/fashionmnist"));
    if !data_dir.join("train-images-idx3-ubyte").is_file() {
        return (
            false,
            format!(
                "FashionMNIST not found under {} (run scripts/fetch_data.sh or set EVOLOSS_DATA_DIR)",
                data_dir.display()
            ),
        );
    }
    let out = tmp.join("a3");
    let start = Instant::now();
    let run = evoloss(&[
        "meta-test",
        "--dataset",
        "fashionmnist",
        "--data-dir",
        data_dir.to_str().unwrap(),
        "--seed",
        "1",
        "--losses",
        "ce,mse",
        "--test-seeds",
        "10",
        "--inner-steps",
        "20",
        "--out",
        out.to_str().unwrap(),
    ]);
    let elapsed = start.elapsed().as_secs_f64();
    if let Err(e) = run {
        return (false, format!("baseline run failed: {e}"));
    }
    let summary = match read_file(&out.join("summary.csv")) {
        Ok(s) => s,
        Err(e) => return (false, e),
    };
    let (ce, mse) = match (summary_mean(&summary, "ce"), summary_mean(&summary, "mse")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return (false, e),
    };
    let pass = (0.45..=0.70).contains(&ce) && ce > mse && elapsed < 180.0;
    (
        pass,
        format!(
            "CE mean {ce:.4} (band 0.45–0.70, published 0.5922), MSE mean {mse:.4} (must be lower), {elapsed:.0}s (< 180s)"
        ),
    )
}

// ----------------------------------------- A4 + A5: desk evolution run

struct DeskRun {
    a4: (bool, String),
    a5: (bool, String),
}

fn desk_run(tmp: &Path) -> DeskRun {
    let cfg = workspace_root().join("configs/desk.cfg");
    let cfg_s = cfg.to_str().unwrap();
    let out = tmp.join("desk");
    let out_s = out.to_str().unwrap().to_string();

    let start = Instant::now();
    if let Err(e) = evoloss(&["meta-train", "--config", cfg_s, "--out", &out_s]) {
        let msg = format!("desk meta-train failed: {e}");
        return DeskRun {
            a4: (false, msg.clone()),
            a5: (false, msg),
        };
    }
    let elapsed = start.elapsed().as_secs_f64();

    let history = match read_file(&out.join("fitness_history.csv")) {
        Ok(h) => h,
        Err(e) => {
            return DeskRun {
                a4: (false, e.clone()),
                a5: (false, e),
            }
        }
    };
    let rows: Vec<(f64, f64)> = history
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let ep1 = rows[0].0;
    let last_bsf = rows.last().unwrap().1;
    let margin = last_bsf - ep1;
    let nondecreasing = rows.windows(2).all(|w| w[1].1 >= w[0].1);
    let a4_pass = rows.len() == 25 && margin >= 0.05 && nondecreasing && elapsed < 600.0;
    let a4 = (
        a4_pass,
        format!(
            "best-so-far {last_bsf:.3} vs episode-1 best {ep1:.3} (margin {margin:+.3} ≥ +0.050), best-so-far {}, {elapsed:.0}s (< 600s)",
            if nondecreasing {
                "non-decreasing"
            } else {
                "DECREASES"
            }
        ),
    );

    // A5: the checkpoint just written, and an all-zero genome, each
    // meta-tested on the same 10 fresh episodes.
    let run_mln = |checkpoint: &Path, tag: &str| -> Result<f64, String> {
        let dir = tmp.join(tag);
        evoloss(&[
            "meta-test",
            "--config",
            cfg_s,
            "--losses",
            "mln",
            "--checkpoint",
            checkpoint.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ])?;
        summary_mean(&read_file(&dir.join("summary.csv"))?, "mln")
    };

    let zero_cp = tmp.join("zero-checkpoint.txt");
    write_checkpoint(&zero_cp, &vec![0.0; 301]);

    let a5 = match (
        run_mln(&out.join("checkpoint.txt"), "a5-evolved"),
        run_mln(&zero_cp, "a5-zero"),
    ) {
        (Ok(evolved), Ok(zero)) => {
            let pass = evolved >= 0.30 && evolved >= zero + 0.15;
            (
                pass,
                format!(
                    "evolved checkpoint mean precision {evolved:.3} (≥ 0.300, chance 0.100), zero genome {zero:.3} (lead {:+.3} ≥ +0.150)",
                    evolved - zero
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => (false, e),
    };

    DeskRun { a4, a5 }
}

// -------------------------------------------------------- A6: determinism

fn a6_determinism(tmp: &Path) -> (bool, String) {
    let mut train_artifacts: Vec<(String, String)> = Vec::new();
    for (tag, jobs) in [("t1", "1"), ("t2", "2")] {
        let out = tmp.join(format!("a6-{tag}"));
        let out_s = out.to_str().unwrap().to_string();
        if let Err(e) = evoloss(&[
            "meta-train",
            "--dataset",
            "synth",
            "--seed",
            "11",
            "--pop",
            "2",
            "--episodes",
            "2",
            "--inner-steps",
            "3",
            "--lr",
            "20",
            "--evals-per-fitness",
            "1",
            "--frozen-lanes",
            "--jobs",
            jobs,
            "--out",
            &out_s,
        ]) {
            return (false, format!("meta-train --jobs {jobs} failed: {e}"));
        }
        match (
            read_file(&out.join("checkpoint.txt")),
            read_file(&out.join("fitness_history.csv")),
        ) {
            (Ok(c), Ok(h)) => train_artifacts.push((c, h)),
            (Err(e), _) | (_, Err(e)) => return (false, e),
        }
    }

    let mut test_artifacts: Vec<(String, String)> = Vec::new();
    for (tag, jobs) in [("s1", "1"), ("s2", "2"), ("s0", "0")] {
        let out = tmp.join(format!("a6-{tag}"));
        let out_s = out.to_str().unwrap().to_string();
        if let Err(e) = evoloss(&[
            "meta-test",
            "--dataset",
            "synth",
            "--seed",
            "11",
            "--losses",
            "ce,mse",
            "--test-seeds",
            "3",
            "--inner-steps",
            "4",
            "--jobs",
            jobs,
            "--out",
            &out_s,
        ]) {
            return (false, format!("meta-test --jobs {jobs} failed: {e}"));
        }
        match (
            read_file(&out.join("curves.csv")),
            read_file(&out.join("summary.csv")),
        ) {
            (Ok(c), Ok(s)) => test_artifacts.push((c, s)),
            (Err(e), _) | (_, Err(e)) => return (false, e),
        }
    }

    let trains_equal = train_artifacts.windows(2).all(|w| w[0] == w[1]);
    let tests_equal = test_artifacts.windows(2).all(|w| w[0] == w[1]);
    (
        trains_equal && tests_equal,
        format!(
            "meta-train checkpoints/histories {} across --jobs 1/2; meta-test CSVs {} across --jobs 1/2/0",
            if trains_equal { "byte-identical" } else { "DIFFER" },
            if tests_equal { "byte-identical" } else { "DIFFER" },
        ),
    )
}

// ------------------------------------------------------ A7: format fidelity

fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    b.extend_from_slice(&count.to_be_bytes());
    b.extend_from_slice(&rows.to_be_bytes());
    b.extend_from_slice(&cols.to_be_bytes());
    b.extend_from_slice(pixels);
    b
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    b.extend_from_slice(labels);
    b
}

fn a7_formats(tmp: &Path) -> (bool, String) {
    let dir = tmp.join("a7");
    fs::create_dir_all(&dir).unwrap();
    let write = |name: &str, bytes: &[u8]| -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, bytes).unwrap();
        p
    };
    let mut problems: Vec<&'static str> = Vec::new();

    // IDX: three 2×2 images, every byte value distinct.
    let pixels: Vec<u8> = vec![0, 51, 102, 153, 204, 255, 10, 20, 30, 40, 50, 60];
    let img = write("images", &idx_images(3, 2, 2, &pixels));
    let lab = write("labels", &idx_labels(&[1, 0, 1]));
    match load_idx(&img, &lab, Split::MetaTest) {
        Ok(ds) => {
            let expected: Vec<f64> = pixels.iter().map(|&b| b as f64 / 255.0).collect();
            if ds.len() != 3
                || ds.feature_dim() != 4
                || ds.class_count() != 2
                || ds.images().data() != expected.as_slice()
                || ds.labels() != [1, 0, 1]
            {
                problems.push("idx fixture decodes wrong");
            }
        }
        Err(_) => problems.push("idx fixture rejected"),
    }

    let bad_magic = write("bad-magic", &{
        let mut b = idx_images(3, 2, 2, &pixels);
        b[3] = 0x07;
        b
    });
    if !matches!(
        load_idx(&bad_magic, &lab, Split::MetaTest),
        Err(Error::Data(DataError::WrongMagic { .. }))
    ) {
        problems.push("wrong idx magic not flagged");
    }

    let truncated = write("truncated", &idx_images(3, 2, 2, &pixels[..11]));
    if !matches!(
        load_idx(&truncated, &lab, Split::MetaTest),
        Err(Error::Data(DataError::Truncated { .. }))
    ) {
        problems.push("truncated idx not flagged");
    }

    let two_labels = write("two-labels", &idx_labels(&[1, 0]));
    if !matches!(
        load_idx(&img, &two_labels, Split::MetaTest),
        Err(Error::Data(DataError::CountMismatch { .. }))
    ) {
        problems.push("idx count mismatch not flagged");
    }

    // CIFAR-10: 3073-byte records (label + 3072 pixels), two batch files.
    let record = |label: u8, start: usize| -> Vec<u8> {
        let mut r = vec![label];
        r.extend((0..3072).map(|i| ((start + i) % 251) as u8));
        r
    };
    let batch1 = write("batch1.bin", &[record(7, 0), record(2, 5)].concat());
    let batch2 = write("batch2.bin", &record(9, 11));
    match load_cifar10(&[&batch1, &batch2], Split::MetaTrain) {
        Ok(ds) => {
            let sample_ok = ds.len() == 3
                && ds.feature_dim() == 3072
                && ds.class_count() == 10
                && ds.labels() == [7, 2, 9]
                && (ds.images().at2(0, 0) - 0.0 / 255.0).abs() == 0.0
                && ds.images().at2(1, 0) == 5.0 / 255.0
                && ds.images().at2(2, 3071) == ((11 + 3071) % 251) as f64 / 255.0;
            if !sample_ok {
                problems.push("cifar fixture decodes wrong");
            }
        }
        Err(_) => problems.push("cifar fixture rejected"),
    }

    let bad_label = write("bad-label.bin", &record(10, 0));
    if !matches!(
        load_cifar10(&[&bad_label], Split::MetaTrain),
        Err(Error::Data(DataError::BadLabel { .. }))
    ) {
        problems.push("cifar label 10 not flagged");
    }

    let ragged = write("ragged.bin", &record(1, 0)[..3000]);
    if !matches!(
        load_cifar10(&[&ragged], Split::MetaTrain),
        Err(Error::Data(DataError::BadRecordLength { .. }))
    ) {
        problems.push("ragged cifar record not flagged");
    }

    if !matches!(
        load_cifar10(&[dir.join("absent.bin")], Split::MetaTrain),
        Err(Error::Data(DataError::Io(_)))
    ) {
        problems.push("missing cifar file not an i/o error");
    }

    (
        problems.is_empty(),
        if problems.is_empty() {
            "IDX and CIFAR-10 fixtures decode exactly; 6 corruptions produce their distinct errors"
                .to_string()
        } else {
            problems.join("; ")
        },
    )
}

// ------------------------------------------------------------------- runner

#[test]
fn acceptance_criteria() {
    let tmp = tempfile::tempdir().unwrap();
    let mut failed: Vec<&'static str> = Vec::new();
    let mut report = |tag: &'static str, (pass, detail): (bool, String)| {
        println!("{tag} {} — {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(tag);
        }
    };

    report("A1", a1_gradients());
    report("A2", a2_oracles());
    report("A3", a3_fashionmnist(tmp.path()));
    let desk = desk_run(tmp.path());
    report("A4", desk.a4);
    report("A5", desk.a5);
    report("A6", a6_determinism(tmp.path()));
    report("A7", a7_formats(tmp.path()));

    assert!(
        failed.is_empty(),
        "acceptance criteria failed: {}",
        failed.join(", ")
    );
}
