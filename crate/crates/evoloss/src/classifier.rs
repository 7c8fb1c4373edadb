//! The inner-loop classifier: a 3-layer ReLU MLP with softmax output,
//! trained by N steps of full-batch SGD through any [`LossKind`], plus the
//! validation-precision evaluator that defines evolutionary fitness.

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::nn;
use crate::rng::{stream, Lane};
use crate::tensor::Tensor;

/// Default hidden widths of the classifier MLP.
pub const HIDDEN1: usize = 128;
pub const HIDDEN2: usize = 64;

/// Three dense layers `[D, H1, H2, C]`: ReLU after the first two, softmax
/// after the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    layer_dims: Vec<usize>,
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
}

/// What one inner training run produced: the per-step training losses and
/// the final validation precision.
#[derive(Debug, Clone)]
pub struct TrainRecord {
    /// Training loss before each of the N updates (length = configured N).
    pub losses: Vec<f64>,
    /// Precision on the episode's validation split after the final step.
    pub val_precision: f64,
    /// Which sampling lane produced the episode.
    pub lane: Lane,
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() != 4 {
        return Err(Error::Config(format!(
            "classifier needs [D, H1, H2, C] (4 dims), got {}",
            layer_dims.len()
        )));
    }
    if layer_dims.contains(&0) {
        return Err(Error::Config("classifier dims must all be ≥ 1".into()));
    }
    Ok(())
}

impl Classifier {
    /// Glorot-uniform weights, zero biases, deterministic per lane.
    pub fn init(layer_dims: &[usize], master_seed: u64, lane: Lane) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut rng = stream(master_seed, lane);
        let mut weights = Vec::with_capacity(3);
        let mut biases = Vec::with_capacity(3);
        for l in 0..3 {
            let (fan_in, fan_out) = (layer_dims[l], layer_dims[l + 1]);
            let hw = (6.0 / (fan_in + fan_out) as f64).sqrt();
            use rand::Rng;
            weights.push(Tensor::from_fn(vec![fan_in, fan_out], |_| {
                rng.random_range(-hw..hw)
            }));
            biases.push(Tensor::zeros(vec![fan_out]));
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    /// All-zero parameters: every forward output is the uniform distribution.
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        let weights = (0..3)
            .map(|l| Tensor::zeros(vec![layer_dims[l], layer_dims[l + 1]]))
            .collect();
        let biases = (0..3).map(|l| Tensor::zeros(vec![layer_dims[l + 1]])).collect();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Tensor] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[Tensor] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [Tensor] {
        &mut self.biases
    }

    /// Class probabilities for a batch: dense→ReLU→dense→ReLU→dense→softmax.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_trace(x)?.probs)
    }
}

/// Intermediate activations retained for backpropagation.
struct ForwardTrace {
    z1: Tensor,
    a1: Tensor,
    z2: Tensor,
    a2: Tensor,
    probs: Tensor,
}

impl Classifier {
    fn forward_trace(&self, x: &Tensor) -> Result<ForwardTrace> {
        let z1 = nn::dense_forward(x, &self.weights[0], &self.biases[0])?;
        let a1 = nn::relu(&z1);
        let z2 = nn::dense_forward(&a1, &self.weights[1], &self.biases[1])?;
        let a2 = nn::relu(&z2);
        let z3 = nn::dense_forward(&a2, &self.weights[2], &self.biases[2])?;
        let probs = nn::softmax(&z3);
        Ok(ForwardTrace { z1, a1, z2, a2, probs })
    }
}

/// Chains a gradient w.r.t. softmax *outputs* back to the logits:
/// `dz = p ⊙ (dp − ⟨dp, p⟩_row)`.
pub fn softmax_backward(p: &Tensor, dp: &Tensor) -> Tensor {
    let (b, c) = (p.rows(), p.cols());
    let mut out = Tensor::zeros(vec![b, c]);
    for n in 0..b {
        let inner: f64 = (0..c).map(|j| dp.at2(n, j) * p.at2(n, j)).sum();
        for j in 0..c {
            let idx = out.idx2(n, j);
            out.data_mut()[idx] = p.at2(n, j) * (dp.at2(n, j) - inner);
        }
    }
    out
}

/// One full-batch SGD update in place: forward on `train_x`, loss
/// gradient w.r.t. the softmax probabilities, chained through the softmax
/// Jacobian and the MLP, `θ ← θ − α·∇θ`. Returns the pre-update loss.
///
/// A non-finite loss, probability, or gradient aborts with
/// [`Error::Diverged`] carrying `step` (supplied by the caller purely for
/// the error payload), leaving the classifier as of the previous step.
pub fn train_step(
    clf: &mut Classifier,
    loss: &LossKind,
    episode: &crate::episodes::Episode,
    alpha: f64,
    step: usize,
) -> Result<f64> {
    let trace = clf.forward_trace(&episode.train_x)?;
    let p = &trace.probs;
    let l = loss.loss(p, &episode.train_y)?;
    if !l.is_finite() || !p.all_finite() {
        return Err(Error::Diverged { step });
    }

    let dp = loss.grad(p, &episode.train_y)?;
    if !dp.all_finite() {
        return Err(Error::Diverged { step });
    }
    let dz3 = softmax_backward(p, &dp);
    let (da2, dw3, db3) = nn::dense_backward(&trace.a2, &clf.weights[2], &dz3)?;
    let dz2 = Tensor::from_fn(da2.shape().to_vec(), |i| {
        da2.data()[i] * if trace.z2.data()[i] > 0.0 { 1.0 } else { 0.0 }
    });
    let (da1, dw2, db2) = nn::dense_backward(&trace.a1, &clf.weights[1], &dz2)?;
    let dz1 = Tensor::from_fn(da1.shape().to_vec(), |i| {
        da1.data()[i] * if trace.z1.data()[i] > 0.0 { 1.0 } else { 0.0 }
    });
    let (_, dw1, db1) = nn::dense_backward(&episode.train_x, &clf.weights[0], &dz1)?;

    for (w, dw) in clf.weights.iter_mut().zip([&dw1, &dw2, &dw3]) {
        for (v, g) in w.data_mut().iter_mut().zip(dw.data()) {
            *v -= alpha * g;
        }
    }
    for (b, db) in clf.biases.iter_mut().zip([&db1, &db2, &db3]) {
        for (v, g) in b.data_mut().iter_mut().zip(db.data()) {
            *v -= alpha * g;
        }
    }
    Ok(l)
}

/// Runs N steps of full-batch SGD on the episode's training split and
/// evaluates precision on its validation split.
///
/// Every step feeds all of `train_x` (Algorithm-style full batch). A
/// non-finite loss or gradient aborts with [`Error::Diverged`] carrying
/// the step index — a recoverable signal, since evolution must evaluate
/// arbitrary genomes (the caller maps it to fitness 0).
pub fn train_inner(
    classifier: &Classifier,
    loss: &LossKind,
    episode: &crate::episodes::Episode,
    steps: usize,
    alpha: f64,
    lane: Lane,
) -> Result<(Classifier, TrainRecord)> {
    let mut clf = classifier.clone();
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        losses.push(train_step(&mut clf, loss, episode, alpha, step)?);
    }
    let val_precision = precision(&clf, &episode.val_x, &episode.val_y)?;
    let record = TrainRecord {
        losses,
        val_precision,
        lane,
    };
    Ok((clf, record))
}

/// Fraction of validation rows whose predicted class (argmax of the
/// forward output, ties to the lowest class index) matches the label.
pub fn precision(classifier: &Classifier, val_x: &Tensor, val_y: &Tensor) -> Result<f64> {
    let p = classifier.forward(val_x)?;
    let (b, c) = (p.rows(), p.cols());
    val_y.expect_shape(&[b, c], "validation labels")?;
    let mut hits = 0usize;
    for n in 0..b {
        let mut best = 0usize;
        for j in 1..c {
            if p.at2(n, j) > p.at2(n, best) {
                best = j;
            }
        }
        if val_y.at2(n, best) == 1.0 {
            hits += 1;
        }
    }
    Ok(hits as f64 / b as f64)
}
