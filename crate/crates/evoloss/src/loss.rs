//! The three losses of the comparison protocol: cross-entropy, mean
//! squared error, and the parametrized meta-loss network (MLN).
//!
//! Each exposes a scalar loss and its gradient with respect to the
//! classifier's probability output ŷ. The MLN is a dual-channel network:
//! each channel (predictions ŷ, one-hot labels y) passes through its own
//! dense C→C layer + ELU, the two are stacked into a 2-channel matrix
//! over class positions, and two 1-D convolutions integrate them into a
//! scalar via mean pooling. Its flat parameter vector is the genome the
//! evolution strategy mutates.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn;
use crate::rng::{stream, Lane, Purpose};
use crate::tensor::Tensor;

/// Probability clamp for cross-entropy, avoiding log(0).
pub const CE_EPS: f64 = 1e-7;

/// Shape of the meta-loss network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlnArch {
    /// Number of classes C (length of the ŷ / y vectors).
    pub class_count: usize,
    /// Convolution filters F in the integration block.
    pub filter_count: usize,
    /// Kernel width K of both convolutions (odd).
    pub kernel_width: usize,
}

impl Default for MlnArch {
    fn default() -> Self {
        Self {
            class_count: 10,
            filter_count: 8,
            kernel_width: 3,
        }
    }
}

impl MlnArch {
    pub fn new(class_count: usize, filter_count: usize, kernel_width: usize) -> Result<Self> {
        let arch = Self {
            class_count,
            filter_count,
            kernel_width,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::Config(format!(
                "class_count must be ≥ 2, got {}",
                self.class_count
            )));
        }
        if self.filter_count < 1 {
            return Err(Error::Config("filter_count must be ≥ 1".into()));
        }
        if self.kernel_width.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "kernel_width must be odd, got {}",
                self.kernel_width
            )));
        }
        Ok(())
    }

    /// Flat genome length: `2·(C·C + C) + (F·2·K + F) + (F·K + 1)`.
    pub fn genome_len(&self) -> usize {
        let (c, f, k) = (self.class_count, self.filter_count, self.kernel_width);
        2 * (c * c + c) + (f * 2 * k + f) + (f * k + 1)
    }
}

/// Flat MLN parameter vector φ with its fixed segment layout:
/// `[ŷ-dense w,b | y-dense w,b | conv1 kernels,bias | conv2 kernels,bias]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlnGenome {
    arch: MlnArch,
    phi: Vec<f64>,
}

/// Borrowed views of the genome's parameter segments.
pub struct MlnSegments<'a> {
    pub dense_p_w: &'a [f64],
    pub dense_p_b: &'a [f64],
    pub dense_y_w: &'a [f64],
    pub dense_y_b: &'a [f64],
    pub conv1_k: &'a [f64],
    pub conv1_b: &'a [f64],
    pub conv2_k: &'a [f64],
    pub conv2_b: &'a [f64],
}

impl MlnGenome {
    /// Wraps a flat vector, checking its length against the architecture.
    pub fn decode(arch: MlnArch, phi: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if phi.len() != arch.genome_len() {
            return Err(Error::Shape(format!(
                "genome length {} does not match architecture ({} expected)",
                phi.len(),
                arch.genome_len()
            )));
        }
        Ok(Self { arch, phi })
    }

    /// The all-zero genome (a constant-zero loss with zero gradient).
    pub fn zero(arch: MlnArch) -> Self {
        let n = arch.genome_len();
        Self {
            arch,
            phi: vec![0.0; n],
        }
    }

    /// Glorot-uniform init: each weight segment is drawn from a zero-mean
    /// uniform with half-width `√(6/(fan_in+fan_out))`, biases zero.
    ///
    /// Both channel embeddings start from the *same* draw (the y-dense
    /// segment is a copy of the ŷ-dense segment), so the convolution sees
    /// the two channels in a shared coordinate system at generation 1 —
    /// without this, two independently scrambled embeddings give random
    /// genomes no ŷ/y interaction for selection to amplify. Mutation
    /// decorrelates the channels immediately afterwards.
    pub fn init(arch: MlnArch, rng: &mut impl Rng) -> Self {
        let (c, f, k) = (arch.class_count, arch.filter_count, arch.kernel_width);
        let mut phi = vec![0.0; arch.genome_len()];
        let dense_sz = c * c + c;

        // ŷ-channel dense C→C: fan_in = fan_out = C; bias stays zero.
        let hw = (6.0 / (c + c) as f64).sqrt();
        for v in &mut phi[0..c * c] {
            *v = rng.random_range(-hw..hw);
        }
        // y-channel dense: shared draw (see doc comment).
        let (p_seg, y_seg) = phi.split_at_mut(dense_sz);
        y_seg[0..c * c].copy_from_slice(&p_seg[0..c * c]);

        // conv1 (2→F): fan_in = 2·K, fan_out = F·K.
        let o = 2 * dense_sz;
        let hw = (6.0 / (2 * k + f * k) as f64).sqrt();
        for v in &mut phi[o..o + f * 2 * k] {
            *v = rng.random_range(-hw..hw);
        }

        // conv2 (F→1): fan_in = F·K, fan_out = K.
        let o = o + f * 2 * k + f;
        let hw = (6.0 / (f * k + k) as f64).sqrt();
        for v in &mut phi[o..o + f * k] {
            *v = rng.random_range(-hw..hw);
        }

        Self { arch, phi }
    }

    pub fn arch(&self) -> MlnArch {
        self.arch
    }

    /// The flat parameter vector.
    pub fn encode(&self) -> &[f64] {
        &self.phi
    }

    pub fn encode_mut(&mut self) -> &mut [f64] {
        &mut self.phi
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Splits the flat vector into named parameter segments.
    pub fn segments(&self) -> MlnSegments<'_> {
        let (c, f, k) = (
            self.arch.class_count,
            self.arch.filter_count,
            self.arch.kernel_width,
        );
        let mut o = 0;
        let mut take = |n: usize| {
            let s = &self.phi[o..o + n];
            o += n;
            s
        };
        MlnSegments {
            dense_p_w: take(c * c),
            dense_p_b: take(c),
            dense_y_w: take(c * c),
            dense_y_b: take(c),
            conv1_k: take(f * 2 * k),
            conv1_b: take(f),
            conv2_k: take(f * k),
            conv2_b: take(1),
        }
    }
}

/// Checks that every row of `y` is one-hot: entries in {0,1}, exactly one 1.
fn validate_one_hot(y: &Tensor) -> Result<()> {
    for n in 0..y.rows() {
        let row = y.row(n);
        let mut ones = 0;
        for &v in row {
            if v == 1.0 {
                ones += 1;
            } else if v != 0.0 {
                return Err(Error::Invalid(format!(
                    "label row {n} is not one-hot: entry {v} not in {{0,1}}"
                )));
            }
        }
        if ones != 1 {
            return Err(Error::Invalid(format!(
                "label row {n} is not one-hot: {ones} ones"
            )));
        }
    }
    Ok(())
}

fn validate_prob_rows(p: &Tensor) -> Result<()> {
    // Catches wiring mistakes (logits handed in instead of probabilities)
    // while staying looser than a finite-difference probe step, so the
    // gradient checks can perturb single entries.
    for n in 0..p.rows() {
        let s: f64 = p.row(n).iter().sum();
        if (s - 1.0).abs() > 1e-4 {
            return Err(Error::Invalid(format!(
                "probability row {n} sums to {s}, expected 1 within 1e-4"
            )));
        }
    }
    Ok(())
}

/// Cross-entropy: `−(1/B)·Σ y·log(clamp(p, 1e-7, 1−1e-7))`.
pub fn ce_loss(p: &Tensor, y: &Tensor) -> Result<f64> {
    validate_prob_rows(p)?;
    validate_one_hot(y)?;
    let b = p.rows() as f64;
    let mut acc = 0.0;
    for (pv, yv) in p.data().iter().zip(y.data()) {
        if *yv != 0.0 {
            acc -= yv * pv.clamp(CE_EPS, 1.0 - CE_EPS).ln();
        }
    }
    Ok(acc / b)
}

/// Gradient of [`ce_loss`] w.r.t. `p`: `−y/(B·clamp(p))`, zero where clamped.
pub fn ce_grad(p: &Tensor, y: &Tensor) -> Result<Tensor> {
    validate_prob_rows(p)?;
    validate_one_hot(y)?;
    let b = p.rows() as f64;
    let mut out = Tensor::zeros(vec![p.rows(), p.cols()]);
    for (i, (pv, yv)) in p.data().iter().zip(y.data()).enumerate() {
        if *yv != 0.0 && *pv > CE_EPS && *pv < 1.0 - CE_EPS {
            out.data_mut()[i] = -yv / (b * pv);
        }
    }
    Ok(out)
}

/// Mean squared error normalized by `B·C`: `(1/(B·C))·Σ (p−y)²`.
pub fn mse_loss(p: &Tensor, y: &Tensor) -> Result<f64> {
    let n = (p.rows() * p.cols()) as f64;
    let mut acc = 0.0;
    for (pv, yv) in p.data().iter().zip(y.data()) {
        let d = pv - yv;
        acc += d * d;
    }
    Ok(acc / n)
}

/// Gradient of [`mse_loss`]: `2(p−y)/(B·C)`.
pub fn mse_grad(p: &Tensor, y: &Tensor) -> Result<Tensor> {
    let n = (p.rows() * p.cols()) as f64;
    let mut out = Tensor::zeros(vec![p.rows(), p.cols()]);
    for (i, (pv, yv)) in p.data().iter().zip(y.data()).enumerate() {
        out.data_mut()[i] = 2.0 * (pv - yv) / n;
    }
    Ok(out)
}

/// Everything the MLN pass needs to retain for its backward sweep.
struct MlnTrace {
    zp: Tensor,
    stacked: Tensor,
    z1: Tensor,
    loss: f64,
}

/// Shared forward machinery for [`mln_forward`] and [`mln_input_grad`].
fn mln_pass(genome: &MlnGenome, p: &Tensor, y: &Tensor) -> Result<MlnTrace> {
    let arch = genome.arch();
    let (c, f, k) = (arch.class_count, arch.filter_count, arch.kernel_width);
    let b = p.rows();
    p.expect_shape(&[b, c], "mln ŷ input")?;
    y.expect_shape(&[b, c], "mln y input")?;
    let seg = genome.segments();

    let wp = Tensor::new(vec![c, c], seg.dense_p_w.to_vec())?;
    let bp = Tensor::new(vec![c], seg.dense_p_b.to_vec())?;
    let wy = Tensor::new(vec![c, c], seg.dense_y_w.to_vec())?;
    let by = Tensor::new(vec![c], seg.dense_y_b.to_vec())?;

    // Per-channel dense + ELU.
    let zp = nn::dense_forward(p, &wp, &bp)?;
    let zy = nn::dense_forward(y, &wy, &by)?;
    let hp = nn::elu(&zp);
    let hy = nn::elu(&zy);

    // Stack into a 2-channel matrix over the C class positions.
    let mut stacked = Tensor::zeros(vec![b, 2, c]);
    for n in 0..b {
        for j in 0..c {
            let i0 = stacked.idx3(n, 0, j);
            stacked.data_mut()[i0] = hp.at2(n, j);
            let i1 = stacked.idx3(n, 1, j);
            stacked.data_mut()[i1] = hy.at2(n, j);
        }
    }

    let k1 = Tensor::new(vec![f, 2, k], seg.conv1_k.to_vec())?;
    let b1 = Tensor::new(vec![f], seg.conv1_b.to_vec())?;
    let k2 = Tensor::new(vec![1, f, k], seg.conv2_k.to_vec())?;
    let b2 = Tensor::new(vec![1], seg.conv2_b.to_vec())?;

    let z1 = nn::conv1d_forward(&stacked, &k1, &b1)?;
    let h1 = nn::elu(&z1);
    let z2 = nn::conv1d_forward(&h1, &k2, &b2)?;

    // Mean over class positions, then over the batch.
    let loss = z2.data().iter().sum::<f64>() / (b * c) as f64;
    Ok(MlnTrace {
        zp,
        stacked,
        z1,
        loss,
    })
}

/// Scalar MLN loss for a batch of (ŷ, y) rows. Any real value is allowed;
/// the learned loss carries no sign constraint.
pub fn mln_forward(genome: &MlnGenome, p: &Tensor, y: &Tensor) -> Result<f64> {
    Ok(mln_pass(genome, p, y)?.loss)
}

/// Gradient of the scalar MLN loss w.r.t. the prediction input ŷ.
///
/// Exact backpropagation through conv2, conv1, and the ŷ-channel dense
/// layer only — y is a constant input, so its channel receives no gradient.
pub fn mln_input_grad(genome: &MlnGenome, p: &Tensor, y: &Tensor) -> Result<Tensor> {
    let arch = genome.arch();
    let (c, f, k) = (arch.class_count, arch.filter_count, arch.kernel_width);
    let b = p.rows();
    let trace = mln_pass(genome, p, y)?;
    let seg = genome.segments();

    let k1 = Tensor::new(vec![f, 2, k], seg.conv1_k.to_vec())?;
    let k2 = Tensor::new(vec![1, f, k], seg.conv2_k.to_vec())?;
    let wp = Tensor::new(vec![c, c], seg.dense_p_w.to_vec())?;

    // d loss / d z2 = 1/(B·C) everywhere.
    let dz2 = Tensor::from_fn(vec![b, 1, c], |_| 1.0 / (b * c) as f64);
    let h1 = nn::elu(&trace.z1);
    let (dh1, _, _) = nn::conv1d_backward(&h1, &k2, &dz2)?;

    let e1 = nn::elu_grad(&trace.z1);
    let dz1 = Tensor::from_fn(vec![b, f, c], |i| dh1.data()[i] * e1.data()[i]);
    let (dstacked, _, _) = nn::conv1d_backward(&trace.stacked, &k1, &dz1)?;

    // Channel 0 is the ŷ path; channel 1 (y) is constant input.
    let mut dhp = Tensor::zeros(vec![b, c]);
    for n in 0..b {
        for j in 0..c {
            let idx = dhp.idx2(n, j);
            dhp.data_mut()[idx] = dstacked.at3(n, 0, j);
        }
    }
    let ep = nn::elu_grad(&trace.zp);
    let dzp = Tensor::from_fn(vec![b, c], |i| dhp.data()[i] * ep.data()[i]);
    let (dp, _, _) = nn::dense_backward(p, &wp, &dzp)?;
    Ok(dp)
}

/// Which loss trains the classifier.
#[derive(Debug, Clone)]
pub enum LossKind {
    CrossEntropy,
    MeanSquaredError,
    Mln(MlnGenome),
}

impl LossKind {
    /// Scalar loss for a batch.
    pub fn loss(&self, p: &Tensor, y: &Tensor) -> Result<f64> {
        match self {
            LossKind::CrossEntropy => ce_loss(p, y),
            LossKind::MeanSquaredError => mse_loss(p, y),
            LossKind::Mln(g) => mln_forward(g, p, y),
        }
    }

    /// Gradient of the loss w.r.t. the probability input ŷ.
    pub fn grad(&self, p: &Tensor, y: &Tensor) -> Result<Tensor> {
        match self {
            LossKind::CrossEntropy => ce_grad(p, y),
            LossKind::MeanSquaredError => mse_grad(p, y),
            LossKind::Mln(g) => mln_input_grad(g, p, y),
        }
    }

    /// Human-readable name used in CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "ce",
            LossKind::MeanSquaredError => "mse",
            LossKind::Mln(_) => "mln",
        }
    }
}

/// Fresh genome for the initial population, keyed by candidate index.
pub fn genome_init(arch: MlnArch, master_seed: u64, candidate: u64) -> MlnGenome {
    let mut rng = stream(master_seed, Lane::new(Purpose::GenomeInit, 0, candidate));
    MlnGenome::init(arch, &mut rng)
}
