//! Dataset ingestion (IDX image/label pairs, CIFAR-10 binary batches), a
//! synthetic Gaussian-blob task generator for fast deterministic tests,
//! and the episodic sampler that cuts a dataset into small-train /
//! large-validation episodes.
//!
//! Datasets are immutable after load and shared across parallel workers;
//! episode sampling is a pure function of (dataset, seed, lane).

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DataError, Result};
use crate::rng::{stream, Lane, Purpose};
use crate::tensor::Tensor;

/// Samples per class produced by [`synth_task`].
pub const SYNTH_PER_CLASS: usize = 200;

/// Which side of the meta-split a dataset feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    MetaTrain,
    MetaTest,
}

impl Split {
    fn lane_index(self) -> u64 {
        match self {
            Split::MetaTrain => 0,
            Split::MetaTest => 1,
        }
    }
}

/// A labeled image collection: flattened rows scaled to [0,1].
#[derive(Debug, Clone)]
pub struct Dataset {
    images: Tensor,
    labels: Vec<usize>,
    class_count: usize,
    split: Split,
}

impl Dataset {
    fn new(images: Tensor, labels: Vec<usize>, class_count: usize, split: Split) -> Self {
        debug_assert_eq!(images.rows(), labels.len());
        debug_assert!(labels.iter().all(|&l| l < class_count));
        Self {
            images,
            labels,
            class_count,
            split,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.images.cols()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// One sampled task: a small balanced training set and a large balanced
/// validation set, drawn disjointly from one dataset.
#[derive(Debug, Clone)]
pub struct Episode {
    pub train_x: Tensor,
    pub train_y: Tensor,
    pub val_x: Tensor,
    pub val_y: Tensor,
}

/// One-hot encodes integer labels into a `[N, class_count]` matrix.
pub fn one_hot(labels: &[usize], class_count: usize) -> Tensor {
    let mut t = Tensor::zeros(vec![labels.len(), class_count]);
    for (n, &c) in labels.iter().enumerate() {
        let idx = t.idx2(n, c);
        t.data_mut()[idx] = 1.0;
    }
    t
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(DataError::Truncated {
            path: path.display().to_string(),
            expected: end,
            found: bytes.len(),
        }
        .into());
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Loads an IDX image/label file pair (the FashionMNIST container format).
///
/// Big-endian headers: images carry magic `0x00000803` then count, rows,
/// cols and `count·rows·cols` pixel bytes; labels carry magic `0x00000801`
/// then count and `count` label bytes. Pixels are scaled by 1/255.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let img_bytes = fs::read(images_path).map_err(DataError::from)?;
    let magic = read_u32_be(&img_bytes, 0, images_path)?;
    if magic != 0x0000_0803 {
        return Err(DataError::WrongMagic {
            path: images_path.display().to_string(),
            expected: 0x0000_0803,
            found: magic,
        }
        .into());
    }
    let count = read_u32_be(&img_bytes, 4, images_path)? as usize;
    let rows = read_u32_be(&img_bytes, 8, images_path)? as usize;
    let cols = read_u32_be(&img_bytes, 12, images_path)? as usize;
    let expected = 16 + count * rows * cols;
    if img_bytes.len() < expected {
        return Err(DataError::Truncated {
            path: images_path.display().to_string(),
            expected,
            found: img_bytes.len(),
        }
        .into());
    }

    let lab_bytes = fs::read(labels_path).map_err(DataError::from)?;
    let magic = read_u32_be(&lab_bytes, 0, labels_path)?;
    if magic != 0x0000_0801 {
        return Err(DataError::WrongMagic {
            path: labels_path.display().to_string(),
            expected: 0x0000_0801,
            found: magic,
        }
        .into());
    }
    let lab_count = read_u32_be(&lab_bytes, 4, labels_path)? as usize;
    let lab_expected = 8 + lab_count;
    if lab_bytes.len() < lab_expected {
        return Err(DataError::Truncated {
            path: labels_path.display().to_string(),
            expected: lab_expected,
            found: lab_bytes.len(),
        }
        .into());
    }
    if count != lab_count {
        return Err(DataError::CountMismatch {
            images: count,
            labels: lab_count,
        }
        .into());
    }

    let dim = rows * cols;
    let pixels: Vec<f64> = img_bytes[16..16 + count * dim]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    let labels: Vec<usize> = lab_bytes[8..8 + count].iter().map(|&b| b as usize).collect();
    let class_count = labels.iter().copied().max().map_or(0, |m| m + 1);
    Ok(Dataset::new(
        Tensor::new(vec![count, dim], pixels)?,
        labels,
        class_count,
        split,
    ))
}

/// Loads CIFAR-10 binary batches: each 3073-byte record is one label byte
/// (0–9) followed by 3072 pixel bytes (R, G, B planes, row-major 32×32).
pub fn load_cifar10(batch_paths: &[impl AsRef<Path>], split: Split) -> Result<Dataset> {
    const RECORD: usize = 3073;
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for p in batch_paths {
        let path = p.as_ref();
        let bytes = fs::read(path).map_err(DataError::from)?;
        if bytes.len() % RECORD != 0 {
            return Err(DataError::BadRecordLength {
                path: path.display().to_string(),
                len: bytes.len(),
                record: RECORD,
            }
            .into());
        }
        for (r, rec) in bytes.chunks_exact(RECORD).enumerate() {
            let label = rec[0] as usize;
            if label >= 10 {
                return Err(DataError::BadLabel {
                    path: path.display().to_string(),
                    record: r,
                    label: rec[0],
                }
                .into());
            }
            labels.push(label);
            pixels.extend(rec[1..].iter().map(|&b| f64::from(b) / 255.0));
        }
    }
    let n = labels.len();
    Ok(Dataset::new(
        Tensor::new(vec![n, 3072], pixels)?,
        labels,
        10,
        split,
    ))
}

/// Generates a synthetic classification task: `class_count` Gaussian blobs
/// in `dim` dimensions.
///
/// Class means are drawn once per seed from U(−1,1); samples add isotropic
/// noise with standard deviation `√spread` and are squashed into [0,1] by
/// the fixed affine clamp `clamp(0.25·x + 0.5, 0, 1)`. The two meta-splits
/// share means (same task family) but draw independent noise, standing in
/// for the train/test split of a real dataset.
pub fn synth_task(
    seed: u64,
    class_count: usize,
    dim: usize,
    spread: f64,
    split: Split,
) -> Dataset {
    let mut means_rng = stream(seed, Lane::new(Purpose::SynthMeans, 0, 0));
    let mut means = vec![0.0; class_count * dim];
    for v in &mut means {
        *v = means_rng.random_range(-1.0..1.0);
    }

    let mut noise_rng = stream(seed, Lane::new(Purpose::SynthNoise, split.lane_index(), 0));
    let std = spread.sqrt();
    let n = class_count * SYNTH_PER_CLASS;
    let mut pixels = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for c in 0..class_count {
        for _ in 0..SYNTH_PER_CLASS {
            for d in 0..dim {
                let z: f64 = StandardNormal.sample(&mut noise_rng);
                let raw = means[c * dim + d] + std * z;
                pixels.push((0.25 * raw + 0.5).clamp(0.0, 1.0));
            }
            labels.push(c);
        }
    }
    Dataset::new(
        Tensor::new(vec![n, dim], pixels).expect("synth dimensions are consistent"),
        labels,
        class_count,
        split,
    )
}

/// Draws one class-balanced episode: `n_train_per_class` training and
/// `n_val_per_class` validation examples per class, disjoint within the
/// dataset, deterministic per (master_seed, lane).
pub fn sample_episode(
    ds: &Dataset,
    n_train_per_class: usize,
    n_val_per_class: usize,
    master_seed: u64,
    lane: Lane,
) -> Result<Episode> {
    let mut rng = stream(master_seed, lane);
    let c = ds.class_count();
    let d = ds.feature_dim();
    let needed = n_train_per_class + n_val_per_class;

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &l) in ds.labels().iter().enumerate() {
        by_class[l].push(i);
    }

    let mut tr_idx = Vec::with_capacity(c * n_train_per_class);
    let mut va_idx = Vec::with_capacity(c * n_val_per_class);
    for (cls, idx) in by_class.iter_mut().enumerate() {
        if idx.len() < needed {
            return Err(DataError::InsufficientClassSamples {
                class: cls,
                available: idx.len(),
                needed,
            }
            .into());
        }
        idx.shuffle(&mut rng);
        tr_idx.extend_from_slice(&idx[..n_train_per_class]);
        va_idx.extend_from_slice(&idx[n_train_per_class..needed]);
    }

    let gather = |rows: &[usize]| -> Tensor {
        let mut t = Tensor::zeros(vec![rows.len(), d]);
        for (out, &src) in rows.iter().enumerate() {
            let o = t.idx2(out, 0);
            t.data_mut()[o..o + d].copy_from_slice(ds.images().row(src));
        }
        t
    };
    let labels_of = |rows: &[usize]| -> Vec<usize> { rows.iter().map(|&i| ds.labels()[i]).collect() };

    Ok(Episode {
        train_x: gather(&tr_idx),
        train_y: one_hot(&labels_of(&tr_idx), c),
        val_x: gather(&va_idx),
        val_y: one_hot(&labels_of(&va_idx), c),
    })
}
