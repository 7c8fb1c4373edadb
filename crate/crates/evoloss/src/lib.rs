//! Evolving a loss function instead of hand-picking one.
//!
//! A small parametrized network — the meta-loss network (MLN) — maps a
//! classifier's predicted class probabilities and the one-hot labels to a
//! scalar training loss. Because the mapping is differentiable, an
//! ordinary MLP classifier can be trained through it by SGD; because the
//! mapping is compact (301 parameters at the default shape), a (μ+λ)
//! evolution strategy can search for parameter vectors whose induced loss
//! makes freshly initialized classifiers reach high validation precision
//! in very few steps on small episodes.
//!
//! The crate is organized in layers:
//!
//! * [`tensor`], [`nn`] — dense row-major `f64` tensors and the handful
//!   of differentiable ops everything is built from (dense, 1-D conv,
//!   ReLU/ELU, softmax, finite-difference checking).
//! * [`loss`] — cross-entropy, mean squared error, and the MLN with its
//!   flat genome encoding.
//! * [`episodes`] — dataset ingestion (IDX, CIFAR-10 binary), a synthetic
//!   Gaussian-blob task, and the balanced episodic sampler.
//! * [`classifier`] — the 3-layer MLP inner loop: N steps of full-batch
//!   SGD through any loss, then validation precision.
//! * [`evolve`] — the outer (μ+λ) self-adaptive evolution strategy.
//! * [`rng`], [`exec`] — counter-based RNG lanes and the indexed
//!   parallel map; together they make every run reproducible bit-for-bit
//!   at any parallelism degree.
//!
//! Determinism is the backbone: every random decision draws from a
//! ChaCha stream keyed by (master seed, purpose, episode, worker), so
//! results never depend on thread scheduling or evaluation order.

pub mod classifier;
pub mod episodes;
pub mod error;
pub mod evolve;
pub mod exec;
pub mod loss;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use classifier::{precision, train_inner, train_step, Classifier, TrainRecord};
pub use episodes::{
    load_cifar10, load_idx, one_hot, sample_episode, synth_task, Dataset, Episode, Split,
};
pub use error::{DataError, Error, Result};
pub use evolve::{
    evaluate_population, evolve, make_kids, select, Candidate, EvoConfig, EvolveOutcome,
    RunHistory, TaskSource,
};
pub use loss::{
    ce_grad, ce_loss, genome_init, mln_forward, mln_input_grad, mse_grad, mse_loss, LossKind,
    MlnArch, MlnGenome,
};
pub use rng::{stream, Lane, Purpose};
pub use tensor::Tensor;
