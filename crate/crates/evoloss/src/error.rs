//! Error types shared across the library.
//!
//! Dataset file problems get their own enum with one variant per failure
//! mode so callers (and tests) can tell a wrong magic number from a
//! truncated payload. Inner-loop divergence is deliberately a *recoverable*
//! variant: evolution has to evaluate arbitrary genomes, and a genome whose
//! loss explodes is selected against, not a crash.

use thiserror::Error;

/// Errors raised while reading dataset files.
#[derive(Debug, Error)]
pub enum DataError {
    /// IDX header magic did not match the expected constant.
    #[error("wrong magic number in {path}: expected {expected:#010x}, found {found:#010x}")]
    WrongMagic {
        path: String,
        expected: u32,
        found: u32,
    },

    /// File ended before the payload announced in its header.
    #[error("truncated file {path}: expected {expected} bytes of payload, found {found}")]
    Truncated {
        path: String,
        expected: usize,
        found: usize,
    },

    /// Image and label files disagree about the sample count.
    #[error("count mismatch: images file declares {images}, labels file declares {labels}")]
    CountMismatch { images: usize, labels: usize },

    /// CIFAR-10 batch length is not a multiple of the record size.
    #[error("bad record length in {path}: {len} bytes is not a multiple of {record}")]
    BadRecordLength {
        path: String,
        len: usize,
        record: usize,
    },

    /// CIFAR-10 label byte outside 0..=9.
    #[error("bad label {label} in {path} at record {record}")]
    BadLabel {
        path: String,
        record: usize,
        label: u8,
    },

    /// A class has fewer samples than an episode needs.
    #[error("class {class} has {available} samples, episode needs {needed}")]
    InsufficientClassSamples {
        class: usize,
        available: usize,
        needed: usize,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or layer shapes do not conform.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A configuration value is out of its valid domain.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An input value violates an operation's precondition.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Inner-loop training produced a non-finite loss or gradient.
    /// Carries the step at which training blew up; evolution maps
    /// this to fitness 0 rather than aborting the run.
    #[error("training diverged at step {step}")]
    Diverged { step: usize },

    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T> = std::result::Result<T, Error>;
