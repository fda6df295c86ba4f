use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("feature offset out of range: offset {offset} + rows {total} > dim {dim}")]
    FeatureOffset {
        total: usize,
        dim: usize,
        offset: usize,
    },

    #[error("cannot keep {keep} rows of a matrix with {rows} rows")]
    Truncate { keep: usize, rows: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: nonpositive edge weight {weight}")]
    NonpositiveWeight { line: usize, weight: f64 },

    #[error("no labels")]
    NoLabels,

    #[error("no labeled nodes")]
    EmptyMask,

    #[error("empty node subset")]
    EmptySubset,

    #[error("invalid split: {0}")]
    Split(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("top-k rule needs ground truth label counts")]
    MissingTruth,

    #[error("missing forward cache for {0}")]
    MissingCache(&'static str),

    #[error("diverged: non-finite gradient for {0}")]
    NonFiniteGradient(&'static str),

    #[error("diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("dataset fingerprint mismatch: checkpoint has {expected}, dataset has {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}
