//! Multi-label node classification with two coupled graph convolutional
//! networks: one over a label-label-node graph that learns label
//! representations, one over a node-node-label graph that learns node
//! representations, joined by a shared objective and periodic feature
//! injection.
//!
//! The crate is organised bottom-up: [`matrix`] and [`graph`] hold the value
//! types, [`ingestion`] reads datasets, [`builder`] constructs the stratified
//! graphs and their operators, [`gcn`] has the numerical kernels, [`trainer`]
//! runs the alternating optimisation and [`eval`] scores predictions.

pub mod builder;
pub mod error;
pub mod eval;
pub mod features;
pub mod gcn;
pub mod graph;
pub mod ingestion;
pub mod matrix;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use eval::{DecisionRule, EvaluationReport};
pub use features::{FeatureBlock, StackedFeatures};
pub use graph::{validate_graph, DataSplit, FeatureInit, MultiLabelGraph, Violation};
pub use ingestion::{DatasetStats, SyntheticConfig};
pub use matrix::{DenseMatrix, SparseMatrix};
pub use trainer::{TrainConfig, TrainOutcome, Variant};
