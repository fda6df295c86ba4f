//! Alternating training of the label and node networks.

mod checkpoint;
mod config;
mod model;
mod optim;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{LabelExposure, OptimizerKind, TrainConfig, Variant};
pub use model::{
    backward, forward_label_gcn, forward_node_gcn, init_model, inject_label_features,
    inject_node_features, Gradients, ModelState, NetworkForward, Operators, ParamKey, Params,
};
pub use optim::{sgd_step, AdamState, Optimizer};
pub use train::{
    collective_objective, node_scores, train, EpochRecord, ObjectiveEval, TrainHistory,
    TrainOutcome, Trainer,
};
