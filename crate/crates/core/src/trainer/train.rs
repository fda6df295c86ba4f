//! The alternating training loop.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::gcn::{multi_label_loss_grad, softmax_cross_entropy, Dropout};
use crate::graph::{DataSplit, MultiLabelGraph};
use crate::matrix::DenseMatrix;

use super::config::TrainConfig;
use super::model::{
    backward, forward_label_gcn, forward_node_gcn, init_model, inject_label_features,
    inject_node_features, Gradients, ModelState, NetworkForward, Operators,
};
use super::optim::Optimizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub label_loss: f64,
    pub node_loss: f64,
    pub loss: f64,
    pub val_micro_f1: f64,
    pub injected_labels: bool,
    pub injected_nodes: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// CSV without wall-clock columns, so reruns are byte-identical.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,label_loss,node_loss,loss,val_micro_f1,injected_labels,injected_nodes")?;
        for e in &self.epochs {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                e.epoch,
                e.label_loss,
                e.node_loss,
                e.loss,
                e.val_micro_f1,
                u8::from(e.injected_labels),
                u8::from(e.injected_nodes)
            )?;
        }
        Ok(())
    }

    pub fn write_timing_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,seconds")?;
        for e in &self.epochs {
            writeln!(w, "{},{}", e.epoch, e.seconds)?;
        }
        Ok(())
    }
}

/// One evaluation of the collective objective.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub label_loss: f64,
    pub node_loss: f64,
    pub grads: Gradients,
    pub label_forward: Option<NetworkForward>,
    pub node_forward: NetworkForward,
}

impl ObjectiveEval {
    pub fn loss(&self) -> f64 {
        self.label_loss + self.node_loss
    }
}

/// Forward both networks, score `L = L₁ + L₂` on the labelled nodes and
/// backpropagate.
pub fn collective_objective<R: Rng + ?Sized>(
    model: &ModelState,
    graph: &MultiLabelGraph,
    ops: &Operators,
    config: &TrainConfig,
    labelled: &[usize],
    dropout: &mut Dropout<'_, R>,
) -> Result<ObjectiveEval> {
    let variant = config.variant;
    let (label_forward, label_loss, label_up) = if variant.uses_label_network() {
        let fwd = forward_label_gcn(model, graph, ops, dropout)?;
        let targets = DenseMatrix::identity(graph.label_count());
        let (loss, up) = softmax_cross_entropy(&fwd.logits, &targets);
        (Some(fwd), loss, Some(up))
    } else {
        (None, 0.0, None)
    };
    let node_forward = forward_node_gcn(model, graph, ops, variant, dropout)?;
    let (node_loss, node_up) = multi_label_loss_grad(&node_forward.logits, &graph.label_matrix(), labelled)?;
    let label_pair = label_forward.as_ref().zip(label_up.as_ref());
    let grads = backward(model, ops, variant, label_pair, Some((&node_forward, &node_up)))?;
    Ok(ObjectiveEval {
        label_loss,
        node_loss,
        grads,
        label_forward,
        node_forward,
    })
}

/// Node logits with dropout disabled.
pub fn node_scores(
    model: &ModelState,
    graph: &MultiLabelGraph,
    ops: &Operators,
    config: &TrainConfig,
) -> Result<DenseMatrix> {
    let mut rng = model.rng.clone();
    let mut eval = Dropout {
        p: 0.0,
        training: false,
        rng: &mut rng,
    };
    Ok(forward_node_gcn(model, graph, ops, config.variant, &mut eval)?.logits)
}

/// Step-wise driver for one run.
pub struct Trainer<'g> {
    graph: &'g MultiLabelGraph,
    split: DataSplit,
    config: TrainConfig,
    ops: Operators,
    model: ModelState,
    optimizer: Optimizer,
    history: TrainHistory,
    truth: DenseMatrix,
}

impl<'g> Trainer<'g> {
    pub fn new(graph: &'g MultiLabelGraph, split: DataSplit, config: TrainConfig) -> Result<Self> {
        let model = init_model(graph, &config);
        let optimizer = Optimizer::new(&config, &model.params);
        Self::resume(graph, split, config, model, optimizer, TrainHistory::default())
    }

    /// Continues a run from saved state; `history.len()` is the next epoch.
    pub fn resume(
        graph: &'g MultiLabelGraph,
        split: DataSplit,
        config: TrainConfig,
        model: ModelState,
        optimizer: Optimizer,
        history: TrainHistory,
    ) -> Result<Self> {
        config.validate()?;
        if split.train.is_empty() {
            return Err(Error::EmptyMask);
        }
        if !split.is_partition(graph.node_count()) {
            return Err(Error::Split("split does not partition the graph's nodes".into()));
        }
        let ops = Operators::build(graph, &split, &config)?;
        Ok(Self {
            truth: graph.label_matrix(),
            graph,
            split,
            config,
            ops,
            model,
            optimizer,
            history,
        })
    }

    pub fn epoch(&self) -> usize {
        self.history.len()
    }

    pub fn is_done(&self) -> bool {
        self.epoch() >= self.config.epochs
    }

    pub fn model(&self) -> &ModelState {
        &self.model
    }

    pub fn operators(&self) -> &Operators {
        &self.ops
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn step(&mut self) -> Result<&EpochRecord> {
        let epoch = self.epoch();
        let started = Instant::now();
        let mut rng = self.model.rng.clone();
        let eval = {
            let mut drop = Dropout {
                p: self.config.dropout,
                training: true,
                rng: &mut rng,
            };
            collective_objective(
                &self.model,
                self.graph,
                &self.ops,
                &self.config,
                &self.split.train,
                &mut drop,
            )?
        };
        self.model.rng = rng;
        if !eval.loss().is_finite() {
            return Err(Error::Diverged { epoch });
        }

        let inject_labels = self.config.injection_fires(epoch, self.config.update_freq_labels);
        let inject_nodes = self.config.injection_fires(epoch, self.config.update_freq_nodes);
        if inject_labels {
            if let Some(fwd) = &eval.label_forward {
                inject_label_features(&mut self.model, &fwd.logits)?;
            }
        }
        if inject_nodes {
            inject_node_features(&mut self.model, &eval.node_forward.logits)?;
        }

        self.optimizer
            .step(&mut self.model.params, &eval.grads)
            .map_err(|e| match e {
                Error::NonFiniteGradient(_) => Error::Diverged { epoch },
                other => other,
            })?;

        let val_micro_f1 = if self.split.val.is_empty() {
            f64::NAN
        } else {
            let scores = node_scores(&self.model, self.graph, &self.ops, &self.config)?;
            evaluate(&scores, &self.truth, &self.split.val, self.config.rule)?.micro_f1
        };
        self.history.epochs.push(EpochRecord {
            epoch,
            label_loss: eval.label_loss,
            node_loss: eval.node_loss,
            loss: eval.label_loss + eval.node_loss,
            val_micro_f1,
            injected_labels: inject_labels && self.config.variant.uses_label_network(),
            injected_nodes: inject_nodes,
            seconds: started.elapsed().as_secs_f64(),
        });
        Ok(self.history.epochs.last().unwrap())
    }

    pub fn finish(self) -> Result<TrainOutcome> {
        let embeddings = node_scores(&self.model, self.graph, &self.ops, &self.config)?;
        Ok(TrainOutcome {
            model: self.model,
            optimizer: self.optimizer,
            history: self.history,
            embeddings,
            split: self.split,
            config: self.config,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelState,
    pub optimizer: Optimizer,
    pub history: TrainHistory,
    /// Final node logits (eval mode), one `m`-vector per node.
    pub embeddings: DenseMatrix,
    pub split: DataSplit,
    pub config: TrainConfig,
}

/// Runs all configured epochs.
pub fn train(graph: &MultiLabelGraph, split: &DataSplit, config: &TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(graph, split.clone(), config.clone())?;
    while !trainer.is_done() {
        trainer.step()?;
    }
    trainer.finish()
}
