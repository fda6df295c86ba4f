use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::DecisionRule;
use crate::graph::FeatureInit;

/// Model family being trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Variant {
    /// Both networks, label graph with node attributes.
    #[default]
    Full,
    /// Label graph built from co-occurrence only (no node attributes).
    Node,
    /// One-layer node network.
    OneNode,
    /// Two-layer label network.
    TwoLabel,
    /// Plain two-layer GCN over the node graph; no label network, no injection.
    GcnBaseline,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Self::Full,
        Self::Node,
        Self::OneNode,
        Self::TwoLabel,
        Self::GcnBaseline,
    ];

    /// `(node layers, label layers)` this variant prescribes.
    pub fn default_layers(self) -> (usize, usize) {
        match self {
            Self::OneNode => (1, 1),
            Self::TwoLabel => (2, 2),
            _ => (2, 1),
        }
    }

    pub fn uses_label_network(self) -> bool {
        self != Self::GcnBaseline
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Node => "node",
            Self::OneNode => "1n",
            Self::TwoLabel => "2l",
            Self::GcnBaseline => "gcn_baseline",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum OptimizerKind {
    #[default]
    Gd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(Self::Gd),
            "adam" => Ok(Self::Adam),
            _ => Err(Error::Config(format!("unknown optimizer {s:?}"))),
        }
    }
}

/// Which label memberships are wired into the composite graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LabelExposure {
    /// Only training nodes are linked to their labels.
    #[default]
    TrainOnly,
    /// Every node is linked to its labels (leaks test labels into the graph).
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub hidden_dim: usize,
    pub train_ratio: f64,
    /// `N`: period of node-feature injection into the label graph.
    pub update_freq_nodes: usize,
    /// `M`: period of label-feature injection into the node graph.
    pub update_freq_labels: usize,
    pub dropout: f64,
    pub weight_decay: f64,
    pub node_layers: usize,
    pub label_layers: usize,
    pub variant: Variant,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub features: FeatureInit,
    pub binary_cooccurrence: bool,
    pub skip_epoch0_injection: bool,
    pub label_exposure: LabelExposure,
    /// Decision rule for the per-epoch validation F1.
    pub rule: DecisionRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.02,
            epochs: 300,
            hidden_dim: 400,
            train_ratio: 0.2,
            update_freq_nodes: 50,
            update_freq_labels: 50,
            dropout: 0.5,
            weight_decay: 0.0,
            node_layers: 2,
            label_layers: 1,
            variant: Variant::Full,
            seed: 0,
            optimizer: OptimizerKind::Gd,
            features: FeatureInit::OneHot,
            binary_cooccurrence: false,
            skip_epoch0_injection: false,
            label_exposure: LabelExposure::TrainOnly,
            rule: DecisionRule::TopKTrue,
        }
    }
}

impl TrainConfig {
    /// Defaults with the variant's layer counts.
    pub fn for_variant(variant: Variant) -> Self {
        let (node_layers, label_layers) = variant.default_layers();
        Self {
            variant,
            node_layers,
            label_layers,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        // zero is accepted: it freezes the weights
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate must be nonnegative, got {}", self.learning_rate));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return fail(format!("train ratio must lie in (0,1), got {}", self.train_ratio));
        }
        if self.update_freq_nodes == 0 || self.update_freq_labels == 0 {
            return fail("update frequencies must be at least 1".into());
        }
        for (name, l) in [("node", self.node_layers), ("label", self.label_layers)] {
            if !(1..=2).contains(&l) {
                return fail(format!("{name} layers must be 1 or 2, got {l}"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must lie in [0,1), got {}", self.dropout));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail(format!("weight decay must be nonnegative, got {}", self.weight_decay));
        }
        if self.hidden_dim == 0 {
            return fail("hidden dimension must be positive".into());
        }
        if self.epochs == 0 {
            return fail("need at least one epoch".into());
        }
        Ok(())
    }

    /// Whether an injection with the given period fires at `epoch`. A period
    /// longer than the run disables injection altogether.
    pub fn injection_fires(&self, epoch: usize, period: usize) -> bool {
        self.variant.uses_label_network()
            && period <= self.epochs
            && epoch.is_multiple_of(period)
            && !(self.skip_epoch0_injection && epoch == 0)
    }

    /// One-line summary of the main hyperparameters.
    pub fn summary(&self) -> String {
        format!(
            "lr={} epochs={} d_h={} alpha={} N={} M={} dropout={} decay={} variant={} node_layers={} label_layers={} seed={}",
            self.learning_rate,
            self.epochs,
            self.hidden_dim,
            self.train_ratio,
            self.update_freq_nodes,
            self.update_freq_labels,
            self.dropout,
            self.weight_decay,
            self.variant,
            self.node_layers,
            self.label_layers,
            self.seed,
        )
    }
}
