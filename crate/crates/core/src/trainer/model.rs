//! Model parameters, the two forward networks, their joint backward pass
//! and the feature injections that couple them.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::builder::{
    binarize, build_label_cooccurrence, build_label_label_node_adj, build_label_only_adj,
    build_node_node_label_adj, NormalizedOperator,
};
use crate::error::{Error, Result};
use crate::features::{FeatureBlock, StackedFeatures};
use crate::gcn::{gcn_layer_backward, gcn_layer_forward, Activation, Dropout, LayerCache, LayerInput};
use crate::graph::{DataSplit, MultiLabelGraph};
use crate::matrix::{DenseMatrix, SparseMatrix};
use crate::rng::{self, Stream};

use super::config::{LabelExposure, TrainConfig, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKey {
    LabelW0,
    LabelW1,
    NodeW0,
    NodeW1,
}

impl ParamKey {
    pub fn name(self) -> &'static str {
        match self {
            Self::LabelW0 => "label_w0",
            Self::LabelW1 => "label_w1",
            Self::NodeW0 => "node_w0",
            Self::NodeW1 => "node_w1",
        }
    }
}

/// Trainable weights. The second-layer matrices exist only for two-layer
/// networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub label_w0: DenseMatrix,
    pub label_w1: Option<DenseMatrix>,
    pub node_w0: DenseMatrix,
    pub node_w1: Option<DenseMatrix>,
}

/// Gradients share the parameter layout.
pub type Gradients = Params;

impl Params {
    pub fn iter(&self) -> impl Iterator<Item = (ParamKey, &DenseMatrix)> {
        [
            (ParamKey::LabelW0, Some(&self.label_w0)),
            (ParamKey::LabelW1, self.label_w1.as_ref()),
            (ParamKey::NodeW0, Some(&self.node_w0)),
            (ParamKey::NodeW1, self.node_w1.as_ref()),
        ]
        .into_iter()
        .filter_map(|(k, m)| m.map(|m| (k, m)))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamKey, &mut DenseMatrix)> {
        [
            (ParamKey::LabelW0, Some(&mut self.label_w0)),
            (ParamKey::LabelW1, self.label_w1.as_mut()),
            (ParamKey::NodeW0, Some(&mut self.node_w0)),
            (ParamKey::NodeW1, self.node_w1.as_mut()),
        ]
        .into_iter()
        .filter_map(|(k, m)| m.map(|m| (k, m)))
    }

    pub fn get(&self, key: ParamKey) -> Option<&DenseMatrix> {
        match key {
            ParamKey::LabelW0 => Some(&self.label_w0),
            ParamKey::LabelW1 => self.label_w1.as_ref(),
            ParamKey::NodeW0 => Some(&self.node_w0),
            ParamKey::NodeW1 => self.node_w1.as_ref(),
        }
    }

    pub fn get_mut(&mut self, key: ParamKey) -> Option<&mut DenseMatrix> {
        match key {
            ParamKey::LabelW0 => Some(&mut self.label_w0),
            ParamKey::LabelW1 => self.label_w1.as_mut(),
            ParamKey::NodeW0 => Some(&mut self.node_w0),
            ParamKey::NodeW1 => self.node_w1.as_mut(),
        }
    }

    /// Same layout, all zeros.
    pub fn zeros_like(&self) -> Self {
        let z = |m: &DenseMatrix| DenseMatrix::zeros(m.rows(), m.cols());
        Self {
            label_w0: z(&self.label_w0),
            label_w1: self.label_w1.as_ref().map(z),
            node_w0: z(&self.node_w0),
            node_w1: self.node_w1.as_ref().map(z),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, m) in self.iter_mut() {
            m.scale(s);
        }
    }
}

/// Everything a training run mutates or carries between epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub params: Params,
    /// `Wᵛ` (`m×d_i`): maps node logits to injected node features. Frozen.
    pub node_projection: DenseMatrix,
    /// `Wˡ` (`m×d_i`): maps label logits to injected label features. Frozen.
    pub label_projection: DenseMatrix,
    /// Node block of the label network's input, `X` until first injection.
    pub injected_nodes: FeatureBlock,
    /// Label block of the node network's input, `Y` until first injection.
    pub injected_labels: FeatureBlock,
    /// Dropout stream.
    pub rng: ChaCha8Rng,
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let r = (6.0 / (rows + cols) as f64).sqrt();
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-r..=r))
}

/// Glorot-uniform weights and projections from the config seed.
pub fn init_model(graph: &MultiLabelGraph, config: &TrainConfig) -> ModelState {
    let d_in = graph.feature_dim();
    let d_h = config.hidden_dim;
    let m = graph.label_count();
    let mut rng = rng::stream(config.seed, Stream::Init);
    let (label_w0, label_w1) = if config.label_layers == 2 {
        (glorot(d_in, d_h, &mut rng), Some(glorot(d_h, m, &mut rng)))
    } else {
        (glorot(d_in, m, &mut rng), None)
    };
    let (node_w0, node_w1) = if config.node_layers == 2 {
        (glorot(d_in, d_h, &mut rng), Some(glorot(d_h, m, &mut rng)))
    } else {
        (glorot(d_in, m, &mut rng), None)
    };
    let node_projection = glorot(m, d_in, &mut rng);
    let label_projection = glorot(m, d_in, &mut rng);
    ModelState {
        params: Params {
            label_w0,
            label_w1,
            node_w0,
            node_w1,
        },
        node_projection,
        label_projection,
        injected_nodes: graph.node_features().clone(),
        injected_labels: graph.label_features().clone(),
        rng: rng::stream(config.seed, Stream::Dropout),
    }
}

/// Propagation operators for both networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operators {
    /// Truncated `F̃*` (`m×(m+n)`) and `C̃`.
    pub label: NormalizedOperator,
    /// Truncated `Ẽ*` (`n×(n+m)`) and `Ã`.
    pub node: NormalizedOperator,
}

impl Operators {
    /// Builds both operators. Under [`LabelExposure::TrainOnly`] only the
    /// training nodes' memberships enter the composite graphs and `C`.
    pub fn build(graph: &MultiLabelGraph, split: &DataSplit, config: &TrainConfig) -> Result<Self> {
        let b = match config.label_exposure {
            LabelExposure::All => graph.labels().clone(),
            LabelExposure::TrainOnly => {
                let mask = split.train_mask();
                graph.labels().mask_rows(|i| mask[i])
            }
        };
        Self::from_memberships(graph.adjacency(), &b, config)
    }

    pub fn from_memberships(a: &SparseMatrix, b: &SparseMatrix, config: &TrainConfig) -> Result<Self> {
        let mut c = build_label_cooccurrence(b);
        if config.binary_cooccurrence {
            c = binarize(&c);
        }
        let f = match config.variant {
            Variant::Node => build_label_only_adj(&c, b.rows()),
            _ => build_label_label_node_adj(&c, b),
        };
        let e = build_node_node_label_adj(a, b);
        Ok(Self {
            label: NormalizedOperator::from_composite(&f, &c)?,
            node: NormalizedOperator::from_composite(&e, a)?,
        })
    }
}

/// Logits of one network plus per-layer caches.
#[derive(Debug, Clone)]
pub struct NetworkForward {
    pub logits: DenseMatrix,
    pub caches: Vec<LayerCache>,
}

fn run_layers<R: Rng + ?Sized>(
    layers: &[(&SparseMatrix, &DenseMatrix)],
    features: StackedFeatures,
    dropout: &mut Dropout<'_, R>,
) -> Result<NetworkForward> {
    let mut input = LayerInput::Features(features);
    let mut caches = Vec::with_capacity(layers.len());
    let last = layers.len() - 1;
    for (k, &(op, w)) in layers.iter().enumerate() {
        let act = if k == last {
            Activation::Identity
        } else {
            Activation::Relu
        };
        let (out, cache) = gcn_layer_forward(op, input, w, act, dropout)?;
        caches.push(cache);
        input = LayerInput::Hidden(out);
    }
    let LayerInput::Hidden(logits) = input else {
        unreachable!("at least one layer")
    };
    Ok(NetworkForward { logits, caches })
}

fn label_layers<'a>(model: &'a ModelState, ops: &'a Operators) -> Vec<(&'a SparseMatrix, &'a DenseMatrix)> {
    let mut layers = vec![(&ops.label.truncated, &model.params.label_w0)];
    if let Some(w1) = &model.params.label_w1 {
        layers.push((&ops.label.intra, w1));
    }
    layers
}

fn node_layers<'a>(
    model: &'a ModelState,
    ops: &'a Operators,
    variant: Variant,
) -> Vec<(&'a SparseMatrix, &'a DenseMatrix)> {
    let first = if variant == Variant::GcnBaseline {
        &ops.node.intra
    } else {
        &ops.node.truncated
    };
    let mut layers = vec![(first, &model.params.node_w0)];
    if let Some(w1) = &model.params.node_w1 {
        layers.push((&ops.node.intra, w1));
    }
    layers
}

/// Label network: `F̃*·[Y; X_inj]·W₀ˡ`, or `C̃·ReLU(F̃*·[Y; X_inj]·W₀ˡ)·W₁ˡ`
/// with two layers. Returns `m×m` logits.
pub fn forward_label_gcn<R: Rng + ?Sized>(
    model: &ModelState,
    graph: &MultiLabelGraph,
    ops: &Operators,
    dropout: &mut Dropout<'_, R>,
) -> Result<NetworkForward> {
    let features = StackedFeatures::new(graph.label_features().clone(), model.injected_nodes.clone())?;
    run_layers(&label_layers(model, ops), features, dropout)
}

/// Node network: `Ã·ReLU(Ẽ*·[X; Y_inj]·W₀ᵛ)·W₁ᵛ`, or `Ẽ*·[X; Y_inj]·W₀ᵛ`
/// with one layer. The baseline replaces `Ẽ*·[X; Y_inj]` by `Ã·X`.
/// Returns `n×m` logits.
pub fn forward_node_gcn<R: Rng + ?Sized>(
    model: &ModelState,
    graph: &MultiLabelGraph,
    ops: &Operators,
    variant: Variant,
    dropout: &mut Dropout<'_, R>,
) -> Result<NetworkForward> {
    let bottom = if variant == Variant::GcnBaseline {
        FeatureBlock::Sparse(SparseMatrix::zeros(0, graph.feature_dim()))
    } else {
        model.injected_labels.clone()
    };
    let features = StackedFeatures::new(graph.node_features().clone(), bottom)?;
    run_layers(&node_layers(model, ops, variant), features, dropout)
}

fn network_backward(
    layers: &[(&SparseMatrix, &DenseMatrix)],
    forward: &NetworkForward,
    upstream: &DenseMatrix,
    name: &'static str,
) -> Result<Vec<DenseMatrix>> {
    if forward.caches.len() != layers.len() {
        return Err(Error::MissingCache(name));
    }
    let mut grads = vec![DenseMatrix::zeros(0, 0); layers.len()];
    let mut grad = upstream.clone();
    for k in (0..layers.len()).rev() {
        let (op, w) = layers[k];
        let (gw, gin) = gcn_layer_backward(op, w, &forward.caches[k], &grad)?;
        grads[k] = gw;
        if let Some(g) = gin {
            grad = g;
        }
    }
    Ok(grads)
}

/// Reverse-mode gradients of the collective loss. `label` and `node` pair a
/// forward pass with `∂L/∂logits` for that network. The label pair may be
/// omitted only for variants without a label network, in which case its
/// gradients are zero. Injected feature blocks are constants.
pub fn backward(
    model: &ModelState,
    ops: &Operators,
    variant: Variant,
    label: Option<(&NetworkForward, &DenseMatrix)>,
    node: Option<(&NetworkForward, &DenseMatrix)>,
) -> Result<Gradients> {
    let mut grads = model.params.zeros_like();
    match label {
        Some((fwd, up)) => {
            let g = network_backward(&label_layers(model, ops), fwd, up, "label network")?;
            let mut g = g.into_iter();
            grads.label_w0 = g.next().unwrap();
            if grads.label_w1.is_some() {
                grads.label_w1 = g.next();
            }
        }
        None if variant.uses_label_network() => return Err(Error::MissingCache("label network")),
        None => {}
    }
    let (fwd, up) = node.ok_or(Error::MissingCache("node network"))?;
    let mut g = network_backward(&node_layers(model, ops, variant), fwd, up, "node network")?.into_iter();
    grads.node_w0 = g.next().unwrap();
    if grads.node_w1.is_some() {
        grads.node_w1 = g.next();
    }
    Ok(grads)
}

/// `Y_inj = ReLU(O^l · Wˡ)`: label logits become the label block of the
/// node network's input.
pub fn inject_label_features(model: &mut ModelState, label_logits: &DenseMatrix) -> Result<()> {
    let y = label_logits.matmul(&model.label_projection)?.map(|v| v.max(0.0));
    model.injected_labels = FeatureBlock::Dense(y);
    Ok(())
}

/// `X_inj = ReLU(O^v · Wᵛ)`: node logits become the node block of the
/// label network's input.
pub fn inject_node_features(model: &mut ModelState, node_logits: &DenseMatrix) -> Result<()> {
    let x = node_logits.matmul(&model.node_projection)?.map(|v| v.max(0.0));
    model.injected_nodes = FeatureBlock::Dense(x);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FeatureInit;
    use crate::ingestion::{generate_synthetic, SyntheticConfig};

    fn small() -> (MultiLabelGraph, DataSplit, TrainConfig) {
        let g = generate_synthetic(
            &SyntheticConfig {
                community_size: 5,
                p_in: 0.6,
                p_out: 0.1,
                seed: 3,
                ..Default::default()
            },
            FeatureInit::OneHot,
        )
        .unwrap();
        let split = crate::eval::split_dataset(&g, 0.4, 1).unwrap();
        let cfg = TrainConfig {
            hidden_dim: 4,
            dropout: 0.0,
            ..Default::default()
        };
        (g, split, cfg)
    }

    fn eval_drop(rng: &mut ChaCha8Rng) -> Dropout<'_, ChaCha8Rng> {
        Dropout {
            p: 0.0,
            training: false,
            rng,
        }
    }

    #[test]
    fn init_is_deterministic_with_expected_shapes() {
        let (g, _, cfg) = small();
        let a = init_model(&g, &cfg);
        assert_eq!(a, init_model(&g, &cfg));
        let d_i = g.node_count() + g.label_count();
        assert_eq!(a.params.node_w0.shape(), (d_i, 4));
        assert_eq!(a.params.node_w1.as_ref().unwrap().shape(), (4, g.label_count()));
        assert_eq!(a.params.label_w0.shape(), (d_i, g.label_count()));
        assert!(a.params.label_w1.is_none());
        let keys: Vec<_> = a.params.iter().map(|(k, _)| k).collect();
        assert_eq!(keys, vec![ParamKey::LabelW0, ParamKey::NodeW0, ParamKey::NodeW1]);
        let other = init_model(&g, &TrainConfig { seed: 1, ..cfg });
        assert_ne!(a.params, other.params);
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let (g, split, cfg) = small();
        let ops = Operators::build(&g, &split, &cfg).unwrap();
        let mut model = init_model(&g, &cfg);
        model.params.scale(0.0);
        let mut rng = rng::stream(0, Stream::Dropout);
        let l = forward_label_gcn(&model, &g, &ops, &mut eval_drop(&mut rng)).unwrap();
        assert!(l.logits.as_slice().iter().all(|&v| v == 0.0));
        let n = forward_node_gcn(&model, &g, &ops, cfg.variant, &mut eval_drop(&mut rng)).unwrap();
        assert!(n.logits.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(n.logits.shape(), (g.node_count(), g.label_count()));
        assert_eq!(l.logits.shape(), (g.label_count(), g.label_count()));
    }

    #[test]
    fn label_forward_matches_dense_product() {
        let (g, split, cfg) = small();
        let ops = Operators::build(&g, &split, &cfg).unwrap();
        let model = init_model(&g, &cfg);
        let mut rng = rng::stream(0, Stream::Dropout);
        let out = forward_label_gcn(&model, &g, &ops, &mut eval_drop(&mut rng)).unwrap();
        let ystar = DenseMatrix::vstack(&g.label_features().to_dense(), &g.node_features().to_dense()).unwrap();
        let expect = ops
            .label
            .truncated
            .to_dense()
            .matmul(&ystar)
            .unwrap()
            .matmul(&model.params.label_w0)
            .unwrap();
        assert!(out.logits.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn two_label_layers_with_identity_second_weight() {
        let (g, split, _) = small();
        let m = g.label_count();
        let cfg = TrainConfig {
            hidden_dim: m,
            label_layers: 2,
            dropout: 0.0,
            ..Default::default()
        };
        let ops = Operators::build(&g, &split, &cfg).unwrap();
        let mut model = init_model(&g, &cfg);
        model.params.label_w1 = Some(DenseMatrix::identity(m));
        let mut rng = rng::stream(0, Stream::Dropout);
        let two = forward_label_gcn(&model, &g, &ops, &mut eval_drop(&mut rng)).unwrap();
        let first = two.caches[0].output.clone();
        let expect = ops.label.intra.mul_dense(&first).unwrap();
        assert!(two.logits.max_abs_diff(&expect) < 1e-15);
        assert!(first.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn one_layer_node_variant_skips_relu_and_intra() {
        let (g, split, _) = small();
        let cfg = TrainConfig {
            node_layers: 1,
            dropout: 0.0,
            variant: Variant::OneNode,
            ..Default::default()
        };
        let ops = Operators::build(&g, &split, &cfg).unwrap();
        let model = init_model(&g, &cfg);
        let mut rng = rng::stream(0, Stream::Dropout);
        let out = forward_node_gcn(&model, &g, &ops, cfg.variant, &mut eval_drop(&mut rng)).unwrap();
        assert_eq!(out.caches.len(), 1);
        assert_eq!(out.caches[0].activation, Activation::Identity);
        let xstar = DenseMatrix::vstack(&g.node_features().to_dense(), &g.label_features().to_dense()).unwrap();
        let expect = ops
            .node
            .truncated
            .to_dense()
            .matmul(&xstar)
            .unwrap()
            .matmul(&model.params.node_w0)
            .unwrap();
        assert!(out.logits.max_abs_diff(&expect) < 1e-12);
        assert!(out.logits.as_slice().iter().any(|&v| v < 0.0));
    }

    #[test]
    fn injections() {
        let (g, _, cfg) = small();
        let mut model = init_model(&g, &cfg);
        let m = g.label_count();
        inject_label_features(&mut model, &DenseMatrix::zeros(m, m)).unwrap();
        assert!(model.injected_labels.to_dense().as_slice().iter().all(|&v| v == 0.0));

        let o = DenseMatrix::from_fn(m, m, |r, c| r as f64 - c as f64);
        inject_label_features(&mut model, &o).unwrap();
        let expect = o.matmul(&model.label_projection).unwrap().map(|v| v.max(0.0));
        assert_eq!(model.injected_labels.to_dense(), expect);

        let ov = DenseMatrix::from_fn(g.node_count(), m, |r, c| ((r + c) % 3) as f64 - 1.0);
        inject_node_features(&mut model, &ov).unwrap();
        let expect = ov.matmul(&model.node_projection).unwrap().map(|v| v.max(0.0));
        assert_eq!(model.injected_nodes.to_dense(), expect);
    }

    #[test]
    fn node_variant_label_operator_has_no_cross_mass() {
        let (g, split, _) = small();
        let cfg = TrainConfig::for_variant(Variant::Node);
        let ops = Operators::build(&g, &split, &cfg).unwrap();
        let m = g.label_count();
        assert!(ops.label.truncated.iter().all(|(_, j, _)| j < m));
        let full = Operators::build(&g, &split, &TrainConfig::default()).unwrap();
        assert!(full.label.truncated.iter().any(|(_, j, _)| j >= m));
    }

    #[test]
    fn train_only_exposure_hides_other_memberships() {
        let (g, split, cfg) = small();
        let ops = Operators::build(&g, &split, &cfg).unwrap();
        let n = g.node_count();
        for (i, in_train) in split.train_mask().into_iter().enumerate() {
            let touches_label = ops.node.truncated.row(i).0.iter().any(|&j| j >= n);
            assert_eq!(touches_label, in_train, "node {i}");
        }
    }

    #[test]
    fn missing_cache_is_an_error() {
        let (g, split, cfg) = small();
        let ops = Operators::build(&g, &split, &cfg).unwrap();
        let model = init_model(&g, &cfg);
        let mut rng = rng::stream(0, Stream::Dropout);
        let node = forward_node_gcn(&model, &g, &ops, cfg.variant, &mut eval_drop(&mut rng)).unwrap();
        let up = DenseMatrix::zeros(node.logits.rows(), node.logits.cols());
        let r = backward(&model, &ops, cfg.variant, None, Some((&node, &up)));
        assert!(matches!(r, Err(Error::MissingCache("label network"))));
        let truncated = NetworkForward {
            logits: node.logits.clone(),
            caches: node.caches[..1].to_vec(),
        };
        let r = backward(&model, &ops, Variant::GcnBaseline, None, Some((&truncated, &up)));
        assert!(matches!(r, Err(Error::MissingCache("node network"))));
    }

    #[test]
    fn zero_output_weight_cuts_the_chain() {
        let (g, split, cfg) = small();
        let ops = Operators::build(&g, &split, &cfg).unwrap();
        let mut model = init_model(&g, &cfg);
        model.params.node_w1.as_mut().unwrap().scale(0.0);
        let mut rng = rng::stream(0, Stream::Dropout);
        let node = forward_node_gcn(&model, &g, &ops, Variant::GcnBaseline, &mut eval_drop(&mut rng)).unwrap();
        let up = DenseMatrix::from_fn(node.logits.rows(), node.logits.cols(), |_, _| 1.0);
        let grads = backward(&model, &ops, Variant::GcnBaseline, None, Some((&node, &up))).unwrap();
        assert!(grads.node_w0.as_slice().iter().all(|&v| v == 0.0));
        assert!(grads.node_w1.unwrap().as_slice().iter().any(|&v| v != 0.0));
    }
}
