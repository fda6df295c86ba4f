mod common;

use mlgcn::eval::split_dataset;
use mlgcn::gcn::{multi_label_loss, single_label_loss, softmax_rows, Dropout};
use mlgcn::ingestion::generate_synthetic;
use mlgcn::trainer::{
    collective_objective, forward_label_gcn, forward_node_gcn, init_model, train, Operators, TrainConfig,
    Trainer, Variant,
};
use mlgcn::{validate_graph, DataSplit, DenseMatrix, FeatureInit, MultiLabelGraph, SyntheticConfig};

fn small_graph(seed: u64) -> (MultiLabelGraph, DataSplit) {
    let g = generate_synthetic(
        &SyntheticConfig {
            community_size: 15,
            p_in: 0.3,
            p_out: 0.05,
            seed,
            ..Default::default()
        },
        FeatureInit::OneHot,
    )
    .unwrap();
    let split = split_dataset(&g, 0.3, seed).unwrap();
    (g, split)
}

fn quick(variant: Variant) -> TrainConfig {
    TrainConfig {
        epochs: 12,
        hidden_dim: 8,
        update_freq_nodes: 4,
        update_freq_labels: 3,
        ..TrainConfig::for_variant(variant)
    }
}

#[test]
fn same_seed_same_run() {
    let (g, split) = small_graph(1);
    for variant in Variant::ALL {
        let a = train(&g, &split, &quick(variant)).unwrap();
        let b = train(&g, &split, &quick(variant)).unwrap();
        assert_eq!(a.model, b.model, "{variant}");
        assert_eq!(a.embeddings, b.embeddings);
        let (mut ha, mut hb) = (Vec::new(), Vec::new());
        a.history.write_csv(&mut ha).unwrap();
        b.history.write_csv(&mut hb).unwrap();
        assert_eq!(ha, hb);
    }
}

#[test]
fn zero_learning_rate_freezes_everything() {
    let (g, split) = small_graph(2);
    for variant in Variant::ALL {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            dropout: 0.0,
            update_freq_nodes: 100,
            update_freq_labels: 100,
            ..quick(variant)
        };
        let init = init_model(&g, &cfg);
        let out = train(&g, &split, &cfg).unwrap();
        assert_eq!(out.model.params, init.params);
        let losses = out.history.losses();
        assert!(losses.iter().all(|&l| l == losses[0]), "{variant}: {losses:?}");
        assert!(out.history.epochs.iter().all(|e| !e.injected_labels && !e.injected_nodes));
    }
}

#[test]
fn history_loss_is_the_sum_of_both_terms() {
    let (g, split) = small_graph(3);
    for variant in Variant::ALL {
        let out = train(&g, &split, &quick(variant)).unwrap();
        assert_eq!(out.history.len(), 12);
        for e in &out.history.epochs {
            assert_eq!(e.loss, e.label_loss + e.node_loss);
        }
    }
}

#[test]
fn baseline_has_no_label_loss_and_no_injection() {
    let (g, split) = small_graph(4);
    let out = train(&g, &split, &quick(Variant::GcnBaseline)).unwrap();
    for e in &out.history.epochs {
        assert_eq!(e.label_loss, 0.0);
        assert!(!e.injected_labels && !e.injected_nodes);
    }
    assert_eq!(out.model.injected_labels, *g.label_features());
    assert_eq!(out.model.injected_nodes, *g.node_features());
}

#[test]
fn injections_follow_the_schedule() {
    let (g, split) = small_graph(5);
    let out = train(&g, &split, &quick(Variant::Full)).unwrap();
    for e in &out.history.epochs {
        assert_eq!(e.injected_nodes, e.epoch % 4 == 0, "epoch {}", e.epoch);
        assert_eq!(e.injected_labels, e.epoch % 3 == 0, "epoch {}", e.epoch);
    }
    let skip = TrainConfig {
        skip_epoch0_injection: true,
        ..quick(Variant::Full)
    };
    let out = train(&g, &split, &skip).unwrap();
    assert!(!out.history.epochs[0].injected_labels && !out.history.epochs[0].injected_nodes);
    assert!(out.history.epochs[3].injected_labels);
}

#[test]
fn disabled_injection_equals_static_features() {
    let (g, split) = small_graph(6);
    let off = TrainConfig {
        update_freq_nodes: 13,
        update_freq_labels: 500,
        ..quick(Variant::Full)
    };
    let out = train(&g, &split, &off).unwrap();
    assert_eq!(out.model.injected_labels, *g.label_features());
    assert_eq!(out.model.injected_nodes, *g.node_features());
}

#[test]
fn doubling_the_loss_doubles_the_gradient() {
    let (g, split) = small_graph(7);
    let cfg = TrainConfig {
        dropout: 0.0,
        ..quick(Variant::GcnBaseline)
    };
    let model = init_model(&g, &cfg);
    let ops = Operators::build(&g, &split, &cfg).unwrap();
    let run = |mask: &[usize]| {
        let mut r = common::rng(0);
        let mut off = Dropout { p: 0.0, training: true, rng: &mut r };
        collective_objective(&model, &g, &ops, &cfg, mask, &mut off).unwrap()
    };
    let once = run(&split.train);
    let twice_mask: Vec<usize> = split.train.iter().chain(&split.train).copied().collect();
    let twice = run(&twice_mask);
    assert!((twice.loss() - 2.0 * once.loss()).abs() < 1e-9);
    for ((_, a), (_, b)) in once.grads.iter().zip(twice.grads.iter()) {
        let mut doubled = a.clone();
        doubled.scale(2.0);
        assert!(doubled.max_abs_diff(b) < 1e-12);
    }
}

#[test]
fn zero_weights_give_closed_form_losses() {
    let (g, split) = small_graph(8);
    for variant in [Variant::Full, Variant::TwoLabel, Variant::OneNode] {
        let cfg = TrainConfig {
            dropout: 0.0,
            ..quick(variant)
        };
        let mut model = init_model(&g, &cfg);
        for (_, w) in model.params.iter_mut() {
            w.scale(0.0);
        }
        let ops = Operators::build(&g, &split, &cfg).unwrap();
        let mut r = common::rng(0);
        let mut off = Dropout { p: 0.0, training: false, rng: &mut r };
        let eval = collective_objective(&model, &g, &ops, &cfg, &split.train, &mut off).unwrap();
        let m = g.label_count() as f64;
        assert!((eval.label_loss - m * m.ln()).abs() < 1e-9);
        let want = split.train.len() as f64 * m * std::f64::consts::LN_2;
        assert!((eval.node_loss - want).abs() < 1e-9);
    }
}

#[test]
fn uniform_softmax_closed_form() {
    for m in 1..8 {
        let z = softmax_rows(&DenseMatrix::zeros(m, m));
        let want = m as f64 * (m as f64).ln();
        assert!((single_label_loss(&z, &DenseMatrix::identity(m)) - want).abs() < 1e-9);
    }
    let o = DenseMatrix::zeros(5, 3);
    let y = DenseMatrix::from_fn(5, 3, |r, c| ((r + c) % 2) as f64);
    let loss = multi_label_loss(&o, &y, &[0, 2, 4]).unwrap();
    assert!((loss - 3.0 * 3.0 * std::f64::consts::LN_2).abs() < 1e-9);
}

#[test]
fn two_layer_label_network_with_identity_head_composes() {
    let (g, split) = small_graph(9);
    let m = g.label_count();
    let one = TrainConfig {
        hidden_dim: m,
        ..quick(Variant::Full)
    };
    let two = TrainConfig {
        hidden_dim: m,
        ..quick(Variant::TwoLabel)
    };
    let ops = Operators::build(&g, &split, &two).unwrap();
    let mut model2 = init_model(&g, &two);
    let mut model1 = init_model(&g, &one);
    model1.params.label_w0 = model2.params.label_w0.clone();
    model2.params.label_w1 = Some(DenseMatrix::identity(m));
    let mut r = common::rng(0);
    let mut off = Dropout { p: 0.0, training: false, rng: &mut r };
    let o1 = forward_label_gcn(&model1, &g, &ops, &mut off).unwrap().logits;
    let o2 = forward_label_gcn(&model2, &g, &ops, &mut off).unwrap().logits;
    let want = ops.label.intra.mul_dense(&o1.map(|v| v.max(0.0))).unwrap();
    assert!(o2.max_abs_diff(&want) < 1e-12);
}

#[test]
fn node_variant_label_operator_has_no_cross_mass() {
    let (g, split) = small_graph(10);
    let ops = Operators::build(&g, &split, &quick(Variant::Node)).unwrap();
    let m = g.label_count();
    assert!(ops.label.truncated.iter().all(|(_, j, _)| j < m));
    let ops = Operators::build(&g, &split, &quick(Variant::Full)).unwrap();
    assert!(ops.label.truncated.iter().any(|(_, j, _)| j >= m));
}

#[test]
fn test_labels_stay_out_of_the_graph_by_default() {
    let (g, split) = small_graph(11);
    let ops = Operators::build(&g, &split, &quick(Variant::Full)).unwrap();
    let n = g.node_count();
    let train = split.train_mask();
    for (i, j, _) in ops.node.truncated.iter() {
        if j >= n {
            assert!(train[i], "node {i} linked to label {}", j - n);
        }
    }
}

#[test]
fn eval_mode_node_forward_ignores_dropout_rate() {
    let (g, split) = small_graph(12);
    let cfg = quick(Variant::Full);
    let model = init_model(&g, &cfg);
    let ops = Operators::build(&g, &split, &cfg).unwrap();
    let mut r = common::rng(0);
    let mut a = Dropout { p: 0.0, training: false, rng: &mut r };
    let x = forward_node_gcn(&model, &g, &ops, cfg.variant, &mut a).unwrap().logits;
    let mut r = common::rng(5);
    let mut b = Dropout { p: 0.9, training: false, rng: &mut r };
    let y = forward_node_gcn(&model, &g, &ops, cfg.variant, &mut b).unwrap().logits;
    assert_eq!(x, y);
}

#[test]
fn stepping_matches_batch_training() {
    let (g, split) = small_graph(13);
    let cfg = quick(Variant::TwoLabel);
    let batch = train(&g, &split, &cfg).unwrap();
    let mut t = Trainer::new(&g, split.clone(), cfg).unwrap();
    while !t.is_done() {
        t.step().unwrap();
    }
    let stepped = t.finish().unwrap();
    assert_eq!(stepped.model, batch.model);
}

#[test]
fn divergence_names_the_epoch() {
    let (g, split) = small_graph(14);
    let cfg = TrainConfig {
        learning_rate: 1e200,
        ..quick(Variant::GcnBaseline)
    };
    let err = train(&g, &split, &cfg).unwrap_err();
    assert!(matches!(err, mlgcn::Error::Diverged { .. }), "{err}");
    assert!(err.to_string().contains("epoch"));
}

#[test]
fn generated_graphs_validate() {
    for seed in 0..5 {
        let (g, _) = small_graph(seed);
        assert!(validate_graph(&g).is_empty());
    }
}
