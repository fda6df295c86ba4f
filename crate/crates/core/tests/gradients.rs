mod common;

use mlgcn::gcn::{gcn_layer_backward, gcn_layer_forward, Activation, Dropout, LayerInput};
use mlgcn::{DenseMatrix, StackedFeatures, Variant};
use rand::Rng;

const EPS: f64 = 1e-6;
// entries smaller than this are compared on an absolute scale
const FLOOR: f64 = 1e-3;

#[test]
fn collective_gradient_matches_finite_differences_for_every_variant() {
    for variant in Variant::ALL {
        for seed in 0..12 {
            let inst = common::grad_instance(seed, variant, 6, 3, 4);
            let err = inst.max_relative_error(EPS, FLOOR);
            assert!(err <= 1e-5, "{variant} seed {seed}: relative error {err:e}");
        }
    }
}

#[test]
fn larger_instances_still_check() {
    for seed in 0..3 {
        let inst = common::grad_instance(100 + seed, Variant::Full, 10, 4, 6);
        assert!(inst.max_relative_error(EPS, FLOOR) <= 1e-5);
    }
}

/// Scalar objective `Σ G ⊙ layer(H, W)` so ∂/∂output is the fixed matrix `G`.
fn layer_objective(op: &mlgcn::SparseMatrix, h: &DenseMatrix, w: &DenseMatrix, g: &DenseMatrix) -> f64 {
    let mut r = common::rng(0);
    let mut off = Dropout { p: 0.0, training: false, rng: &mut r };
    let (out, _) = gcn_layer_forward(op, LayerInput::Hidden(h.clone()), w, Activation::Relu, &mut off).unwrap();
    out.hadamard(g).unwrap().sum()
}

#[test]
fn single_layer_input_and_weight_gradients() {
    let mut r = common::rng(9);
    let op = common::random_adjacency(&mut r, 5, 0.5, true);
    let op = mlgcn::builder::normalize_symmetric(&op);
    let h = DenseMatrix::from_fn(5, 3, |_, _| r.gen_range(-1.0..1.0));
    let w = DenseMatrix::from_fn(3, 2, |_, _| r.gen_range(-1.0..1.0));
    let g = DenseMatrix::from_fn(5, 2, |_, _| r.gen_range(-1.0..1.0));

    let mut rr = common::rng(0);
    let mut off = Dropout { p: 0.0, training: false, rng: &mut rr };
    let (_, cache) = gcn_layer_forward(&op, LayerInput::Hidden(h.clone()), &w, Activation::Relu, &mut off).unwrap();
    let (gw, gh) = gcn_layer_backward(&op, &w, &cache, &g).unwrap();
    let gh = gh.unwrap();

    for idx in 0..w.as_slice().len() {
        let (mut p, mut m) = (w.clone(), w.clone());
        p.as_mut_slice()[idx] += EPS;
        m.as_mut_slice()[idx] -= EPS;
        let num = (layer_objective(&op, &h, &p, &g) - layer_objective(&op, &h, &m, &g)) / (2.0 * EPS);
        assert!((num - gw.as_slice()[idx]).abs() < 1e-8);
    }
    for idx in 0..h.as_slice().len() {
        let (mut p, mut m) = (h.clone(), h.clone());
        p.as_mut_slice()[idx] += EPS;
        m.as_mut_slice()[idx] -= EPS;
        let num = (layer_objective(&op, &p, &w, &g) - layer_objective(&op, &m, &w, &g)) / (2.0 * EPS);
        assert!((num - gh.as_slice()[idx]).abs() < 1e-8);
    }
}

#[test]
fn dropout_mask_is_replayed_in_backward() {
    let mut r = common::rng(4);
    let op = mlgcn::builder::normalize_symmetric(&common::random_adjacency(&mut r, 4, 0.6, false));
    let h = DenseMatrix::from_fn(4, 3, |_, _| r.gen_range(-1.0..1.0));
    let w = DenseMatrix::from_fn(3, 2, |_, _| r.gen_range(-1.0..1.0));
    let g = DenseMatrix::from_fn(4, 2, |_, _| 1.0);
    let mut rr = common::rng(1);
    let mut on = Dropout { p: 0.5, training: true, rng: &mut rr };
    let (_, cache) = gcn_layer_forward(&op, LayerInput::Hidden(h), &w, Activation::Identity, &mut on).unwrap();
    let mask = cache.mask.clone().unwrap();
    let (_, gh) = gcn_layer_backward(&op, &w, &cache, &g).unwrap();
    let gh = gh.unwrap();
    for (gv, mv) in gh.as_slice().iter().zip(mask.as_slice()) {
        if *mv == 0.0 {
            assert_eq!(*gv, 0.0);
        } else {
            assert_eq!(*mv, 2.0);
        }
    }
}

#[test]
fn feature_inputs_yield_no_input_gradient() {
    let mut r = common::rng(2);
    let g = common::random_graph(&mut r, 4, 2);
    let f = StackedFeatures::new(g.node_features().clone(), g.label_features().clone()).unwrap();
    let op = mlgcn::SparseMatrix::identity(6);
    let w = DenseMatrix::from_fn(6, 2, |a, b| (a + b) as f64 * 0.1);
    let mut rr = common::rng(0);
    let mut off = Dropout { p: 0.0, training: false, rng: &mut rr };
    let (_, cache) = gcn_layer_forward(&op, LayerInput::Features(f), &w, Activation::Identity, &mut off).unwrap();
    let (gw, gh) = gcn_layer_backward(&op, &w, &cache, &DenseMatrix::from_fn(6, 2, |_, _| 1.0)).unwrap();
    assert!(gh.is_none());
    // identity features and operator: every weight row receives the all-ones row
    assert_eq!(gw, DenseMatrix::from_fn(6, 2, |_, _| 1.0));
}
