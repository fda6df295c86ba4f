//! Independent reference implementations shared by the integration suites.
//! Everything here works on plain dense arrays with naive loops.

#![allow(dead_code)]

use mlgcn::eval::split_nodes;
use mlgcn::gcn::Dropout;
use mlgcn::trainer::{
    collective_objective, init_model, inject_label_features, inject_node_features, ModelState, Operators,
    ParamKey, TrainConfig, Variant,
};
use mlgcn::{DataSplit, DenseMatrix, FeatureInit, MultiLabelGraph, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric adjacency with edge probability `p` and weights in `[0.5, 2)`
/// when `weighted`, otherwise 1.
pub fn random_adjacency<R: Rng>(rng: &mut R, n: usize, p: f64, weighted: bool) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p {
                let w = if weighted { rng.gen_range(0.5..2.0) } else { 1.0 };
                t.push((i, j, w));
                t.push((j, i, w));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, t).unwrap()
}

/// Binary memberships; label `r` always has node `r % n`, so no label is orphaned.
pub fn random_memberships<R: Rng>(rng: &mut R, n: usize, m: usize, p: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        for r in 0..m {
            if r % n == i || rng.gen::<f64>() < p {
                t.push((i, r, 1.0));
            }
        }
    }
    SparseMatrix::from_triplets(n, m, t).unwrap()
}

pub fn random_graph<R: Rng>(rng: &mut R, n: usize, m: usize) -> MultiLabelGraph {
    let a = random_adjacency(rng, n, 0.4, false);
    let b = random_memberships(rng, n, m, 0.35);
    MultiLabelGraph::with_features(
        a,
        b,
        (0..n).map(|i| format!("v{i}")).collect(),
        (0..m).map(|r| format!("l{r}")).collect(),
        FeatureInit::OneHot,
        rng,
    )
    .unwrap()
}

pub fn to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

/// `D^{-1/2}(M+I)D^{-1/2}` entry by entry.
pub fn normalize_oracle(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut s = m.to_vec();
    for (i, row) in s.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let deg: Vec<f64> = s.iter().map(|row| row.iter().sum()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| s[i][j] / (deg[i].sqrt() * deg[j].sqrt())).collect())
        .collect()
}

/// `C[r][s]` = number of nodes holding both `r` and `s`, zero diagonal.
pub fn cooccurrence_oracle(b: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; m]; m];
    for row in b {
        for r in 0..m {
            for s in 0..m {
                if r != s && row[r] != 0.0 && row[s] != 0.0 {
                    c[r][s] += 1.0;
                }
            }
        }
    }
    c
}

/// `[[top_left, cross], [crossᵀ, 0]]`.
pub fn block_oracle(top_left: &[Vec<f64>], cross: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = top_left.len();
    let q = cross.first().map_or(0, |r| r.len());
    let mut out = vec![vec![0.0; p + q]; p + q];
    for i in 0..p {
        for j in 0..p {
            out[i][j] = top_left[i][j];
        }
        for j in 0..q {
            out[i][p + j] = cross[i][j];
            out[p + j][i] = cross[i][j];
        }
    }
    out
}

pub fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|row| row[j]).collect()).collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(u, v)| (u - v).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct F1Oracle {
    pub counts: Vec<(usize, usize, usize)>,
    pub micro: f64,
    pub macro_: f64,
}

/// Confusion counts by enumerating every (node, label) cell.
pub fn f1_oracle(pred: &[Vec<bool>], truth: &[Vec<bool>], subset: &[usize]) -> F1Oracle {
    let m = truth[0].len();
    let mut counts = vec![(0, 0, 0); m];
    for &i in subset {
        for r in 0..m {
            let c = &mut counts[r];
            if pred[i][r] && truth[i][r] {
                c.0 += 1;
            } else if pred[i][r] {
                c.1 += 1;
            } else if truth[i][r] {
                c.2 += 1;
            }
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    };
    let (tp, fp, fn_) = counts
        .iter()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    let micro = f1(tp, fp, fn_);
    let macro_ = counts.iter().map(|&(a, b, c)| f1(a, b, c)).sum::<f64>() / m as f64;
    F1Oracle { counts, micro, macro_ }
}

pub fn bool_matrix(m: &[Vec<bool>]) -> DenseMatrix {
    DenseMatrix::from_fn(m.len(), m[0].len(), |r, c| if m[r][c] { 1.0 } else { 0.0 })
}

/// Tiny model with dense injected blocks, so every input path carries signal.
pub struct GradInstance {
    pub graph: MultiLabelGraph,
    pub split: DataSplit,
    pub config: TrainConfig,
    pub model: ModelState,
    pub ops: Operators,
}

pub fn grad_instance(seed: u64, variant: Variant, n: usize, m: usize, hidden: usize) -> GradInstance {
    let mut r = rng(seed);
    let graph = random_graph(&mut r, n, m);
    let split = split_nodes(n, 0.5, seed).unwrap();
    let config = TrainConfig {
        hidden_dim: hidden,
        dropout: 0.0,
        seed,
        ..TrainConfig::for_variant(variant)
    };
    let mut model = init_model(&graph, &config);
    if variant.uses_label_network() {
        let o_l = DenseMatrix::from_fn(m, m, |_, _| r.gen_range(-2.0..2.0));
        let o_v = DenseMatrix::from_fn(n, m, |_, _| r.gen_range(-2.0..2.0));
        inject_label_features(&mut model, &o_l).unwrap();
        inject_node_features(&mut model, &o_v).unwrap();
    }
    let ops = Operators::build(&graph, &split, &config).unwrap();
    GradInstance {
        graph,
        split,
        config,
        model,
        ops,
    }
}

impl GradInstance {
    pub fn loss(&self, model: &ModelState) -> f64 {
        let mut r = rng(0);
        let mut off = Dropout {
            p: 0.0,
            training: true,
            rng: &mut r,
        };
        collective_objective(model, &self.graph, &self.ops, &self.config, &self.split.train, &mut off)
            .unwrap()
            .loss()
    }

    /// Largest entrywise `|analytic - numeric| / max(|analytic|, |numeric|, floor)`
    /// over all trainable weights, using central differences with step `eps`.
    pub fn max_relative_error(&self, eps: f64, floor: f64) -> f64 {
        let mut r = rng(0);
        let mut off = Dropout {
            p: 0.0,
            training: true,
            rng: &mut r,
        };
        let analytic = collective_objective(
            &self.model,
            &self.graph,
            &self.ops,
            &self.config,
            &self.split.train,
            &mut off,
        )
        .unwrap()
        .grads;
        let keys: Vec<ParamKey> = self.model.params.iter().map(|(k, _)| k).collect();
        let mut worst: f64 = 0.0;
        for key in keys {
            let len = self.model.params.get(key).unwrap().as_slice().len();
            for idx in 0..len {
                let mut plus = self.model.clone();
                plus.params.get_mut(key).unwrap().as_mut_slice()[idx] += eps;
                let mut minus = self.model.clone();
                minus.params.get_mut(key).unwrap().as_mut_slice()[idx] -= eps;
                let numeric = (self.loss(&plus) - self.loss(&minus)) / (2.0 * eps);
                let a = analytic.get(key).unwrap().as_slice()[idx];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
                worst = worst.max(err);
            }
        }
        worst
    }
}
