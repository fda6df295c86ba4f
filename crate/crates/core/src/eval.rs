//! Split protocol, decision rules and Micro/Macro-F1.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::builder::build_label_cooccurrence;
use crate::error::{Error, Result};
use crate::gcn::sigmoid;
use crate::graph::{DataSplit, MultiLabelGraph};
use crate::matrix::{DenseMatrix, SparseMatrix};
use crate::rng::{self, Stream};

/// Fraction of the non-training nodes held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.1;

/// Samples `round(α·n)` training nodes uniformly; the rest is split 10% / 90%
/// into validation and test. Each index list is sorted.
pub fn split_dataset(graph: &MultiLabelGraph, alpha: f64, seed: u64) -> Result<DataSplit> {
    split_nodes(graph.node_count(), alpha, seed)
}

pub fn split_nodes(n: usize, alpha: f64, seed: u64) -> Result<DataSplit> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Split(format!("train ratio must lie in (0,1), got {alpha}")));
    }
    let n_train = (alpha * n as f64).round() as usize;
    let rest = n.saturating_sub(n_train);
    let n_val = (VALIDATION_FRACTION * rest as f64).round() as usize;
    if n_train == 0 || rest - n_val == 0 {
        return Err(Error::Split(format!(
            "alpha {alpha} on {n} nodes leaves an empty train or test set"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, Stream::Split));
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(DataSplit {
        train: sorted(&order[..n_train]),
        val: sorted(&order[n_train..n_train + n_val]),
        test: sorted(&order[n_train + n_val..]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum DecisionRule {
    /// Predict label `r` when `σ(score) ≥ t`.
    Threshold(f64),
    /// Predict each node's `k` highest-scoring labels, `k` being its true
    /// label count. Ties go to the lower label index.
    #[default]
    TopKTrue,
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Threshold(t) => write!(f, "threshold:{t}"),
            Self::TopKTrue => f.write_str("topk"),
        }
    }
}

impl FromStr for DecisionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "topk" => Ok(Self::TopKTrue),
            "threshold" => Ok(Self::Threshold(0.5)),
            _ => {
                let t = s
                    .strip_prefix("threshold:")
                    .and_then(|t| t.parse::<f64>().ok())
                    .filter(|t| (0.0..=1.0).contains(t))
                    .ok_or_else(|| Error::Config(format!("unknown decision rule {s:?}")))?;
                Ok(Self::Threshold(t))
            }
        }
    }
}

/// Turns `n×m` logits into 0/1 predictions. `truth` is required for
/// [`DecisionRule::TopKTrue`].
pub fn predict_labels(
    scores: &DenseMatrix,
    rule: DecisionRule,
    truth: Option<&DenseMatrix>,
) -> Result<DenseMatrix> {
    let (n, m) = scores.shape();
    let mut pred = DenseMatrix::zeros(n, m);
    match rule {
        DecisionRule::Threshold(t) => {
            for i in 0..n {
                for (p, &s) in pred.row_mut(i).iter_mut().zip(scores.row(i)) {
                    *p = if sigmoid(s) >= t { 1.0 } else { 0.0 };
                }
            }
        }
        DecisionRule::TopKTrue => {
            let truth = truth.ok_or(Error::MissingTruth)?;
            if truth.shape() != scores.shape() {
                return Err(Error::Shape {
                    op: "predict_labels",
                    left: scores.shape(),
                    right: truth.shape(),
                });
            }
            let mut order: Vec<usize> = Vec::with_capacity(m);
            for i in 0..n {
                let k = truth.row(i).iter().filter(|&&v| v != 0.0).count();
                let row = scores.row(i);
                order.clear();
                order.extend(0..m);
                // stable: equal scores keep ascending label order
                order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
                for &r in &order[..k] {
                    pred.set(i, r, 1.0);
                }
            }
        }
    }
    Ok(pred)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub f1: f64,
}

impl LabelScore {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let denom = 2 * tp + fp + fn_;
        let f1 = if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        };
        Self { tp, fp, fn_, f1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_label: Vec<LabelScore>,
    pub rule: Option<DecisionRule>,
    pub subset_size: usize,
}

/// Counts TP/FP/FN per label over `subset` and aggregates them. A label with
/// no positives in either prediction or truth scores F1 = 0.
pub fn compute_f1(pred: &DenseMatrix, truth: &DenseMatrix, subset: &[usize]) -> Result<EvaluationReport> {
    if pred.shape() != truth.shape() {
        return Err(Error::Shape {
            op: "compute_f1",
            left: pred.shape(),
            right: truth.shape(),
        });
    }
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let m = pred.cols();
    let mut counts = vec![(0usize, 0usize, 0usize); m];
    for &i in subset {
        for (c, (&p, &t)) in counts.iter_mut().zip(pred.row(i).iter().zip(truth.row(i))) {
            match (p != 0.0, t != 0.0) {
                (true, true) => c.0 += 1,
                (true, false) => c.1 += 1,
                (false, true) => c.2 += 1,
                (false, false) => {}
            }
        }
    }
    let per_label: Vec<LabelScore> = counts
        .iter()
        .map(|&(tp, fp, fn_)| LabelScore::from_counts(tp, fp, fn_))
        .collect();
    let (num, den) = counts
        .iter()
        .fold((0usize, 0usize), |(n, d), &(tp, fp, fn_)| (n + 2 * tp, d + 2 * tp + fp + fn_));
    let micro_f1 = if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let macro_f1 = if m == 0 {
        0.0
    } else {
        per_label.iter().map(|s| s.f1).sum::<f64>() / m as f64
    };
    Ok(EvaluationReport {
        micro_f1,
        macro_f1,
        per_label,
        rule: None,
        subset_size: subset.len(),
    })
}

/// Predicts with `rule` and scores the result on `subset`.
pub fn evaluate(
    scores: &DenseMatrix,
    truth: &DenseMatrix,
    subset: &[usize],
    rule: DecisionRule,
) -> Result<EvaluationReport> {
    let pred = predict_labels(scores, rule, Some(truth))?;
    let mut report = compute_f1(&pred, truth, subset)?;
    report.rule = Some(rule);
    Ok(report)
}

/// `(label id, F1)` in label-index order.
pub fn per_label_breakdown(report: &EvaluationReport, label_ids: &[String]) -> Vec<(String, f64)> {
    label_ids
        .iter()
        .zip(&report.per_label)
        .map(|(id, s)| (id.clone(), s.f1))
        .collect()
}

/// Co-occurrence counts scaled by their off-diagonal maximum, unit diagonal.
pub fn label_correlation_matrix(b: &SparseMatrix) -> DenseMatrix {
    let c = build_label_cooccurrence(b);
    let m = c.rows();
    let max = c.values().iter().copied().fold(0.0, f64::max);
    let mut out = DenseMatrix::identity(m);
    if max > 0.0 {
        for (r, s, v) in c.iter() {
            out.set(r, s, v / max);
        }
    }
    out
}
