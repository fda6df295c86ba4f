//! Stratified graph construction: label co-occurrence, the two composite
//! `(n+m)×(n+m)` adjacencies, and the normalised (then truncated) propagation
//! operators used by the convolutions.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::SparseMatrix;

/// `C = BᵀB` with the diagonal removed: `C[r][s]` counts nodes carrying both
/// labels `r` and `s`.
pub fn build_label_cooccurrence(b: &SparseMatrix) -> SparseMatrix {
    let m = b.cols();
    let bt = b.transpose();
    let mut triplets = Vec::new();
    let mut acc = vec![0.0; m];
    let mut touched = Vec::new();
    for r in 0..m {
        let (nodes, weights) = bt.row(r);
        for (&i, &w) in nodes.iter().zip(weights) {
            let (labels, vals) = b.row(i);
            for (&s, &v) in labels.iter().zip(vals) {
                if s == r {
                    continue;
                }
                if acc[s] == 0.0 {
                    touched.push(s);
                }
                acc[s] += w * v;
            }
        }
        for &s in &touched {
            triplets.push((r, s, acc[s]));
            acc[s] = 0.0;
        }
        touched.clear();
    }
    SparseMatrix::from_triplets(m, m, triplets).expect("indices within m×m")
}

/// Replaces every stored count with 1.
pub fn binarize(c: &SparseMatrix) -> SparseMatrix {
    c.map_values(|_| 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// Common nodes `0..n`, label nodes `n..n+m`.
    NodesFirst,
    /// Label nodes `0..m`, common nodes `m..m+n`.
    LabelsFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeAdjacency {
    pub matrix: SparseMatrix,
    /// Size of the leading block (`n` for nodes-first, `m` for labels-first).
    pub primary_count: usize,
    pub layout: Layout,
}

/// Places `diag` in the leading block and `cross` / `crossᵀ` off-diagonal.
/// `cross` is `primary × secondary`.
fn two_block(diag: Option<&SparseMatrix>, cross: Option<&SparseMatrix>, p: usize, q: usize) -> SparseMatrix {
    let mut t = Vec::new();
    if let Some(d) = diag {
        t.extend(d.iter());
    }
    if let Some(x) = cross {
        for (i, j, v) in x.iter() {
            t.push((i, p + j, v));
            t.push((p + j, i, v));
        }
    }
    SparseMatrix::from_triplets(p + q, p + q, t).expect("blocks sized p+q")
}

/// Node-node-label graph `E = [[A, B], [Bᵀ, 0]]`.
pub fn build_node_node_label_adj(a: &SparseMatrix, b: &SparseMatrix) -> CompositeAdjacency {
    let (n, m) = b.shape();
    CompositeAdjacency {
        matrix: two_block(Some(a), Some(b), n, m),
        primary_count: n,
        layout: Layout::NodesFirst,
    }
}

/// Label-label-node graph `F = [[C, Bᵀ], [B, 0]]`.
pub fn build_label_label_node_adj(c: &SparseMatrix, b: &SparseMatrix) -> CompositeAdjacency {
    let (n, m) = b.shape();
    let bt = b.transpose();
    CompositeAdjacency {
        matrix: two_block(Some(c), Some(&bt), m, n),
        primary_count: m,
        layout: Layout::LabelsFirst,
    }
}

/// Label-label-node graph with the common-node attributes stripped:
/// `F = [[C, 0], [0, 0]]`.
pub fn build_label_only_adj(c: &SparseMatrix, n: usize) -> CompositeAdjacency {
    let m = c.rows();
    CompositeAdjacency {
        matrix: two_block(Some(c), None, m, n),
        primary_count: m,
        layout: Layout::LabelsFirst,
    }
}

/// `D^{-1/2} (M + I) D^{-1/2}` with `D_ii = Σ_j (M + I)_ij`.
pub fn normalize_symmetric(m: &SparseMatrix) -> SparseMatrix {
    assert_eq!(m.rows(), m.cols(), "normalize_symmetric needs a square matrix");
    let n = m.rows();
    let with_loops = SparseMatrix::from_triplets(
        n,
        n,
        m.iter().chain((0..n).map(|i| (i, i, 1.0))),
    )
    .expect("square");
    let degree = with_loops.row_sums();
    let mut values = Vec::with_capacity(with_loops.nnz());
    for (i, j, v) in with_loops.iter() {
        values.push(v / (degree[i] * degree[j]).sqrt());
    }
    let mut it = values.into_iter();
    with_loops.map_values(|_| it.next().unwrap())
}

/// First `keep` rows of `m`.
pub fn truncate_rows(m: &SparseMatrix, keep: usize) -> Result<SparseMatrix> {
    m.truncate_rows(keep)
}

/// Truncated composite operator plus the intra-block operator over the
/// primary entities, each normalised with its own degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedOperator {
    /// `primary × (n+m)` rows of the normalised composite matrix.
    pub truncated: SparseMatrix,
    /// Normalised `primary × primary` matrix (`Ã` or `C̃`).
    pub intra: SparseMatrix,
}

impl NormalizedOperator {
    /// Normalises the whole composite matrix, then keeps the primary rows.
    pub fn from_composite(composite: &CompositeAdjacency, intra: &SparseMatrix) -> Result<Self> {
        Ok(Self {
            truncated: truncate_rows(&normalize_symmetric(&composite.matrix), composite.primary_count)?,
            intra: normalize_symmetric(intra),
        })
    }
}
