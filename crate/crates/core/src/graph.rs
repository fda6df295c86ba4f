//! The multi-label graph value type, its invariants, initial features and
//! train/validation/test splits.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::FeatureBlock;
use crate::matrix::{DenseMatrix, SparseMatrix};

/// Nodes, weighted undirected edges, label memberships and input features.
///
/// Nodes are indexed `0..n` and labels `0..m`. The adjacency `A` is `n×n`,
/// the membership matrix `B` is `n×m` and the node/label feature blocks `X`
/// and `Y` share a column count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelGraph {
    adjacency: SparseMatrix,
    labels: SparseMatrix,
    node_features: FeatureBlock,
    label_features: FeatureBlock,
    node_ids: Vec<String>,
    label_ids: Vec<String>,
}

impl MultiLabelGraph {
    /// Only dimensions are checked here; use [`validate_graph`] for the
    /// content invariants.
    pub fn new(
        adjacency: SparseMatrix,
        labels: SparseMatrix,
        node_features: FeatureBlock,
        label_features: FeatureBlock,
        node_ids: Vec<String>,
        label_ids: Vec<String>,
    ) -> Result<Self> {
        let n = node_ids.len();
        let m = label_ids.len();
        let shape_err = |left, right| Error::Shape {
            op: "graph::new",
            left,
            right,
        };
        if adjacency.shape() != (n, n) {
            return Err(shape_err((n, n), adjacency.shape()));
        }
        if labels.shape() != (n, m) {
            return Err(shape_err((n, m), labels.shape()));
        }
        if node_features.rows() != n {
            return Err(shape_err((n, 0), (node_features.rows(), node_features.cols())));
        }
        if label_features.rows() != m {
            return Err(shape_err((m, 0), (label_features.rows(), label_features.cols())));
        }
        Ok(Self {
            adjacency,
            labels,
            node_features,
            label_features,
            node_ids,
            label_ids,
        })
    }

    /// Builds a graph with default features for the given feature policy.
    pub fn with_features<R: Rng + ?Sized>(
        adjacency: SparseMatrix,
        labels: SparseMatrix,
        node_ids: Vec<String>,
        label_ids: Vec<String>,
        features: FeatureInit,
        rng: &mut R,
    ) -> Result<Self> {
        let (x, y) = features.build(node_ids.len(), label_ids.len(), rng)?;
        Self::new(adjacency, labels, x, y, node_ids, label_ids)
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn label_count(&self) -> usize {
        self.label_ids.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.node_features.cols()
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn labels(&self) -> &SparseMatrix {
        &self.labels
    }

    pub fn node_features(&self) -> &FeatureBlock {
        &self.node_features
    }

    pub fn label_features(&self) -> &FeatureBlock {
        &self.label_features
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn label_ids(&self) -> &[String] {
        &self.label_ids
    }

    pub fn label_index(&self, id: &str) -> Option<usize> {
        self.label_ids.iter().position(|l| l == id)
    }

    /// Dense `n×m` 0/1 membership matrix.
    pub fn label_matrix(&self) -> DenseMatrix {
        self.labels.to_dense()
    }

    /// SHA-256 over ids, edges and memberships. Features are excluded: they
    /// are a function of the run configuration, not of the dataset.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.node_count() as u64).to_le_bytes());
        h.update((self.label_count() as u64).to_le_bytes());
        for id in self.node_ids.iter().chain(&self.label_ids) {
            h.update((id.len() as u64).to_le_bytes());
            h.update(id.as_bytes());
        }
        for m in [&self.adjacency, &self.labels] {
            h.update((m.nnz() as u64).to_le_bytes());
            for (r, c, v) in m.iter() {
                h.update((r as u64).to_le_bytes());
                h.update((c as u64).to_le_bytes());
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One broken invariant, naming the offending index.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    AsymmetricEdge(usize, usize),
    SelfLoop(usize),
    NonpositiveWeight(usize, usize),
    NonBinaryLabel(usize, usize),
    OrphanLabel(usize),
    FeatureDim { nodes: usize, labels: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AsymmetricEdge(i, j) => write!(f, "asymmetric edge ({i},{j})"),
            Self::SelfLoop(i) => write!(f, "self-loop at node {i}"),
            Self::NonpositiveWeight(i, j) => write!(f, "nonpositive weight at ({i},{j})"),
            Self::NonBinaryLabel(i, r) => write!(f, "non-binary label entry ({i},{r})"),
            Self::OrphanLabel(r) => write!(f, "orphan label {r}"),
            Self::FeatureDim { nodes, labels } => {
                write!(f, "feature dimension mismatch: nodes {nodes}, labels {labels}")
            }
        }
    }
}

/// Lists every invariant violation; an empty list means the graph is valid.
pub fn validate_graph(g: &MultiLabelGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let a = g.adjacency();
    for (i, j, w) in a.iter() {
        if i == j {
            out.push(Violation::SelfLoop(i));
        }
        if w <= 0.0 {
            out.push(Violation::NonpositiveWeight(i, j));
        }
        if a.get(j, i) != w {
            out.push(Violation::AsymmetricEdge(i, j));
        }
    }
    let b = g.labels();
    let mut column_hits = vec![0usize; g.label_count()];
    for (i, r, v) in b.iter() {
        if v != 1.0 {
            out.push(Violation::NonBinaryLabel(i, r));
        }
        column_hits[r] += 1;
    }
    out.extend(
        column_hits
            .iter()
            .enumerate()
            .filter(|(_, &hits)| hits == 0)
            .map(|(r, _)| Violation::OrphanLabel(r)),
    );
    if g.node_features().cols() != g.label_features().cols() {
        out.push(Violation::FeatureDim {
            nodes: g.node_features().cols(),
            labels: g.label_features().cols(),
        });
    }
    out
}

/// `total × dim` matrix whose row `r` has a single 1.0 at column `offset + r`.
pub fn one_hot_features(total: usize, dim: usize, offset: usize) -> Result<SparseMatrix> {
    if offset + total > dim {
        return Err(Error::FeatureOffset { total, dim, offset });
    }
    SparseMatrix::new(
        total,
        dim,
        (0..=total).collect(),
        (offset..offset + total).collect(),
        vec![1.0; total],
    )
}

/// How the raw node and label features are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FeatureInit {
    /// Disjoint identity slices of one `(n+m)`-wide one-hot space.
    #[default]
    OneHot,
    /// Standard normal entries of the given width.
    Gaussian { dim: usize },
}

impl FeatureInit {
    pub fn build<R: Rng + ?Sized>(
        self,
        n: usize,
        m: usize,
        rng: &mut R,
    ) -> Result<(FeatureBlock, FeatureBlock)> {
        match self {
            Self::OneHot => Ok((
                one_hot_features(n, n + m, 0)?.into(),
                one_hot_features(m, n + m, n)?.into(),
            )),
            Self::Gaussian { dim } => {
                if dim == 0 {
                    return Err(Error::Config("feature dimension must be positive".into()));
                }
                let mut gauss =
                    |rows| DenseMatrix::from_fn(rows, dim, |_, _| rng.sample(StandardNormal));
                let x = gauss(n);
                let y = gauss(m);
                Ok((x.into(), y.into()))
            }
        }
    }
}

/// Disjoint train / validation / test node index sets covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl DataSplit {
    pub fn node_count(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    /// Boolean membership of the training set, indexed by node.
    pub fn train_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.node_count()];
        for &i in &self.train {
            mask[i] = true;
        }
        mask
    }

    /// True when the three sets partition `0..n`.
    pub fn is_partition(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn graph(a: SparseMatrix, b: SparseMatrix) -> MultiLabelGraph {
        let n = a.rows();
        let m = b.cols();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        MultiLabelGraph::with_features(
            a,
            b,
            (0..n).map(|i| i.to_string()).collect(),
            (0..m).map(|i| format!("L{i}")).collect(),
            FeatureInit::OneHot,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn minimal_graph_is_valid() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let b = SparseMatrix::from_triplets(2, 1, [(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(validate_graph(&graph(a, b)).is_empty());
    }

    #[test]
    fn asymmetric_edge_reported() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0)]).unwrap();
        let b = SparseMatrix::from_triplets(2, 1, [(0, 0, 1.0)]).unwrap();
        let report: Vec<String> = validate_graph(&graph(a, b)).iter().map(|v| v.to_string()).collect();
        assert!(report.contains(&"asymmetric edge (0,1)".to_string()), "{report:?}");
    }

    #[test]
    fn orphan_label_reported() {
        let a = SparseMatrix::zeros(2, 2);
        let b = SparseMatrix::from_triplets(2, 3, [(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let report: Vec<String> = validate_graph(&graph(a, b)).iter().map(|v| v.to_string()).collect();
        assert_eq!(report, vec!["orphan label 2".to_string()]);
    }

    #[test]
    fn self_loops_and_weights_reported() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0)]).unwrap();
        let b = SparseMatrix::from_triplets(2, 1, [(0, 0, 2.0)]).unwrap();
        let v = validate_graph(&graph(a, b));
        assert!(v.contains(&Violation::SelfLoop(0)));
        assert!(v.contains(&Violation::NonpositiveWeight(0, 1)));
        assert!(v.contains(&Violation::NonBinaryLabel(0, 0)));
    }

    #[test]
    fn one_hot_slices() {
        let s = one_hot_features(3, 5, 0).unwrap();
        assert_eq!(s.indices(), &[0, 1, 2]);
        let s = one_hot_features(2, 5, 3).unwrap().to_dense();
        assert_eq!(s.row(0), &[0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(s.row(1), &[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            one_hot_features(4, 3, 0),
            Err(Error::FeatureOffset { .. })
        ));
    }

    #[test]
    fn gaussian_features_share_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, y) = FeatureInit::Gaussian { dim: 7 }.build(4, 2, &mut rng).unwrap();
        assert_eq!((x.rows(), x.cols(), y.rows(), y.cols()), (4, 7, 2, 7));
    }

    #[test]
    fn fingerprint_tracks_structure() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let b = SparseMatrix::from_triplets(2, 1, [(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        let g1 = graph(a.clone(), b.clone());
        let g2 = graph(a, SparseMatrix::from_triplets(2, 1, [(0, 0, 1.0)]).unwrap());
        assert_eq!(g1.fingerprint(), g1.clone().fingerprint());
        assert_ne!(g1.fingerprint(), g2.fingerprint());
        assert_eq!(g1.fingerprint().len(), 64);
    }
}
