//! Edge-list and label-membership parsing, dataset statistics and the
//! planted-partition benchmark generator.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::builder::build_label_cooccurrence;
use crate::error::{Error, Result};
use crate::graph::{FeatureInit, MultiLabelGraph};
use crate::matrix::SparseMatrix;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Delimiter {
    Comma,
    Tab,
    /// Any run of ASCII whitespace.
    Whitespace,
}

impl Delimiter {
    fn detect(line: &str) -> Self {
        if line.contains(',') {
            Self::Comma
        } else if line.contains('\t') {
            Self::Tab
        } else {
            Self::Whitespace
        }
    }

    fn split(self, line: &str) -> Vec<&str> {
        match self {
            Self::Comma => line.split(',').map(str::trim).collect(),
            Self::Tab => line.split('\t').map(str::trim).collect(),
            Self::Whitespace => line.split_whitespace().collect(),
        }
    }
}

/// Yields `(line number, fields)` for every data line, skipping blanks and
/// `#` comments. The delimiter is fixed by the first data line unless given.
fn data_lines<R: BufRead>(
    reader: R,
    delimiter: Option<Delimiter>,
) -> impl Iterator<Item = Result<(usize, Vec<String>)>> {
    let mut delim = delimiter;
    reader
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| {
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                return None;
            }
            let d = *delim.get_or_insert_with(|| Delimiter::detect(trimmed));
            let fields = d.split(trimmed).into_iter().map(str::to_owned).collect();
            Some(Ok((i + 1, fields)))
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    /// Undirected edges in first-appearance order, oriented as first seen.
    pub edges: Vec<(String, String, f64)>,
    /// Input lines folded into an earlier pair (either orientation).
    pub merged_duplicates: usize,
    pub self_loops_dropped: usize,
}

pub fn parse_edge_list<R: BufRead>(reader: R, delimiter: Option<Delimiter>) -> Result<EdgeList> {
    let mut out = EdgeList {
        edges: Vec::new(),
        merged_duplicates: 0,
        self_loops_dropped: 0,
    };
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for item in data_lines(reader, delimiter) {
        let (line, fields) = item?;
        let (src, dst, weight) = match fields.as_slice() {
            [s, d] => (s, d, 1.0),
            [s, d, w] => {
                let w: f64 = w.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad weight {w:?}"),
                })?;
                if !w.is_finite() {
                    return Err(Error::Parse {
                        line,
                        msg: format!("non-finite weight {w}"),
                    });
                }
                (s, d, w)
            }
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 2 or 3 fields, found {}", fields.len()),
                })
            }
        };
        if src.is_empty() || dst.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty node id".into(),
            });
        }
        if weight <= 0.0 {
            return Err(Error::NonpositiveWeight { line, weight });
        }
        if src == dst {
            out.self_loops_dropped += 1;
            continue;
        }
        let key = if src < dst {
            (src.clone(), dst.clone())
        } else {
            (dst.clone(), src.clone())
        };
        match seen.get(&key) {
            Some(&pos) => {
                out.edges[pos].2 += weight;
                out.merged_duplicates += 1;
            }
            None => {
                seen.insert(key, out.edges.len());
                out.edges.push((src.clone(), dst.clone(), weight));
            }
        }
    }
    Ok(out)
}

/// Distinct `(node, label)` pairs in first-appearance order.
pub fn parse_label_assignments<R: BufRead>(
    reader: R,
    delimiter: Option<Delimiter>,
) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for item in data_lines(reader, delimiter) {
        let (line, fields) = item?;
        let [node, label] = fields.as_slice() else {
            return Err(Error::Parse {
                line,
                msg: format!("expected 2 fields, found {}", fields.len()),
            });
        };
        if node.is_empty() || label.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty id".into(),
            });
        }
        if seen.insert((node.clone(), label.clone())) {
            out.push((node.clone(), label.clone()));
        }
    }
    Ok(out)
}

/// Interns string ids into dense indices in first-appearance order.
#[derive(Default)]
struct Interner {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    fn get(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        i
    }
}

/// Assembles a graph from parsed records. Nodes are numbered by first
/// appearance in the edge list, then in the assignments; labels by first
/// appearance in the assignments.
pub fn graph_from_records<R: Rng + ?Sized>(
    edges: &EdgeList,
    assignments: &[(String, String)],
    features: FeatureInit,
    rng: &mut R,
) -> Result<MultiLabelGraph> {
    if assignments.is_empty() {
        return Err(Error::NoLabels);
    }
    let mut nodes = Interner::default();
    let mut labels = Interner::default();
    let mut adj = Vec::with_capacity(edges.edges.len() * 2);
    for (s, d, w) in &edges.edges {
        let (i, j) = (nodes.get(s), nodes.get(d));
        adj.push((i, j, *w));
        adj.push((j, i, *w));
    }
    let memberships: Vec<(usize, usize, f64)> = assignments
        .iter()
        .map(|(v, l)| (nodes.get(v), labels.get(l), 1.0))
        .collect();
    let n = nodes.ids.len();
    let m = labels.ids.len();
    MultiLabelGraph::with_features(
        SparseMatrix::from_triplets(n, n, adj)?,
        SparseMatrix::from_triplets(n, m, memberships)?,
        nodes.ids,
        labels.ids,
        features,
        rng,
    )
}

/// Loads an edge file and a label file. Gaussian features are drawn from the
/// `Features` stream of `seed`.
pub fn load_dataset(
    edge_path: &Path,
    label_path: &Path,
    delimiter: Option<Delimiter>,
    features: FeatureInit,
    seed: u64,
) -> Result<MultiLabelGraph> {
    let edges = parse_edge_list(BufReader::new(File::open(edge_path)?), delimiter)?;
    let assignments = parse_label_assignments(BufReader::new(File::open(label_path)?), delimiter)?;
    graph_from_records(
        &edges,
        &assignments,
        features,
        &mut rng::stream(seed, Stream::Features),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub label_count: usize,
    /// Unordered label pairs sharing at least one node.
    pub cooccurrence_count: usize,
}

pub fn dataset_stats(g: &MultiLabelGraph) -> DatasetStats {
    let a = g.adjacency();
    let edge_count = a.iter().filter(|&(i, j, _)| i < j).count();
    let c = build_label_cooccurrence(g.labels());
    let cooccurrence_count = c.iter().filter(|&(r, s, v)| r < s && v > 0.0).count();
    DatasetStats {
        node_count: g.node_count(),
        edge_count,
        label_count: g.label_count(),
        cooccurrence_count,
    }
}

/// Planted-partition benchmark with correlated label pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub communities: usize,
    pub community_size: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Probability that a node also carries its community's paired label.
    pub rho: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            communities: 2,
            community_size: 100,
            p_in: 0.1,
            p_out: 0.02,
            rho: 0.8,
            seed: 0,
        }
    }
}

/// Community `c` holds nodes `c·size..(c+1)·size`, has home label `c` and
/// paired label `k + c`. Labels that end up with no members are dropped, so
/// with `rho = 0` only the `k` home labels remain.
pub fn generate_synthetic(cfg: &SyntheticConfig, features: FeatureInit) -> Result<MultiLabelGraph> {
    for (name, p) in [("p_in", cfg.p_in), ("p_out", cfg.p_out), ("rho", cfg.rho)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("{name} must lie in [0,1], got {p}")));
        }
    }
    if cfg.communities < 2 {
        return Err(Error::Config("need at least 2 communities".into()));
    }
    if cfg.community_size == 0 {
        return Err(Error::Config("community size must be positive".into()));
    }
    let k = cfg.communities;
    let n = k * cfg.community_size;
    let community = |i: usize| i / cfg.community_size;
    let mut rng = rng::stream(cfg.seed, Stream::Synthetic);

    let mut adj = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if community(i) == community(j) {
                cfg.p_in
            } else {
                cfg.p_out
            };
            if rng.gen::<f64>() < p {
                adj.push((i, j, 1.0));
                adj.push((j, i, 1.0));
            }
        }
    }

    let mut members = Vec::new();
    let mut used = vec![false; 2 * k];
    for i in 0..n {
        let c = community(i);
        members.push((i, c));
        used[c] = true;
        if rng.gen::<f64>() < cfg.rho {
            members.push((i, k + c));
            used[k + c] = true;
        }
    }
    let mut remap = vec![usize::MAX; 2 * k];
    let mut label_ids = Vec::new();
    for (l, _) in used.iter().enumerate().filter(|(_, &u)| u) {
        remap[l] = label_ids.len();
        label_ids.push(if l < k {
            format!("home{l}")
        } else {
            format!("pair{}", l - k)
        });
    }
    let b = SparseMatrix::from_triplets(
        n,
        label_ids.len(),
        members.into_iter().map(|(i, l)| (i, remap[l], 1.0)),
    )?;
    MultiLabelGraph::with_features(
        SparseMatrix::from_triplets(n, n, adj)?,
        b,
        (0..n).map(|i| i.to_string()).collect(),
        label_ids,
        features,
        &mut rng::stream(cfg.seed, Stream::Features),
    )
}
