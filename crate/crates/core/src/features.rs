//! Input feature blocks that may be sparse (one-hot) or dense (learned or
//! random), and the vertically stacked `[primary; attribute]` matrices fed to
//! the first convolution of each network.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureBlock {
    Sparse(SparseMatrix),
    Dense(DenseMatrix),
}

impl FeatureBlock {
    pub fn rows(&self) -> usize {
        match self {
            Self::Sparse(s) => s.rows(),
            Self::Dense(d) => d.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Self::Sparse(s) => s.cols(),
            Self::Dense(d) => d.cols(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Self::Sparse(s) => s.to_dense(),
            Self::Dense(d) => d.clone(),
        }
    }

    /// `self · w`
    pub fn matmul(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Self::Sparse(s) => s.mul_dense(w),
            Self::Dense(d) => d.matmul(w),
        }
    }

    /// `selfᵀ · g`
    pub fn t_matmul(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Self::Sparse(s) => s.t_mul_dense(g),
            Self::Dense(d) => d.t_matmul(g),
        }
    }

    /// Inverted dropout: each entry survives with probability `1 - p` and is
    /// rescaled by `1 / (1 - p)`. For sparse blocks only stored entries are
    /// sampled; implicit zeros stay zero either way.
    pub fn dropout<R: Rng + ?Sized>(&self, p: f64, rng: &mut R) -> Self {
        if p == 0.0 {
            return self.clone();
        }
        let keep = 1.0 / (1.0 - p);
        let mut draw = |v: f64| if rng.gen::<f64>() < p { 0.0 } else { v * keep };
        match self {
            Self::Sparse(s) => Self::Sparse(s.map_values(&mut draw)),
            Self::Dense(d) => {
                let mut out = d.clone();
                for v in out.as_mut_slice() {
                    *v = draw(*v);
                }
                Self::Dense(out)
            }
        }
    }
}

impl From<DenseMatrix> for FeatureBlock {
    fn from(d: DenseMatrix) -> Self {
        Self::Dense(d)
    }
}

impl From<SparseMatrix> for FeatureBlock {
    fn from(s: SparseMatrix) -> Self {
        Self::Sparse(s)
    }
}

/// `[top; bottom]`, kept as two blocks so a sparse half stays sparse after
/// the other half has been replaced by a dense injected block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedFeatures {
    pub top: FeatureBlock,
    pub bottom: FeatureBlock,
}

impl StackedFeatures {
    pub fn new(top: FeatureBlock, bottom: FeatureBlock) -> Result<Self> {
        if top.cols() != bottom.cols() {
            return Err(Error::Shape {
                op: "features::stack",
                left: (top.rows(), top.cols()),
                right: (bottom.rows(), bottom.cols()),
            });
        }
        Ok(Self { top, bottom })
    }

    pub fn rows(&self) -> usize {
        self.top.rows() + self.bottom.rows()
    }

    pub fn cols(&self) -> usize {
        self.top.cols()
    }

    pub fn matmul(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        DenseMatrix::vstack(&self.top.matmul(w)?, &self.bottom.matmul(w)?)
    }

    pub fn t_matmul(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        if g.rows() != self.rows() {
            return Err(Error::Shape {
                op: "features::t_matmul",
                left: (self.rows(), self.cols()),
                right: g.shape(),
            });
        }
        let split = self.top.rows();
        let mut out = self.top.t_matmul(&g.slice_rows(0, split))?;
        out.add_assign(&self.bottom.t_matmul(&g.slice_rows(split, g.rows()))?)?;
        Ok(out)
    }

    pub fn dropout<R: Rng + ?Sized>(&self, p: f64, rng: &mut R) -> Self {
        Self {
            top: self.top.dropout(p, rng),
            bottom: self.bottom.dropout(p, rng),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::vstack(&self.top.to_dense(), &self.bottom.to_dense())
            .expect("blocks share width")
    }
}
