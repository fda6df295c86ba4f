//! Numerical kernels: sparse-dense products, graph convolution layers with
//! their reverse-mode counterparts, softmax and the two classification losses.

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::StackedFeatures;
use crate::matrix::{DenseMatrix, SparseMatrix};

/// Probabilities are clamped to this before taking a log.
pub const LOG_CLAMP: f64 = 1e-12;

/// `s · d`
pub fn spmm(s: &SparseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
    s.mul_dense(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, m: &DenseMatrix) -> DenseMatrix {
        match self {
            Self::Relu => m.map(|v| v.max(0.0)),
            Self::Identity => m.clone(),
        }
    }
}

/// Input of a convolution after dropout.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerInput {
    Features(StackedFeatures),
    Hidden(DenseMatrix),
}

impl LayerInput {
    fn shape(&self) -> (usize, usize) {
        match self {
            Self::Features(f) => (f.rows(), f.cols()),
            Self::Hidden(h) => h.shape(),
        }
    }

    fn matmul(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Self::Features(f) => f.matmul(w),
            Self::Hidden(h) => h.matmul(w),
        }
    }

    fn t_matmul(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Self::Features(f) => f.t_matmul(g),
            Self::Hidden(h) => h.t_matmul(g),
        }
    }
}

/// What one layer's forward pass leaves behind for backprop.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Input after dropout.
    pub input: LayerInput,
    /// Per-entry dropout multipliers (0 or `1/(1-p)`) for hidden inputs.
    pub mask: Option<DenseMatrix>,
    pub pre_activation: DenseMatrix,
    pub output: DenseMatrix,
    pub activation: Activation,
}

/// Dropout settings for one forward pass. `rng` is only drawn from when
/// training with `p > 0`.
pub struct Dropout<'a, R: Rng + ?Sized> {
    pub p: f64,
    pub training: bool,
    pub rng: &'a mut R,
}

impl<R: Rng + ?Sized> Dropout<'_, R> {
    fn active(&self) -> bool {
        self.training && self.p > 0.0
    }
}

fn check_dropout(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!("dropout must lie in [0,1), got {p}")));
    }
    Ok(())
}

/// One convolution `act(op · drop(H) · W)`.
pub fn gcn_layer_forward<R: Rng + ?Sized>(
    op: &SparseMatrix,
    input: LayerInput,
    w: &DenseMatrix,
    activation: Activation,
    dropout: &mut Dropout<'_, R>,
) -> Result<(DenseMatrix, LayerCache)> {
    check_dropout(dropout.p)?;
    let (rows, cols) = input.shape();
    if op.cols() != rows || cols != w.rows() {
        return Err(Error::Shape {
            op: "gcn_layer",
            left: op.shape(),
            right: (rows, cols),
        });
    }
    let (input, mask) = if dropout.active() {
        match input {
            LayerInput::Features(f) => (LayerInput::Features(f.dropout(dropout.p, dropout.rng)), None),
            LayerInput::Hidden(h) => {
                let keep = 1.0 / (1.0 - dropout.p);
                let p = dropout.p;
                let rng = &mut *dropout.rng;
                let mask = DenseMatrix::from_fn(h.rows(), h.cols(), |_, _| {
                    if rng.gen::<f64>() < p {
                        0.0
                    } else {
                        keep
                    }
                });
                (LayerInput::Hidden(h.hadamard(&mask)?), Some(mask))
            }
        }
    } else {
        (input, None)
    };
    let pre_activation = spmm(op, &input.matmul(w)?)?;
    let output = activation.apply(&pre_activation);
    Ok((
        output.clone(),
        LayerCache {
            input,
            mask,
            pre_activation,
            output,
            activation,
        },
    ))
}

/// Gradients of one convolution given `∂L/∂output`: returns `∂L/∂W` and,
/// for hidden inputs, `∂L/∂H` (the input before dropout).
pub fn gcn_layer_backward(
    op: &SparseMatrix,
    w: &DenseMatrix,
    cache: &LayerCache,
    grad_output: &DenseMatrix,
) -> Result<(DenseMatrix, Option<DenseMatrix>)> {
    let grad_pre = match cache.activation {
        Activation::Identity => grad_output.clone(),
        Activation::Relu => {
            let gate = cache.pre_activation.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
            grad_output.hadamard(&gate)?
        }
    };
    let back = op.t_mul_dense(&grad_pre)?;
    let grad_w = cache.input.t_matmul(&back)?;
    let grad_input = match &cache.input {
        LayerInput::Hidden(_) => {
            let g = back.matmul_t(w)?;
            Some(match &cache.mask {
                Some(mask) => g.hadamard(mask)?,
                None => g,
            })
        }
        LayerInput::Features(_) => None,
    };
    Ok((grad_w, grad_input))
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(o: &DenseMatrix) -> DenseMatrix {
    let mut z = o.clone();
    for r in 0..z.rows() {
        let row = z.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    z
}

/// `-Σ targets ⊙ ln Z` over all rows.
pub fn single_label_loss(z: &DenseMatrix, targets: &DenseMatrix) -> f64 {
    assert_eq!(z.shape(), targets.shape());
    z.as_slice()
        .iter()
        .zip(targets.as_slice())
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| -t * p.max(LOG_CLAMP).ln())
        .sum()
}

/// Softmax cross-entropy on logits: returns the loss and `∂L/∂O`.
pub fn softmax_cross_entropy(o: &DenseMatrix, targets: &DenseMatrix) -> (f64, DenseMatrix) {
    let z = softmax_rows(o);
    let loss = single_label_loss(&z, targets);
    let mut grad = z;
    for r in 0..grad.rows() {
        let mass: f64 = targets.row(r).iter().sum();
        for (g, &t) in grad.row_mut(r).iter_mut().zip(targets.row(r)) {
            *g = *g * mass - t;
        }
    }
    (loss, grad)
}

/// `log(1 + e^{-o})` without overflow.
#[inline]
pub fn softplus_neg(o: f64) -> f64 {
    (-o).max(0.0) + (-o.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(o: f64) -> f64 {
    if o >= 0.0 {
        1.0 / (1.0 + (-o).exp())
    } else {
        let e = o.exp();
        e / (1.0 + e)
    }
}

fn check_mask(mask: &[usize], rows: usize) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if let Some(&i) = mask.iter().find(|&&i| i >= rows) {
        return Err(Error::Shape {
            op: "multi_label_loss mask",
            left: (rows, 0),
            right: (i, 0),
        });
    }
    Ok(())
}

/// Sigmoid binary cross-entropy summed over the masked rows:
/// `Σ_i Σ_r (1 - y) o + log(1 + e^{-o})`.
pub fn multi_label_loss(o: &DenseMatrix, targets: &DenseMatrix, mask: &[usize]) -> Result<f64> {
    check_mask(mask, o.rows())?;
    Ok(mask
        .iter()
        .map(|&i| {
            o.row(i)
                .iter()
                .zip(targets.row(i))
                .map(|(&v, &y)| (1.0 - y) * v + softplus_neg(v))
                .sum::<f64>()
        })
        .sum())
}

/// Loss and `∂L/∂O` (nonzero only on masked rows).
pub fn multi_label_loss_grad(
    o: &DenseMatrix,
    targets: &DenseMatrix,
    mask: &[usize],
) -> Result<(f64, DenseMatrix)> {
    let loss = multi_label_loss(o, targets, mask)?;
    let mut grad = DenseMatrix::zeros(o.rows(), o.cols());
    for &i in mask {
        for ((g, &v), &y) in grad.row_mut(i).iter_mut().zip(o.row(i)).zip(targets.row(i)) {
            *g += sigmoid(v) - y;
        }
    }
    Ok((loss, grad))
}
