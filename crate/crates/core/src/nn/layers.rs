//! Graph convolution layers with hand-derived backward passes.
//!
//! Every layer is linear in its input and split into two stages:
//! `propagate` applies graph operators to the input (`A^k X`, `T_k(L) X`, ...)
//! and `combine` mixes the propagated features with the layer weights. The
//! propagated features are what the parameter gradients need, so the forward
//! pass keeps them.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{chebyshev_basis, combine, layer_forward, shift_powers, ParameterCount, PolyFilterParams};
use crate::graph::Graph;
use crate::shift::{normalize, rescaled_laplacian, OperatorKind, ShiftOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Tagcn,
    Gcn,
    Cheb,
    Dcnn,
}

impl LayerKind {
    pub fn operator_kind(self) -> OperatorKind {
        match self {
            LayerKind::Tagcn => OperatorKind::SymNormalized,
            LayerKind::Gcn => OperatorKind::GcnRenormalized,
            LayerKind::Cheb => OperatorKind::RescaledLaplacian,
            LayerKind::Dcnn => OperatorKind::RandomWalk,
        }
    }
}

impl std::str::FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tagcn" => Ok(LayerKind::Tagcn),
            "gcn" => Ok(LayerKind::Gcn),
            "cheb" => Ok(LayerKind::Cheb),
            "dcnn" => Ok(LayerKind::Dcnn),
            other => Err(Error::InvalidArgument(format!("unknown layer kind `{other}`"))),
        }
    }
}

/// Operators a model needs, each with its transpose for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct OperatorSet {
    ops: HashMap<OperatorKind, (ShiftOperator, ShiftOperator)>,
}

impl OperatorSet {
    pub fn for_kinds(g: &Graph, kinds: &[LayerKind]) -> Result<Self> {
        let mut set = OperatorSet::default();
        for kind in kinds {
            let op_kind = kind.operator_kind();
            if set.ops.contains_key(&op_kind) {
                continue;
            }
            let op = match op_kind {
                OperatorKind::RescaledLaplacian => rescaled_laplacian(g, None)?,
                other => normalize(g, other)?,
            };
            set.insert(op);
        }
        Ok(set)
    }

    pub fn insert(&mut self, op: ShiftOperator) {
        let t = op.transpose();
        self.ops.insert(op.kind(), (op, t));
    }

    pub fn get(&self, kind: OperatorKind) -> Result<&ShiftOperator> {
        self.ops.get(&kind).map(|p| &p.0).ok_or_else(|| missing(kind))
    }

    pub fn transposed(&self, kind: OperatorKind) -> Result<&ShiftOperator> {
        self.ops.get(&kind).map(|p| &p.1).ok_or_else(|| missing(kind))
    }

    pub fn num_nodes(&self) -> Option<usize> {
        self.ops.values().next().map(|p| p.0.num_nodes())
    }
}

fn missing(kind: OperatorKind) -> Error {
    Error::InvalidArgument(format!("operator set has no {kind:?} operator"))
}

fn require_kind(s: &ShiftOperator, expected: OperatorKind) -> Result<()> {
    if s.kind() != expected {
        return Err(Error::WrongOperatorKind {
            expected,
            found: s.kind(),
        });
    }
    Ok(())
}

/// One layer's parameters. The same type holds parameter gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Layer {
    /// `Y = sum_k (A^k X) W_k + 1 b^T` over the symmetric-normalized adjacency.
    Tagcn(PolyFilterParams),
    /// `Y = A_hat X W` over the renormalized adjacency.
    Gcn { weight: Array2<f64> },
    /// `Y = sum_k T_k(L_hat) X W_k + 1 b^T` over the rescaled Laplacian.
    Cheb(PolyFilterParams),
    /// Output column `h * C + c` is `gains[h][c] * (P^h X)[:, c]` for the random-walk matrix `P`.
    Dcnn { gains: Array2<f64> },
}

impl Layer {
    pub fn tagcn<R: Rng>(in_width: usize, out_width: usize, filter_size: usize, include_zeroth: bool, rng: &mut R) -> Self {
        Layer::Tagcn(PolyFilterParams::glorot(in_width, out_width, filter_size, include_zeroth, rng))
    }

    pub fn gcn<R: Rng>(in_width: usize, out_width: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_width + out_width) as f64).sqrt();
        Layer::Gcn {
            weight: Array2::from_shape_fn((in_width, out_width), |_| rng.random_range(-limit..limit)),
        }
    }

    pub fn cheb<R: Rng>(in_width: usize, out_width: usize, order: usize, rng: &mut R) -> Self {
        Layer::Cheb(PolyFilterParams::glorot(in_width, out_width, order, true, rng))
    }

    /// DCNN layer over `hops + 1` diffusion steps (`0..=hops`).
    pub fn dcnn<R: Rng>(in_width: usize, hops: usize, rng: &mut R) -> Self {
        Layer::Dcnn {
            gains: Array2::from_shape_fn((hops + 1, in_width), |_| rng.random_range(0.5..1.5)),
        }
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Tagcn(_) => LayerKind::Tagcn,
            Layer::Gcn { .. } => LayerKind::Gcn,
            Layer::Cheb(_) => LayerKind::Cheb,
            Layer::Dcnn { .. } => LayerKind::Dcnn,
        }
    }

    pub fn in_width(&self) -> usize {
        match self {
            Layer::Tagcn(p) | Layer::Cheb(p) => p.in_width(),
            Layer::Gcn { weight } => weight.nrows(),
            Layer::Dcnn { gains } => gains.ncols(),
        }
    }

    pub fn out_width(&self) -> usize {
        match self {
            Layer::Tagcn(p) | Layer::Cheb(p) => p.out_width(),
            Layer::Gcn { weight } => weight.ncols(),
            Layer::Dcnn { gains } => gains.len(),
        }
    }

    pub fn parameter_count(&self) -> ParameterCount {
        match self {
            Layer::Tagcn(p) | Layer::Cheb(p) => p.parameter_count(),
            Layer::Gcn { weight } => ParameterCount {
                learnable: weight.len(),
                table_convention: weight.len(),
            },
            Layer::Dcnn { gains } => ParameterCount {
                learnable: gains.len(),
                table_convention: gains.len(),
            },
        }
    }

    /// Same shape, all zeros.
    pub fn zeros_like(&self) -> Layer {
        let mut z = self.clone();
        z.params_mut().into_iter().for_each(|s| s.fill(0.0));
        z
    }

    /// Flat views of every parameter array, in a fixed order.
    pub fn params(&self) -> Vec<&[f64]> {
        match self {
            Layer::Tagcn(p) | Layer::Cheb(p) => p
                .blocks()
                .iter()
                .map(|w| w.as_slice().expect("standard layout"))
                .chain(std::iter::once(p.bias().as_slice().expect("contiguous")))
                .collect(),
            Layer::Gcn { weight } => vec![weight.as_slice().expect("standard layout")],
            Layer::Dcnn { gains } => vec![gains.as_slice().expect("standard layout")],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Tagcn(p) | Layer::Cheb(p) => {
                let (blocks, bias) = split_params(p);
                blocks.chain(std::iter::once(bias)).collect()
            }
            Layer::Gcn { weight } => vec![weight.as_slice_mut().expect("standard layout")],
            Layer::Dcnn { gains } => vec![gains.as_slice_mut().expect("standard layout")],
        }
    }

    /// Flat views of the weights only (no biases); the target of weight decay.
    pub fn weights_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Tagcn(p) | Layer::Cheb(p) => split_params(p).0.collect(),
            _ => self.params_mut(),
        }
    }

    pub fn weights(&self) -> Vec<&[f64]> {
        let mut all = self.params();
        if matches!(self, Layer::Tagcn(_) | Layer::Cheb(_)) {
            all.pop();
        }
        all
    }

    fn check_input(&self, op: &ShiftOperator, x: ArrayView2<f64>) -> Result<()> {
        require_kind(op, self.kind().operator_kind())?;
        if x.ncols() != self.in_width() {
            return Err(Error::DimensionMismatch {
                expected: self.in_width(),
                found: x.ncols(),
            });
        }
        if x.nrows() != op.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: op.num_nodes(),
                found: x.nrows(),
            });
        }
        Ok(())
    }

    /// Graph-operator stage of the forward pass.
    pub fn propagate(&self, op: &ShiftOperator, x: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        self.check_input(op, x)?;
        match self {
            Layer::Tagcn(p) => shift_powers(op, x, p.min_degree(), p.filter_size()),
            Layer::Gcn { .. } => Ok(vec![op.spmm(x)?]),
            Layer::Cheb(p) => chebyshev_basis(op, x, p.filter_size()),
            Layer::Dcnn { gains } => shift_powers(op, x, 0, gains.nrows() - 1),
        }
    }

    /// Mixing stage of the forward pass.
    pub fn combine(&self, propagated: &[Array2<f64>]) -> Result<Array2<f64>> {
        self.check_propagated(propagated)?;
        Ok(match self {
            Layer::Tagcn(p) | Layer::Cheb(p) => combine(propagated, p.blocks(), Some(p.bias())),
            Layer::Gcn { weight } => propagated[0].dot(weight),
            Layer::Dcnn { gains } => {
                let (n, c) = propagated[0].dim();
                let mut y = Array2::zeros((n, gains.len()));
                for (h, z) in propagated.iter().enumerate() {
                    for ch in 0..c {
                        let g = gains[[h, ch]];
                        y.column_mut(h * c + ch).assign(&z.column(ch).mapv(|v| g * v));
                    }
                }
                y
            }
        })
    }

    pub fn forward(&self, op: &ShiftOperator, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.combine(&self.propagate(op, x)?)
    }

    fn terms(&self) -> usize {
        match self {
            Layer::Tagcn(p) | Layer::Cheb(p) => p.blocks().len(),
            Layer::Gcn { .. } => 1,
            Layer::Dcnn { gains } => gains.nrows(),
        }
    }

    fn check_propagated(&self, propagated: &[Array2<f64>]) -> Result<()> {
        if propagated.len() != self.terms() {
            return Err(Error::StaleState(format!(
                "expected {} propagated terms, got {}",
                self.terms(),
                propagated.len()
            )));
        }
        if let Some(z) = propagated.iter().find(|z| z.ncols() != self.in_width()) {
            return Err(Error::StaleState(format!(
                "propagated width {} does not match layer input width {}",
                z.ncols(),
                self.in_width()
            )));
        }
        Ok(())
    }

    /// Gradients of the parameters given the upstream gradient `g` of the layer output.
    pub fn param_grads(&self, propagated: &[Array2<f64>], g: ArrayView2<f64>) -> Result<Layer> {
        self.check_propagated(propagated)?;
        if g.ncols() != self.out_width() || g.nrows() != propagated[0].nrows() {
            return Err(Error::StaleState(format!(
                "upstream gradient shape {:?} does not match layer output",
                g.dim()
            )));
        }
        let mut grads = self.zeros_like();
        match (&mut grads, self) {
            (Layer::Tagcn(dp), Layer::Tagcn(_)) | (Layer::Cheb(dp), Layer::Cheb(_)) => {
                for (dw, z) in dp.blocks_mut().iter_mut().zip(propagated) {
                    *dw = z.t().dot(&g);
                }
                *dp.bias_mut() = g.sum_axis(Axis(0));
            }
            (Layer::Gcn { weight: dw }, Layer::Gcn { .. }) => {
                *dw = propagated[0].t().dot(&g);
            }
            (Layer::Dcnn { gains: dg }, Layer::Dcnn { .. }) => {
                let c = self.in_width();
                for (h, z) in propagated.iter().enumerate() {
                    for ch in 0..c {
                        dg[[h, ch]] = z.column(ch).dot(&g.column(h * c + ch));
                    }
                }
            }
            _ => unreachable!("zeros_like preserves the variant"),
        }
        Ok(grads)
    }

    /// Gradient with respect to the layer input, using the transposed operator.
    pub fn input_grad(&self, op_t: &ShiftOperator, g: ArrayView2<f64>) -> Result<Array2<f64>> {
        require_kind(op_t, self.kind().operator_kind())?;
        if g.ncols() != self.out_width() {
            return Err(Error::DimensionMismatch {
                expected: self.out_width(),
                found: g.ncols(),
            });
        }
        match self {
            Layer::Tagcn(p) => {
                // sum_k (A^T)^k G W_k^T by Horner from the top degree down
                let blocks = p.blocks();
                let mut acc = g.dot(&blocks[blocks.len() - 1].t());
                for w in blocks[..blocks.len() - 1].iter().rev() {
                    acc = op_t.spmm(acc.view())?;
                    acc += &g.dot(&w.t());
                }
                for _ in 0..p.min_degree() {
                    acc = op_t.spmm(acc.view())?;
                }
                Ok(acc)
            }
            Layer::Gcn { weight } => op_t.spmm(g.dot(&weight.t()).view()),
            Layer::Cheb(p) => {
                // Clenshaw: sum_k T_k(M) H_k with M = L_hat^T
                let h: Vec<Array2<f64>> = p.blocks().iter().map(|w| g.dot(&w.t())).collect();
                let order = h.len() - 1;
                if order == 0 {
                    return Ok(h[0].clone());
                }
                let (n, c) = h[0].dim();
                let mut b1 = Array2::<f64>::zeros((n, c));
                let mut b2 = Array2::<f64>::zeros((n, c));
                for hk in h[1..].iter().rev() {
                    let mut bk = op_t.spmm(b1.view())?;
                    bk *= 2.0;
                    bk -= &b2;
                    bk += hk;
                    b2 = std::mem::replace(&mut b1, bk);
                }
                let mut out = op_t.spmm(b1.view())?;
                out -= &b2;
                out += &h[0];
                Ok(out)
            }
            Layer::Dcnn { gains } => {
                let (hops, c) = gains.dim();
                let n = g.nrows();
                let term = |h: usize| {
                    let mut m = Array2::zeros((n, c));
                    for ch in 0..c {
                        m.column_mut(ch).assign(&g.column(h * c + ch).mapv(|v| gains[[h, ch]] * v));
                    }
                    m
                };
                let mut acc = term(hops - 1);
                for h in (0..hops - 1).rev() {
                    acc = op_t.spmm(acc.view())?;
                    acc += &term(h);
                }
                Ok(acc)
            }
        }
    }
}

fn split_params(p: &mut PolyFilterParams) -> (impl Iterator<Item = &mut [f64]>, &mut [f64]) {
    let (blocks, bias) = p.parts_mut();
    let blocks = blocks.iter_mut().map(|w| w.as_slice_mut().expect("standard layout"));
    (blocks, bias.as_slice_mut().expect("contiguous"))
}

/// TAGCN layer forward pass over any shift operator. Models always use the
/// symmetric-normalized adjacency; passing `A_hat` with a single degree-1
/// block reproduces a GCN layer.
pub fn tagcn_forward(layer: &Layer, s: &ShiftOperator, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    expect_kind(layer, LayerKind::Tagcn)?;
    match layer {
        Layer::Tagcn(p) => layer_forward(p, s, x),
        _ => unreachable!("kind checked above"),
    }
}

/// GCN layer forward pass `Y = A_hat X W`.
pub fn gcn_forward(layer: &Layer, s_hat: &ShiftOperator, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    expect_kind(layer, LayerKind::Gcn)?;
    layer.forward(s_hat, x)
}

/// DCNN layer forward pass.
pub fn dcnn_forward(layer: &Layer, p: &ShiftOperator, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    expect_kind(layer, LayerKind::Dcnn)?;
    layer.forward(p, x)
}

fn expect_kind(layer: &Layer, kind: LayerKind) -> Result<()> {
    if layer.kind() != kind {
        return Err(Error::InvalidArgument(format!(
            "expected a {kind:?} layer, got {:?}",
            layer.kind()
        )));
    }
    Ok(())
}
