//! Polynomial graph filters `G = sum_k g_k A^k` and the graph convolution
//! layer built from them.
//!
//! Filters are always applied by iterating the shift (`z <- A z`), so the
//! cost is `O(K * nnz)` and no matrix power is ever formed.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shift::{OperatorKind, ShiftOperator};

/// `sum_k coeffs[k] A^k x`.
pub fn apply_poly_filter(coeffs: &[f64], s: &ShiftOperator, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != s.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: s.num_nodes(),
            found: x.len(),
        });
    }
    let mut out = vec![0.0; x.len()];
    let mut z = x.to_vec();
    let mut next = vec![0.0; x.len()];
    for (k, &g) in coeffs.iter().enumerate() {
        if k > 0 {
            s.spmv_into(&z, &mut next)?;
            std::mem::swap(&mut z, &mut next);
        }
        for (o, zi) in out.iter_mut().zip(&z) {
            *o += g * zi;
        }
    }
    Ok(out)
}

/// `max_i |(A (G x))_i - (G (A x))_i|` for an arbitrary operator `G`.
pub fn commutator_residual<F>(s: &ShiftOperator, op: F, x: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let a_gx = s.spmv(&op(x)?)?;
    let g_ax = op(&s.spmv(x)?)?;
    Ok(a_gx
        .iter()
        .zip(&g_ax)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// How far the polynomial filter is from commuting with the shift.
pub fn shift_invariance_residual(coeffs: &[f64], s: &ShiftOperator, x: &[f64]) -> Result<f64> {
    commutator_residual(s, |v| apply_poly_filter(coeffs, s, v), x)
}

/// `[A^lo X, ..., A^hi X]` by repeated sparse products.
pub fn shift_powers(s: &ShiftOperator, x: ArrayView2<f64>, lo: usize, hi: usize) -> Result<Vec<Array2<f64>>> {
    let mut z = x.to_owned();
    let mut out = Vec::with_capacity(hi + 1 - lo.min(hi + 1));
    for k in 0..=hi {
        if k > 0 {
            z = s.spmm(z.view())?;
        }
        if k >= lo {
            out.push(z.clone());
        }
    }
    Ok(out)
}

/// Learnable coefficients `g[c][f][k]` of a bank of `C x F` polynomial filters
/// plus one bias per output feature.
///
/// Stored as one `C x F` block per polynomial degree, which is the layout the
/// layer map `Y = sum_k (A^k X) W_k + 1 b^T` consumes directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFilterParams {
    filter_size: usize,
    include_zeroth: bool,
    weights: Vec<Array2<f64>>,
    bias: Array1<f64>,
}

/// Parameter counts under the two accounting conventions in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParameterCount {
    /// Everything the optimizer updates, including biases.
    pub learnable: usize,
    /// Filter weights only, excluding the degree-0 term and the bias (`K * C * F` for degree `K`).
    pub table_convention: usize,
}

impl PolyFilterParams {
    pub fn zeros(in_width: usize, out_width: usize, filter_size: usize, include_zeroth: bool) -> Self {
        let terms = filter_size + usize::from(include_zeroth);
        PolyFilterParams {
            filter_size,
            include_zeroth,
            weights: vec![Array2::zeros((in_width, out_width)); terms],
            bias: Array1::zeros(out_width),
        }
    }

    /// Builds parameters from per-degree weight blocks. `weights[0]` is degree
    /// 0 when `include_zeroth`, otherwise degree 1.
    pub fn from_blocks(weights: Vec<Array2<f64>>, bias: Array1<f64>, include_zeroth: bool) -> Result<Self> {
        let first = weights
            .first()
            .ok_or_else(|| Error::ShapeMismatch("filter needs at least one weight block".into()))?;
        let dim = first.dim();
        if let Some(bad) = weights.iter().find(|w| w.dim() != dim) {
            return Err(Error::ShapeMismatch(format!(
                "weight blocks disagree: {:?} vs {:?}",
                dim,
                bad.dim()
            )));
        }
        if bias.len() != dim.1 {
            return Err(Error::DimensionMismatch {
                expected: dim.1,
                found: bias.len(),
            });
        }
        if weights.iter().flat_map(|w| w.iter()).chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("filter coefficients must be finite".into()));
        }
        let filter_size = weights.len() - usize::from(include_zeroth);
        Ok(PolyFilterParams {
            filter_size,
            include_zeroth,
            weights,
            bias,
        })
    }

    /// Uniform Glorot initialization `+-sqrt(6 / (C + F))` per block, zero bias.
    pub fn glorot<R: Rng>(in_width: usize, out_width: usize, filter_size: usize, include_zeroth: bool, rng: &mut R) -> Self {
        let mut p = Self::zeros(in_width, out_width, filter_size, include_zeroth);
        let limit = (6.0 / (in_width + out_width) as f64).sqrt();
        for w in &mut p.weights {
            w.mapv_inplace(|_| rng.random_range(-limit..limit));
        }
        p
    }

    pub fn in_width(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn out_width(&self) -> usize {
        self.weights[0].ncols()
    }

    /// Maximum polynomial degree `K`.
    pub fn filter_size(&self) -> usize {
        self.filter_size
    }

    pub fn includes_zeroth(&self) -> bool {
        self.include_zeroth
    }

    pub fn min_degree(&self) -> usize {
        usize::from(!self.include_zeroth)
    }

    /// Weight block for degree `k`, if that degree is part of the filter.
    pub fn block(&self, k: usize) -> Option<&Array2<f64>> {
        k.checked_sub(self.min_degree()).and_then(|i| self.weights.get(i))
    }

    pub fn blocks(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn blocks_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    /// Weight blocks and bias borrowed together.
    pub fn parts_mut(&mut self) -> (&mut [Array2<f64>], &mut Array1<f64>) {
        (&mut self.weights, &mut self.bias)
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut Array1<f64> {
        &mut self.bias
    }

    /// `g[c][f][k]`, zero for degrees outside the filter.
    pub fn coeff(&self, c: usize, f: usize, k: usize) -> f64 {
        self.block(k).map_or(0.0, |w| w[[c, f]])
    }

    pub fn parameter_count(&self) -> ParameterCount {
        let (c, f) = (self.in_width(), self.out_width());
        ParameterCount {
            learnable: c * f * self.weights.len() + f,
            table_convention: self.filter_size * c * f,
        }
    }
}

/// Sums `sum_t Z_t W_t + 1 b^T` for precomputed propagated inputs `Z_t`.
pub(crate) fn combine(propagated: &[Array2<f64>], blocks: &[Array2<f64>], bias: Option<&Array1<f64>>) -> Array2<f64> {
    let rows = propagated[0].nrows();
    let mut y = Array2::zeros((rows, blocks[0].ncols()));
    for (z, w) in propagated.iter().zip(blocks) {
        y += &z.dot(w);
    }
    if let Some(b) = bias {
        y += &b.view().insert_axis(Axis(0));
    }
    y
}

/// Graph convolution layer: column `f` of the output is
/// `sum_c sum_k g[c][f][k] A^k X[:, c] + b_f`.
pub fn layer_forward(p: &PolyFilterParams, s: &ShiftOperator, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != p.in_width() {
        return Err(Error::DimensionMismatch {
            expected: p.in_width(),
            found: x.ncols(),
        });
    }
    let z = shift_powers(s, x, p.min_degree(), p.filter_size())?;
    Ok(combine(&z, p.blocks(), Some(p.bias())))
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

/// `sum_k theta[k] T_k(L) x` with `T_0 = I`, `T_1 = L`, `T_k = 2 L T_{k-1} - T_{k-2}`.
pub fn chebyshev_apply(theta: &[f64], l_hat: &ShiftOperator, x: &[f64]) -> Result<Vec<f64>> {
    require_kind(l_hat, OperatorKind::RescaledLaplacian)?;
    let x = ndarray::ArrayView2::from_shape((x.len(), 1), x).expect("column view");
    let basis = chebyshev_basis(l_hat, x, theta.len().saturating_sub(1))?;
    let mut out = vec![0.0; x.nrows()];
    for (t, &th) in basis.iter().zip(theta) {
        for (o, v) in out.iter_mut().zip(t.iter()) {
            *o += th * v;
        }
    }
    Ok(out)
}

/// `[T_0(L) X, ..., T_K(L) X]` via the three-term recurrence.
pub fn chebyshev_basis(l_hat: &ShiftOperator, x: ArrayView2<f64>, order: usize) -> Result<Vec<Array2<f64>>> {
    if x.nrows() != l_hat.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: l_hat.num_nodes(),
            found: x.nrows(),
        });
    }
    let mut out = vec![x.to_owned()];
    if order >= 1 {
        out.push(l_hat.spmm(x)?);
    }
    for k in 2..=order {
        let mut next = l_hat.spmm(out[k - 1].view())?;
        next *= 2.0;
        next -= &out[k - 2];
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, make_cyclic_graph};
    use crate::shift::{normalize, rescaled_laplacian};
    use ndarray::array;

    fn triangle_tail() -> ShiftOperator {
        let g = build_graph(&[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 1.0), (2, 3, 1.0)], 4, false).unwrap();
        normalize(&g, OperatorKind::SymNormalized).unwrap()
    }

    #[test]
    fn identity_filter() {
        let s = triangle_tail();
        let x = [1.0, -2.0, 0.5, 3.0];
        assert_eq!(apply_poly_filter(&[1.0, 0.0, 0.0], &s, &x).unwrap(), x.to_vec());
        assert_eq!(shift_invariance_residual(&[1.0], &s, &x).unwrap(), 0.0);
    }

    #[test]
    fn cyclic_delay_filter() {
        let s = normalize(&make_cyclic_graph(4).unwrap(), OperatorKind::Raw).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(apply_poly_filter(&[0.0, 1.0], &s, &x).unwrap(), vec![4.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn dimension_checks() {
        let s = triangle_tail();
        assert!(matches!(
            apply_poly_filter(&[1.0], &s, &[1.0; 3]),
            Err(Error::DimensionMismatch { expected: 4, found: 3 })
        ));
        let p = PolyFilterParams::zeros(2, 1, 2, true);
        assert!(layer_forward(&p, &s, Array2::zeros((4, 3)).view()).is_err());
    }

    #[test]
    fn layer_reduces_to_shift() {
        let s = triangle_tail();
        let w = vec![array![[0.0]], array![[1.0]], array![[0.0]]];
        let p = PolyFilterParams::from_blocks(w, array![0.0], true).unwrap();
        let x = array![[1.0], [2.0], [-1.0], [0.25]];
        let y = layer_forward(&p, &s, x.view()).unwrap();
        let expected = s.spmv(x.column(0).as_slice().unwrap()).unwrap();
        assert_eq!(y.column(0).to_vec(), expected);
    }

    #[test]
    fn bias_broadcast() {
        let s = triangle_tail();
        let mut p = PolyFilterParams::zeros(3, 1, 2, true);
        p.bias_mut()[0] = 3.5;
        let y = layer_forward(&p, &s, Array2::from_elem((4, 3), 7.0).view()).unwrap();
        assert!(y.iter().all(|&v| v == 3.5));
    }

    #[test]
    fn parameter_counts() {
        let p = PolyFilterParams::zeros(5, 3, 2, true);
        assert_eq!(
            p.parameter_count(),
            ParameterCount {
                learnable: 5 * 3 * 3 + 3,
                table_convention: 2 * 5 * 3
            }
        );
        let q = PolyFilterParams::zeros(5, 3, 2, false);
        assert_eq!(q.parameter_count().learnable, 5 * 3 * 2 + 3);
        assert_eq!(q.parameter_count().table_convention, 30);
        assert_eq!(q.coeff(0, 0, 0), 0.0);
        assert!(q.block(0).is_none());
    }

    #[test]
    fn chebyshev_first_terms() {
        let g = build_graph(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], 4, false).unwrap();
        let l = rescaled_laplacian(&g, None).unwrap();
        let x = [1.0, 0.0, -1.0, 2.0];
        assert_eq!(chebyshev_apply(&[1.0, 0.0, 0.0], &l, &x).unwrap(), x.to_vec());
        assert_eq!(chebyshev_apply(&[0.0, 1.0, 0.0], &l, &x).unwrap(), l.spmv(&x).unwrap());
        let raw = normalize(&g, OperatorKind::Laplacian).unwrap();
        assert!(matches!(
            chebyshev_apply(&[1.0], &raw, &x),
            Err(Error::WrongOperatorKind { .. })
        ));
    }

    #[test]
    fn permutation_does_not_commute_with_path_shift() {
        // path graph 0-1-2 and the swap of vertices 0 and 1
        let g = build_graph(&[(0, 1, 1.0), (1, 2, 1.0)], 3, false).unwrap();
        let s = normalize(&g, OperatorKind::Raw).unwrap();
        let swap = |v: &[f64]| Ok(vec![v[1], v[0], v[2]]);
        let residual = commutator_residual(&s, swap, &[1.0, 2.0, 4.0]).unwrap();
        assert!(residual > 0.0);
        assert!(shift_invariance_residual(&[0.3, -1.0, 2.0], &s, &[1.0, 2.0, 4.0]).unwrap() <= 1e-10);
    }
}
