//! Shift operators: normalized forms of a graph's adjacency matrix and the
//! sparse products that apply them.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{check_permutation, degrees, Graph};
use crate::power;

/// Power-iteration budget used to estimate the Laplacian's largest eigenvalue.
pub const LAMBDA_MAX_STEPS: usize = 100;
pub const LAMBDA_MAX_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// `D^{-1/2} A D^{-1/2}`
    SymNormalized,
    /// `D~^{-1/2} (A + I) D~^{-1/2}` with `D~` the row sums of `A + I`.
    GcnRenormalized,
    /// `D^{-1} A`
    RandomWalk,
    /// `D - A`, undirected graphs only.
    Laplacian,
    /// `(2 / lambda_max) (D - A) - I`
    RescaledLaplacian,
    /// The weighted adjacency matrix itself.
    Raw,
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sym-normalized" | "sym" => OperatorKind::SymNormalized,
            "gcn-renormalized" | "gcn" => OperatorKind::GcnRenormalized,
            "random-walk" | "rw" => OperatorKind::RandomWalk,
            "laplacian" => OperatorKind::Laplacian,
            "rescaled-laplacian" => OperatorKind::RescaledLaplacian,
            "raw" => OperatorKind::Raw,
            other => return Err(Error::InvalidArgument(format!("unknown operator kind `{other}`"))),
        })
    }
}

/// Sparse real `N x N` matrix tagged with the normalization that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOperator {
    kind: OperatorKind,
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

pub fn normalize(g: &Graph, kind: OperatorKind) -> Result<ShiftOperator> {
    let n = g.num_nodes();
    match kind {
        OperatorKind::Raw => Ok(ShiftOperator::from_graph_values(g, kind, g.weights().to_vec())),
        OperatorKind::SymNormalized => {
            let d = checked_degrees(g, 0.0)?;
            // d_i d_j is commutative, so (i, j) and (j, i) round identically
            let values = g.edges().map(|(src, dst, w)| w / (d[dst] * d[src]).sqrt()).collect();
            Ok(ShiftOperator::from_graph_values(g, kind, values))
        }
        OperatorKind::RandomWalk => {
            let d = checked_degrees(g, 0.0)?;
            let values = g.edges().map(|(_, dst, w)| w / d[dst]).collect();
            Ok(ShiftOperator::from_graph_values(g, kind, values))
        }
        OperatorKind::GcnRenormalized => {
            let d = checked_degrees(g, 1.0)?;
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let (cols, weights) = g.row(i);
                let mut row: Vec<(usize, f64)> = cols.iter().copied().zip(weights.iter().copied()).collect();
                match row.binary_search_by_key(&i, |e| e.0) {
                    Ok(pos) => row[pos].1 += 1.0,
                    Err(pos) => row.insert(pos, (i, 1.0)),
                }
                for entry in &mut row {
                    entry.1 /= (d[i] * d[entry.0]).sqrt();
                }
                rows.push(row);
            }
            Ok(ShiftOperator::from_rows(kind, rows))
        }
        OperatorKind::Laplacian => laplacian(g),
        OperatorKind::RescaledLaplacian => rescaled_laplacian(g, None),
    }
}

fn checked_degrees(g: &Graph, self_loop_boost: f64) -> Result<Vec<f64>> {
    if let Some((src, dst, weight)) = g.edges().find(|e| e.2 < 0.0) {
        return Err(Error::NegativeWeight { src, dst, weight });
    }
    let d = degrees(g);
    let d: Vec<f64> = d.into_iter().map(|x| x + self_loop_boost).collect();
    if let Some((vertex, &degree)) = d.iter().enumerate().find(|(_, &x)| x <= 0.0) {
        return Err(Error::NonPositiveDegree { vertex, degree });
    }
    Ok(d)
}

fn laplacian(g: &Graph) -> Result<ShiftOperator> {
    if g.is_directed() {
        return Err(Error::DirectedLaplacian);
    }
    let d = checked_degrees(g, 0.0)?;
    let rows = (0..g.num_nodes())
        .map(|i| {
            let (cols, weights) = g.row(i);
            let mut row: Vec<(usize, f64)> = cols.iter().copied().zip(weights.iter().map(|&w| -w)).collect();
            match row.binary_search_by_key(&i, |e| e.0) {
                Ok(pos) => row[pos].1 += d[i],
                Err(pos) => row.insert(pos, (i, d[i])),
            }
            row
        })
        .collect();
    Ok(ShiftOperator::from_rows(OperatorKind::Laplacian, rows))
}

/// `(2 / lambda_max) L - I` for the combinatorial Laplacian `L = D - A`.
///
/// When `lambda_max` is `None` it is estimated with [`LAMBDA_MAX_STEPS`]
/// power-iteration steps.
pub fn rescaled_laplacian(g: &Graph, lambda_max: Option<f64>) -> Result<ShiftOperator> {
    let l = laplacian(g)?;
    let lambda_max = match lambda_max {
        Some(v) => v,
        None => power::power_iteration(&l, LAMBDA_MAX_TOL, LAMBDA_MAX_STEPS)?.value,
    };
    if !(lambda_max.is_finite() && lambda_max > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda_max must be positive, got {lambda_max}")));
    }
    let scale = 2.0 / lambda_max;
    let rows = (0..l.num_nodes)
        .map(|i| {
            let (cols, values) = l.row(i);
            cols.iter()
                .zip(values)
                .map(|(&c, &v)| (c, if c == i { scale * v - 1.0 } else { scale * v }))
                .collect()
        })
        .collect();
    Ok(ShiftOperator::from_rows(OperatorKind::RescaledLaplacian, rows))
}

impl ShiftOperator {
    fn from_graph_values(g: &Graph, kind: OperatorKind, values: Vec<f64>) -> Self {
        ShiftOperator {
            kind,
            num_nodes: g.num_nodes(),
            row_offsets: g.row_offsets().to_vec(),
            col_indices: g.col_indices().to_vec(),
            values,
        }
    }

    fn from_rows(kind: OperatorKind, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for row in &rows {
            for &(c, v) in row {
                col_indices.push(c);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        ShiftOperator {
            kind,
            num_nodes: rows.len(),
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Operator with an explicitly given dense matrix; every nonzero entry is stored.
    pub fn from_dense(kind: OperatorKind, matrix: ArrayView2<f64>) -> Result<Self> {
        let (rows, cols) = matrix.dim();
        if rows != cols {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: cols,
            });
        }
        let rows = (0..rows)
            .map(|i| {
                (0..cols)
                    .filter(|&j| matrix[[i, j]] != 0.0)
                    .map(|j| (j, matrix[[i, j]]))
                    .collect()
            })
            .collect();
        Ok(ShiftOperator::from_rows(kind, rows))
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut dense = Array2::zeros((self.num_nodes, self.num_nodes));
        for i in 0..self.num_nodes {
            let (cols, values) = self.row(i);
            for (&j, &v) in cols.iter().zip(values) {
                dense[[i, j]] = v;
            }
        }
        dense
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.num_nodes).all(|i| {
            let (cols, values) = self.row(i);
            cols.iter().zip(values).all(|(&j, &v)| self.entry(j, i) == v)
        })
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (cols, values) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |pos| values[pos])
    }

    /// Transposed operator (same kind tag).
    pub fn transpose(&self) -> ShiftOperator {
        let mut rows = vec![Vec::new(); self.num_nodes];
        for i in 0..self.num_nodes {
            let (cols, values) = self.row(i);
            for (&j, &v) in cols.iter().zip(values) {
                rows[j].push((i, v));
            }
        }
        ShiftOperator::from_rows(self.kind, rows)
    }

    /// Relabels vertices so that old vertex `v` becomes `perm[v]`.
    pub fn permute(&self, perm: &[usize]) -> Result<ShiftOperator> {
        check_permutation(perm, self.num_nodes)?;
        let mut rows = vec![Vec::new(); self.num_nodes];
        for i in 0..self.num_nodes {
            let (cols, values) = self.row(i);
            let mut row: Vec<(usize, f64)> = cols.iter().zip(values).map(|(&j, &v)| (perm[j], v)).collect();
            row.sort_by_key(|e| e.0);
            rows[perm[i]] = row;
        }
        Ok(ShiftOperator::from_rows(self.kind, rows))
    }

    /// `y = S x`, summing each row in ascending column order.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.num_nodes];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        for (i, out) in y.iter_mut().enumerate() {
            let (cols, values) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(values) {
                acc += v * x[j];
            }
            *out = acc;
        }
        Ok(())
    }

    /// `Y = S X` for an `N x C` matrix, column by column in the same order as [`Self::spmv`].
    pub fn spmm(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let (rows, width) = x.dim();
        self.check_len(rows)?;
        let mut y = Array2::zeros((rows, width));
        for i in 0..self.num_nodes {
            let (cols, values) = self.row(i);
            let mut out = y.row_mut(i);
            for (&j, &v) in cols.iter().zip(values) {
                out.scaled_add(v, &x.row(j));
            }
        }
        Ok(y)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.num_nodes {
            return Err(Error::DimensionMismatch {
                expected: self.num_nodes,
                found: len,
            });
        }
        Ok(())
    }
}

/// Free-function form of [`ShiftOperator::spmv`].
pub fn spmv(s: &ShiftOperator, x: &[f64]) -> Result<Vec<f64>> {
    s.spmv(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, make_cyclic_graph};
    use ndarray::array;

    fn pair() -> Graph {
        build_graph(&[(0, 1, 1.0)], 2, false).unwrap()
    }

    #[test]
    fn two_node_normalizations() {
        let sym = normalize(&pair(), OperatorKind::SymNormalized).unwrap();
        assert_eq!(sym.to_dense(), array![[0.0, 1.0], [1.0, 0.0]]);
        let gcn = normalize(&pair(), OperatorKind::GcnRenormalized).unwrap();
        assert_eq!(gcn.to_dense(), array![[0.5, 0.5], [0.5, 0.5]]);
        let lap = normalize(&pair(), OperatorKind::Laplacian).unwrap();
        assert_eq!(lap.to_dense(), array![[1.0, -1.0], [-1.0, 1.0]]);
    }

    #[test]
    fn laplacian_rejects_directed() {
        let g = make_cyclic_graph(4).unwrap();
        assert!(matches!(normalize(&g, OperatorKind::Laplacian), Err(Error::DirectedLaplacian)));
        assert!(matches!(rescaled_laplacian(&g, Some(2.0)), Err(Error::DirectedLaplacian)));
    }

    #[test]
    fn negative_weights_and_degrees() {
        let g = build_graph(&[(0, 1, -1.0)], 2, false).unwrap();
        assert!(matches!(
            normalize(&g, OperatorKind::SymNormalized),
            Err(Error::NegativeWeight { .. })
        ));
        // only outgoing edges from 0: row 0 is empty
        let g = build_graph(&[(0, 1, 1.0)], 2, true).unwrap();
        assert!(matches!(
            normalize(&g, OperatorKind::RandomWalk),
            Err(Error::NonPositiveDegree { vertex: 0, .. })
        ));
        // raw shift needs no degree
        assert!(normalize(&g, OperatorKind::Raw).is_ok());
    }

    #[test]
    fn gcn_keeps_existing_self_loop() {
        let g = build_graph(&[(0, 0, 1.0), (0, 1, 1.0)], 2, false).unwrap();
        let s = normalize(&g, OperatorKind::GcnRenormalized).unwrap();
        // A + I = [[2,1],[1,1]], degrees 3 and 2
        let expected = array![
            [2.0 / 3.0, 1.0 / 6.0_f64.sqrt()],
            [1.0 / 6.0_f64.sqrt(), 0.5]
        ];
        let d = s.to_dense();
        for (a, b) in d.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn cyclic_shift_rotates() {
        let s = normalize(&make_cyclic_graph(5).unwrap(), OperatorKind::Raw).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(s.spmv(&x).unwrap(), vec![5.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.spmv(&[0.0; 5]).unwrap(), vec![0.0; 5]);
        assert!(matches!(s.spmv(&[1.0; 4]), Err(Error::DimensionMismatch { expected: 5, found: 4 })));
    }

    #[test]
    fn cyclic_shift_has_period_n() {
        let n = 7;
        let s = normalize(&make_cyclic_graph(n).unwrap(), OperatorKind::Raw).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut z = x.clone();
        for _ in 0..n {
            z = s.spmv(&z).unwrap();
        }
        assert_eq!(z, x);
    }

    #[test]
    fn rescaled_laplacian_with_known_lambda() {
        let s = rescaled_laplacian(&pair(), Some(2.0)).unwrap();
        // L = [[1,-1],[-1,1]] -> L - I
        assert_eq!(s.to_dense(), array![[0.0, -1.0], [-1.0, 0.0]]);
        let estimated = rescaled_laplacian(&pair(), None).unwrap();
        for (a, b) in estimated.to_dense().iter().zip(s.to_dense().iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn transpose_of_directed() {
        let s = normalize(&make_cyclic_graph(3).unwrap(), OperatorKind::Raw).unwrap();
        assert_eq!(s.transpose().to_dense(), s.to_dense().t().to_owned());
        assert!(!s.is_symmetric());
    }
}
