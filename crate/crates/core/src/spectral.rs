//! Graph Fourier transform: eigendecomposition `A = F^{-1} J F` of a shift
//! operator and the frequency response of polynomial filters.
//!
//! Symmetric operators use a real symmetric eigensolver, so `F` is orthogonal.
//! General operators get eigenvalues from a Schur form, right eigenvectors from
//! the null space of `A - lambda I` (grouping numerically repeated eigenvalues),
//! and `F` as the inverse of the right-eigenvector matrix. Defective matrices
//! are rejected through the reconstruction residual.

use nalgebra::{DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::shift::ShiftOperator;

pub type Complex64 = nalgebra::Complex<f64>;

/// Largest operator accepted by the dense eigensolver.
pub const MAX_DENSE_NODES: usize = 512;
/// Reconstruction residual above which an operator counts as non-diagonalizable.
pub const DIAGONALIZABLE_TOL: f64 = 1e-6;
const CLUSTER_TOL: f64 = 1e-6;
const SCHUR_RETRIES: usize = 4;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<Complex64>,
    /// Columns are right eigenvectors (`F^{-1}`).
    right_vectors: DMatrix<Complex64>,
    /// Rows are left eigenvectors (`F`).
    left_vectors: DMatrix<Complex64>,
}

fn dense(s: &ShiftOperator) -> DMatrix<f64> {
    let n = s.num_nodes();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let (cols, values) = s.row(i);
        for (&j, &v) in cols.iter().zip(values) {
            m[(i, j)] = v;
        }
    }
    m
}

fn quantized(z: &Complex64) -> (i64, i64) {
    ((z.re * 1e8).round() as i64, (z.im * 1e8).round() as i64)
}

/// Descending real part, then descending imaginary part.
fn spectral_order(values: &[Complex64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let (qa, qb) = (quantized(&values[a]), quantized(&values[b]));
        qb.cmp(&qa)
    });
    order
}

pub fn spectral_decompose(s: &ShiftOperator) -> Result<SpectralDecomposition> {
    let n = s.num_nodes();
    if n > MAX_DENSE_NODES {
        return Err(Error::TooLarge {
            what: "dense eigendecomposition",
            size: n,
            max: MAX_DENSE_NODES,
        });
    }
    let a = dense(s);
    let decomposition = if s.is_symmetric() {
        symmetric_decomposition(a.clone())
    } else {
        general_decomposition(&a)?
    };
    let residual = decomposition.reconstruction_residual(&a);
    if residual.is_nan() || residual > DIAGONALIZABLE_TOL {
        return Err(Error::NotDiagonalizable { residual });
    }
    Ok(decomposition)
}

fn symmetric_decomposition(a: DMatrix<f64>) -> SpectralDecomposition {
    let n = a.nrows();
    let eig = a.symmetric_eigen();
    let values: Vec<Complex64> = eig.eigenvalues.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let order = spectral_order(&values);
    let mut right = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            right[(row, col)] = Complex64::new(eig.eigenvectors[(row, src)], 0.0);
        }
    }
    let left = right.transpose();
    SpectralDecomposition {
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        right_vectors: right,
        left_vectors: left,
    }
}

/// Eigenvalues from a bounded Schur iteration. Shifted QR can stall on highly
/// structured inputs such as permutation matrices, so on failure the iteration
/// is retried on `Q A Q^T` for a random orthogonal `Q` (same spectrum).
pub(crate) fn general_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let max_iter = 1000 + 100 * n;
    if let Some(schur) = Schur::try_new(a.clone(), f64::EPSILON, max_iter) {
        return Ok(schur.complex_eigenvalues().iter().copied().collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    for _ in 0..SCHUR_RETRIES {
        let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q();
        let rotated = &q * a * q.transpose();
        if let Some(schur) = Schur::try_new(rotated, f64::EPSILON, max_iter) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(Error::NotDiagonalizable { residual: f64::INFINITY })
}

fn general_decomposition(a: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    let n = a.nrows();
    let raw = general_eigenvalues(a)?;
    let order = spectral_order(&raw);
    let values: Vec<Complex64> = order.iter().map(|&i| raw[i]).collect();

    // group numerically repeated eigenvalues
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let tol = CLUSTER_TOL * v.norm().max(1.0);
        match clusters.iter_mut().find(|c| (values[c[0]] - v).norm() < tol) {
            Some(c) => c.push(i),
            None => clusters.push(vec![i]),
        }
    }

    let ac = a.map(|v| Complex64::new(v, 0.0));
    let mut right = DMatrix::<Complex64>::zeros(n, n);
    for cluster in &clusters {
        let centre = cluster.iter().map(|&i| values[i]).sum::<Complex64>() / cluster.len() as f64;
        let mut shifted = ac.clone();
        for d in 0..n {
            shifted[(d, d)] -= centre;
        }
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let mut by_size: Vec<usize> = (0..svd.singular_values.len()).collect();
        by_size.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
        for (&slot, &sv) in cluster.iter().zip(&by_size) {
            let v: DVector<Complex64> = v_t.row(sv).transpose().map(|z| z.conj());
            let norm = v.norm();
            right.set_column(slot, &(v / Complex64::new(norm, 0.0)));
        }
    }
    let left = right.clone().try_inverse().ok_or(Error::NotDiagonalizable {
        residual: f64::INFINITY,
    })?;
    Ok(SpectralDecomposition {
        eigenvalues: values,
        right_vectors: right,
        left_vectors: left,
    })
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn right_vectors(&self) -> &DMatrix<Complex64> {
        &self.right_vectors
    }

    pub fn left_vectors(&self) -> &DMatrix<Complex64> {
        &self.left_vectors
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `max |F^{-1} J F - A|` over all entries.
    pub fn reconstruction_residual(&self, a: &DMatrix<f64>) -> f64 {
        let j = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        let rebuilt = &self.right_vectors * j * &self.left_vectors;
        rebuilt
            .iter()
            .zip(a.iter())
            .map(|(r, &v)| (r - Complex64::new(v, 0.0)).norm())
            .fold(0.0, f64::max)
    }

    /// `max |F F^{-1} - I|` over all entries.
    pub fn biorthogonality_residual(&self) -> f64 {
        let n = self.len();
        let product = &self.left_vectors * &self.right_vectors;
        let identity = DMatrix::<Complex64>::identity(n, n);
        (product - identity).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Graph Fourier transform `F x`.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        self.check_len(x.len())?;
        let x = DVector::from_iterator(x.len(), x.iter().map(|&v| Complex64::new(v, 0.0)));
        Ok((&self.left_vectors * x).iter().copied().collect())
    }

    /// Inverse transform `F^{-1} s`.
    pub fn inverse_transform(&self, spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(spectrum.len())?;
        let s = DVector::from_column_slice(spectrum);
        Ok((&self.right_vectors * s).iter().copied().collect())
    }

    /// Spectral-domain filtering `F^{-1} diag(h(lambda)) F x`; returns the real part.
    pub fn filter(&self, coeffs: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let response = spectral_filter_response(coeffs, self);
        let spectrum: Vec<Complex64> = self
            .transform(x)?
            .iter()
            .zip(&response)
            .map(|(s, h)| s * h)
            .collect();
        Ok(self.inverse_transform(&spectrum)?.iter().map(|z| z.re).collect())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: len,
            });
        }
        Ok(())
    }
}

/// `h(lambda_i) = sum_k coeffs[k] lambda_i^k` for every eigenvalue.
pub fn spectral_filter_response(coeffs: &[f64], d: &SpectralDecomposition) -> Vec<Complex64> {
    d.eigenvalues
        .iter()
        .map(|&lambda| {
            // Horner
            coeffs
                .iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &g| acc * lambda + g)
        })
        .collect()
}
