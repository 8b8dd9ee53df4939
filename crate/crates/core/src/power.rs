//! Power iteration for the dominant eigenpair of a shift operator.

use crate::error::Result;
use crate::shift::ShiftOperator;

#[derive(Debug, Clone)]
pub struct PowerResult {
    /// Rayleigh quotient of the final iterate.
    pub value: f64,
    /// Unit-norm iterate, sign fixed so the first nonzero entry is positive.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Flips `v` so that its first entry with magnitude above `1e-14` is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-14) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Runs at most `max_iter` steps of `v <- S v / |S v|`, stopping once successive
/// iterates differ by less than `tol` in the max norm.
///
/// Starts from the positive, non-constant vector `v_i ~ sqrt(i + 1)`, so it has
/// a component along a Perron vector and is not confined to the constant null
/// space of a Laplacian.
pub fn power_iteration(s: &ShiftOperator, tol: f64, max_iter: usize) -> Result<PowerResult> {
    let n = s.num_nodes();
    let mut v: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).sqrt()).collect();
    let scale = norm2(&v);
    v.iter_mut().for_each(|x| *x /= scale);

    let mut next = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    for step in 1..=max_iter {
        iterations = step;
        s.spmv_into(&v, &mut next)?;
        let len = norm2(&next);
        if len == 0.0 {
            v.iter_mut().for_each(|x| *x = 0.0);
            break;
        }
        next.iter_mut().for_each(|x| *x /= len);
        fix_sign(&mut next);
        let change = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        if change < tol {
            converged = true;
            break;
        }
    }
    let sv = s.spmv(&v)?;
    let value = dot(&v, &sv);
    Ok(PowerResult {
        value,
        vector: v,
        iterations,
        converged,
    })
}
