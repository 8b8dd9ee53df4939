//! Deep stacks of single-monomial filters `sigma(g A^k .)`.
//!
//! For a nonnegative, strongly connected shift with a simple dominant
//! eigenvalue, the direction of the stack output converges to the dominant
//! eigenvector `v1` as depth grows; the limit is `m <y1, v1> v1` where `y1` is
//! the first layer's output. The functions here compute the stack, the limit
//! projection and a per-layer convergence trace.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{build_graph, Graph};
use crate::power::{dot, fix_sign, norm2, power_iteration};
use crate::shift::ShiftOperator;
use crate::spectral::{general_eigenvalues, MAX_DENSE_NODES};

pub const DOMINANT_TOL: f64 = 1e-10;
pub const DOMINANT_MAX_ITER: usize = 200_000;
/// Minimum gap between the two largest eigenvalue magnitudes.
pub const SIMPLE_GAP: f64 = 1e-8;
pub const ZERO_PROJECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonomialStackSpec {
    gains: Vec<f64>,
    powers: Vec<usize>,
}

impl MonomialStackSpec {
    pub fn new(gains: Vec<f64>, powers: Vec<usize>) -> Result<Self> {
        if gains.is_empty() || gains.len() != powers.len() {
            return Err(Error::InvalidArgument(format!(
                "stack needs equal, nonzero numbers of gains and powers ({} vs {})",
                gains.len(),
                powers.len()
            )));
        }
        if let Some(&p) = powers.iter().find(|&&p| p == 0) {
            return Err(Error::InvalidArgument(format!("monomial power must be >= 1, got {p}")));
        }
        if gains.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidArgument("gains must be finite".into()));
        }
        Ok(MonomialStackSpec { gains, powers })
    }

    /// `depth` layers of `sigma(gain * A^power .)`.
    pub fn uniform(depth: usize, gain: f64, power: usize) -> Result<Self> {
        Self::new(vec![gain; depth], vec![power; depth])
    }

    pub fn depth(&self) -> usize {
        self.gains.len()
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn powers(&self) -> &[usize] {
        &self.powers
    }

    /// Whether every gain after the first is positive; otherwise the stack
    /// output collapses to zero.
    pub fn has_positive_tail(&self) -> bool {
        self.gains[1..].iter().all(|&g| g > 0.0)
    }
}

fn relu_layer(s: &ShiftOperator, gain: f64, power: usize, x: &[f64]) -> Result<Vec<f64>> {
    let mut z = x.to_vec();
    for _ in 0..power {
        z = s.spmv(&z)?;
    }
    Ok(z.into_iter().map(|v| (gain * v).max(0.0)).collect())
}

/// Outputs of every layer of the stack, first layer first.
pub fn deep_monomial_trace(spec: &MonomialStackSpec, s: &ShiftOperator, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    if x.len() != s.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: s.num_nodes(),
            found: x.len(),
        });
    }
    let mut outputs = Vec::with_capacity(spec.depth());
    let mut current = x.to_vec();
    for (&g, &k) in spec.gains.iter().zip(&spec.powers) {
        current = relu_layer(s, g, k, &current)?;
        outputs.push(current.clone());
    }
    Ok(outputs)
}

/// `sigma(g_L A^{k_L} sigma(... sigma(g_1 A^{k_1} x)))`.
pub fn deep_monomial_forward(spec: &MonomialStackSpec, s: &ShiftOperator, x: &[f64]) -> Result<Vec<f64>> {
    Ok(deep_monomial_trace(spec, s, x)?.pop().expect("stack has at least one layer"))
}

fn reaches_all(n: usize, neighbours: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &neighbours[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Forward and backward reachability from vertex 0 over the nonzero pattern.
pub fn is_strongly_connected(s: &ShiftOperator) -> bool {
    let n = s.num_nodes();
    let mut forward = vec![Vec::new(); n];
    let mut backward = vec![Vec::new(); n];
    for (i, preds) in backward.iter_mut().enumerate() {
        let (cols, values) = s.row(i);
        for (&j, &v) in cols.iter().zip(values) {
            if v != 0.0 {
                // entry (i, j) carries j -> i
                forward[j].push(i);
                preds.push(j);
            }
        }
    }
    n > 0 && reaches_all(n, &forward) && reaches_all(n, &backward)
}

#[derive(Debug, Clone, Serialize)]
pub struct DominantEigen {
    pub value: f64,
    /// Unit norm; entrywise nonnegative for nonnegative operators.
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Dominant eigenpair of a nonnegative strongly connected operator.
pub fn dominant_eigen(s: &ShiftOperator) -> Result<DominantEigen> {
    let n = s.num_nodes();
    if (0..n).any(|i| s.row(i).1.iter().any(|&v| v < 0.0)) {
        return Err(Error::InvalidArgument("dominant projection needs a nonnegative operator".into()));
    }
    if !is_strongly_connected(s) {
        return Err(Error::NotStronglyConnected);
    }
    if n <= MAX_DENSE_NODES && n > 1 {
        let dense = nalgebra::DMatrix::from_fn(n, n, |i, j| s.entry(i, j));
        let mut magnitudes: Vec<f64> = if s.is_symmetric() {
            dense.symmetric_eigenvalues().iter().map(|v| v.abs()).collect()
        } else {
            general_eigenvalues(&dense)?.iter().map(|z| z.norm()).collect()
        };
        magnitudes.sort_by(|a, b| b.total_cmp(a));
        if magnitudes[0] - magnitudes[1] < SIMPLE_GAP {
            return Err(Error::DegenerateDominantEigenvalue {
                first: magnitudes[0],
                second: magnitudes[1],
            });
        }
    }
    let r = power_iteration(s, DOMINANT_TOL, DOMINANT_MAX_ITER)?;
    if !r.converged {
        return Err(Error::DegenerateDominantEigenvalue {
            first: r.value,
            second: f64::NAN,
        });
    }
    let mut vector = r.vector;
    fix_sign(&mut vector);
    Ok(DominantEigen {
        value: r.value,
        vector,
        iterations: r.iterations,
    })
}

/// `<y1, v1> v1` for the unit dominant eigenvector `v1`.
pub fn dominant_projection(s: &ShiftOperator, y1: &[f64]) -> Result<Vec<f64>> {
    if y1.len() != s.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: s.num_nodes(),
            found: y1.len(),
        });
    }
    let v1 = dominant_eigen(s)?.vector;
    let c1 = dot(y1, &v1);
    Ok(v1.into_iter().map(|v| c1 * v).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    /// Cosine between each layer's output and `v1` (zero for a zero output).
    pub cosine_to_v1_per_layer: Vec<f64>,
    /// `|y_L / |y_L| - v1|_2`.
    pub final_residual: f64,
    pub final_cosine: f64,
    /// `<y1, v1>`.
    pub projection_coefficient: f64,
    /// `|y_L| / |<y1, v1> v1|`; tends to the product of the gains after the first.
    pub magnitude_ratio: f64,
    pub dominant_eigenvalue: f64,
}

pub fn convergence_report(spec: &MonomialStackSpec, s: &ShiftOperator, x: &[f64]) -> Result<ConvergenceReport> {
    let eigen = dominant_eigen(s)?;
    let v1 = &eigen.vector;
    let trace = deep_monomial_trace(spec, s, x)?;
    let c1 = dot(&trace[0], v1);
    if c1.abs() <= ZERO_PROJECTION_TOL {
        return Err(Error::ZeroProjection);
    }
    let cosines: Vec<f64> = trace
        .iter()
        .map(|y| {
            let len = norm2(y);
            if len == 0.0 {
                0.0
            } else {
                dot(y, v1) / len
            }
        })
        .collect();
    let last = trace.last().expect("nonempty stack");
    let len = norm2(last);
    let final_residual = if len == 0.0 {
        norm2(v1)
    } else {
        last.iter()
            .zip(v1)
            .map(|(y, v)| (y / len - v).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    Ok(ConvergenceReport {
        final_cosine: *cosines.last().expect("nonempty stack"),
        cosine_to_v1_per_layer: cosines,
        final_residual,
        projection_coefficient: c1,
        magnitude_ratio: len / c1.abs(),
        dominant_eigenvalue: eigen.value,
    })
}

/// Undirected cycle plus random chords and one triangle chord, with weights in
/// [0.5, 1.5). Connected and not bipartite, so its normalized adjacency has a
/// simple dominant eigenvalue.
pub fn random_aperiodic_graph<R: Rng>(n: usize, chord_prob: f64, rng: &mut R) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidArgument("need at least 3 vertices".into()));
    }
    if !(0.0..=1.0).contains(&chord_prob) {
        return Err(Error::InvalidArgument(format!("probability {chord_prob} outside [0, 1]")));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((i, (i + 1) % n, rng.random_range(0.5..1.5)));
    }
    if n > 3 {
        edges.push((0, 2, rng.random_range(0.5..1.5)));
    }
    for i in 0..n {
        for j in i + 2..n {
            let on_cycle = i == 0 && j == n - 1;
            let triangle = i == 0 && j == 2;
            if !on_cycle && !triangle && rng.random::<f64>() < chord_prob {
                edges.push((i, j, rng.random_range(0.5..1.5)));
            }
        }
    }
    build_graph(&edges, n, false)
}
