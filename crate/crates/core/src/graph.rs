//! Weighted graph storage in compressed row form.
//!
//! Row `i` of the stored matrix holds the weights of edges *into* vertex `i`:
//! an edge `src -> dst` with weight `w` is the entry `A[dst][src] = w`. With
//! this orientation a graph shift `A x` replaces every vertex value by the
//! weighted combination of the values at its in-neighbors, and
//! `(A^k)[dst][src]` is the total weight of length-`k` paths `src -> dst`.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Longest path length accepted by [`path_weight_sum`].
pub const MAX_PATH_LENGTH: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    weights: Vec<f64>,
    directed: bool,
}

/// Builds a graph from `(src, dst, weight)` triples.
///
/// Undirected input is symmetrized: each listed edge is stored in both
/// directions, and listing both `(a, b)` and `(b, a)` counts as a duplicate.
/// Self-loops are allowed.
pub fn build_graph(edges: &[(usize, usize, f64)], num_nodes: usize, directed: bool) -> Result<Graph> {
    if num_nodes == 0 {
        return Err(Error::InvalidArgument("graph needs at least one vertex".into()));
    }
    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len() * 2);
    for &(src, dst, weight) in edges {
        for index in [src, dst] {
            if index >= num_nodes {
                return Err(Error::IndexOutOfRange { index, len: num_nodes });
            }
        }
        if !weight.is_finite() {
            return Err(Error::NonFiniteWeight { src, dst, weight });
        }
        // (row, col, weight) = (dst, src, weight)
        entries.push((dst, src, weight));
        if !directed && src != dst {
            entries.push((src, dst, weight));
        }
    }
    entries.sort_by_key(|e| (e.0, e.1));
    for pair in entries.windows(2) {
        if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
            return Err(Error::DuplicateEdge {
                src: pair[0].1,
                dst: pair[0].0,
            });
        }
    }

    let mut row_offsets = vec![0usize; num_nodes + 1];
    for &(row, _, _) in &entries {
        row_offsets[row + 1] += 1;
    }
    for i in 0..num_nodes {
        row_offsets[i + 1] += row_offsets[i];
    }
    let col_indices = entries.iter().map(|e| e.1).collect();
    let weights = entries.iter().map(|e| e.2).collect();
    let graph = Graph {
        num_nodes,
        row_offsets,
        col_indices,
        weights,
        directed,
    };
    graph.check_no_isolated()?;
    Ok(graph)
}

impl Graph {
    /// Graph whose weighted adjacency matrix is `matrix` (nonzero entries become edges).
    /// The result is marked undirected when the matrix is exactly symmetric.
    pub fn from_dense(matrix: &Array2<f64>) -> Result<Graph> {
        let (rows, cols) = matrix.dim();
        if rows != cols {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: cols,
            });
        }
        let symmetric = (0..rows).all(|i| (0..rows).all(|j| matrix[[i, j]] == matrix[[j, i]]));
        let mut edges = Vec::new();
        for ((dst, src), &w) in matrix.indexed_iter() {
            if w != 0.0 && (!symmetric || src <= dst) {
                edges.push((src, dst, w));
            }
        }
        build_graph(&edges, rows, !symmetric)
    }

    fn check_no_isolated(&self) -> Result<()> {
        let mut incident = vec![false; self.num_nodes];
        for row in 0..self.num_nodes {
            let (cols, _) = self.row(row);
            if !cols.is_empty() {
                incident[row] = true;
            }
            for &c in cols {
                incident[c] = true;
            }
        }
        match incident.iter().position(|&seen| !seen) {
            Some(vertex) => Err(Error::IsolatedVertex { vertex }),
            None => Ok(()),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of stored matrix entries (an undirected edge counts twice, a self-loop once).
    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Column indices and weights of row `i` (the in-edges of vertex `i`).
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[range.clone()], &self.weights[range])
    }

    /// Weight of the edge `src -> dst`, or zero.
    pub fn weight(&self, src: usize, dst: usize) -> f64 {
        let (cols, weights) = self.row(dst);
        cols.binary_search(&src).map_or(0.0, |pos| weights[pos])
    }

    /// Edges as `(src, dst, weight)` triples in row-major storage order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_nodes).flat_map(move |dst| {
            let (cols, weights) = self.row(dst);
            cols.iter().zip(weights).map(move |(&src, &w)| (src, dst, w))
        })
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut dense = Array2::zeros((self.num_nodes, self.num_nodes));
        for (src, dst, w) in self.edges() {
            dense[[dst, src]] = w;
        }
        dense
    }

    /// Out-neighbors of every vertex with the corresponding edge weights.
    pub fn out_adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); self.num_nodes];
        for (src, dst, w) in self.edges() {
            out[src].push((dst, w));
        }
        out
    }

    /// Relabels vertices so that old vertex `v` becomes `perm[v]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        check_permutation(perm, self.num_nodes)?;
        let edges: Vec<_> = self
            .edges()
            .filter(|&(src, dst, _)| self.directed || src <= dst)
            .map(|(src, dst, w)| (perm[src], perm[dst], w))
            .collect();
        build_graph(&edges, self.num_nodes, self.directed)
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: perm.len(),
        });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n {
            return Err(Error::IndexOutOfRange { index: p, len: n });
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument(format!("{p} appears twice in permutation")));
        }
    }
    Ok(())
}

/// Weighted row sums `d(i) = sum_j A[i][j]`.
pub fn degrees(g: &Graph) -> Vec<f64> {
    (0..g.num_nodes())
        .map(|i| g.row(i).1.iter().sum())
        .collect()
}

/// Directed cycle `0 -> 1 -> ... -> N-1 -> 0` with unit weights; its shift is a cyclic delay.
pub fn make_cyclic_graph(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cyclic graph needs N >= 2, got {n}")));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    build_graph(&edges, n, true)
}

/// All length-`k` walks `src -> dst` with their weights (product of edge weights).
///
/// Exhaustive depth-first enumeration over out-edges. Vertices and edges may repeat.
pub fn enumerate_paths(g: &Graph, src: usize, dst: usize, k: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    if k > MAX_PATH_LENGTH {
        return Err(Error::PathLengthTooLarge {
            k,
            max: MAX_PATH_LENGTH,
        });
    }
    for index in [src, dst] {
        if index >= g.num_nodes() {
            return Err(Error::IndexOutOfRange {
                index,
                len: g.num_nodes(),
            });
        }
    }
    let out = g.out_adjacency();
    let mut found = Vec::new();
    let mut stack = vec![src];
    walk(&out, dst, k, 1.0, &mut stack, &mut found);
    Ok(found)
}

fn walk(
    out: &[Vec<(usize, f64)>],
    dst: usize,
    remaining: usize,
    weight: f64,
    stack: &mut Vec<usize>,
    found: &mut Vec<(Vec<usize>, f64)>,
) {
    let here = *stack.last().expect("walk starts from a vertex");
    if remaining == 0 {
        if here == dst {
            found.push((stack.clone(), weight));
        }
        return;
    }
    for &(next, w) in &out[here] {
        stack.push(next);
        walk(out, dst, remaining - 1, weight * w, stack, found);
        stack.pop();
    }
}

/// Sum of the weights of all length-`k` walks `src -> dst`, by enumeration.
///
/// Equals `(A^k)[dst][src]`; `k = 0` gives the identity.
pub fn path_weight_sum(g: &Graph, src: usize, dst: usize, k: usize) -> Result<f64> {
    Ok(enumerate_paths(g, src, dst, k)?.iter().map(|(_, w)| w).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// The 7-vertex directed example (0-indexed rows of the displayed matrix).
    pub(crate) fn example_matrix() -> Array2<f64> {
        array![
            [0., 1., 0., 2., 3., 0., 0.],
            [1., 0., 4., 5., 0., 0., 0.],
            [0., 1., 0., 0., 0., 0., 1.],
            [1., 1., 0., 0., 6., 0., 0.],
            [1., 0., 0., 1., 0., 1., 0.],
            [0., 0., 0., 0., 1., 0., 0.],
            [0., 0., 0., 1., 0., 0., 0.],
        ]
    }

    #[test]
    fn example_graph_entries() {
        let g = Graph::from_dense(&example_matrix()).unwrap();
        assert!(g.is_directed());
        let dense = g.to_dense();
        assert_eq!(dense[[0, 1]], 1.0);
        assert_eq!(dense[[0, 3]], 2.0);
        assert_eq!(dense[[0, 4]], 3.0);
        assert_eq!(dense[[1, 0]], 1.0);
        assert_eq!(dense[[1, 2]], 4.0);
        assert_eq!(dense[[1, 3]], 5.0);
        assert_eq!(dense, example_matrix());
        assert_eq!(degrees(&g)[0], 6.0);
    }

    #[test]
    fn smallest_undirected_graph() {
        let g = build_graph(&[(0, 1, 1.0)], 2, false).unwrap();
        assert!(!g.is_directed());
        assert_eq!(g.to_dense(), array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(degrees(&g), vec![1.0, 1.0]);
    }

    #[test]
    fn four_cycle_degrees() {
        let g = build_graph(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)], 4, false).unwrap();
        assert_eq!(degrees(&g), vec![2.0; 4]);
    }

    #[test]
    fn build_errors() {
        assert!(matches!(
            build_graph(&[(0, 5, 1.0)], 3, false),
            Err(Error::IndexOutOfRange { index: 5, len: 3 })
        ));
        assert!(matches!(
            build_graph(&[(0, 1, 1.0), (0, 1, 2.0)], 2, true),
            Err(Error::DuplicateEdge { src: 0, dst: 1 })
        ));
        assert!(matches!(
            build_graph(&[(0, 1, 1.0), (1, 0, 1.0)], 2, false),
            Err(Error::DuplicateEdge { .. })
        ));
        assert!(matches!(
            build_graph(&[(0, 1, 1.0)], 3, false),
            Err(Error::IsolatedVertex { vertex: 2 })
        ));
        assert!(matches!(
            build_graph(&[(0, 1, f64::NAN)], 2, false),
            Err(Error::NonFiniteWeight { .. })
        ));
        // a self-loop is a legal edge, and repeated self-loops are duplicates
        assert!(build_graph(&[(0, 0, 1.0), (0, 1, 1.0)], 2, false).is_ok());
        assert!(matches!(
            build_graph(&[(0, 0, 1.0), (0, 0, 1.0), (0, 1, 1.0)], 2, false),
            Err(Error::DuplicateEdge { src: 0, dst: 0 })
        ));
    }

    #[test]
    fn worked_path_example() {
        let g = Graph::from_dense(&example_matrix()).unwrap();
        // vertex 2 -> vertex 1 in 1-indexed labels
        let paths = enumerate_paths(&g, 1, 0, 3).unwrap();
        assert_eq!(paths.len(), 6);
        assert_eq!(path_weight_sum(&g, 1, 0, 3).unwrap(), 18.0);
        let weight_2141 = paths
            .iter()
            .find(|(p, _)| p == &vec![1, 0, 3, 0])
            .map(|(_, w)| *w)
            .unwrap();
        assert_eq!(weight_2141, 2.0);
    }

    #[test]
    fn zero_length_paths() {
        let g = Graph::from_dense(&example_matrix()).unwrap();
        assert_eq!(path_weight_sum(&g, 3, 3, 0).unwrap(), 1.0);
        assert_eq!(path_weight_sum(&g, 3, 4, 0).unwrap(), 0.0);
        assert!(matches!(
            path_weight_sum(&g, 0, 1, 7),
            Err(Error::PathLengthTooLarge { k: 7, max: 6 })
        ));
    }

    #[test]
    fn cyclic_graph_layout() {
        let g = make_cyclic_graph(4).unwrap();
        let a = g.to_dense();
        assert_eq!(a[[1, 0]], 1.0);
        assert_eq!(a[[2, 1]], 1.0);
        assert_eq!(a[[3, 2]], 1.0);
        assert_eq!(a[[0, 3]], 1.0);
        assert_eq!(a.sum(), 4.0);
        let two = make_cyclic_graph(2).unwrap();
        assert_eq!(two.to_dense(), array![[0.0, 1.0], [1.0, 0.0]]);
        assert!(make_cyclic_graph(1).is_err());
    }

    #[test]
    fn permute_relabels_entries() {
        let g = Graph::from_dense(&example_matrix()).unwrap();
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let p = g.permute(&perm).unwrap();
        let (a, b) = (g.to_dense(), p.to_dense());
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(a[[i, j]], b[[perm[i], perm[j]]]);
            }
        }
        assert!(g.permute(&[0, 0, 1, 2, 3, 4, 5]).is_err());
    }
}
