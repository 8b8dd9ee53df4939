#![allow(dead_code)]

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagcn::graph::{build_graph, Graph};

/// Connected undirected graph: a ring plus random chords, random positive weights.
pub fn ring_with_chords(rng: &mut ChaCha8Rng, n: usize, chord_prob: f64) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((i, (i + 1) % n, rng.random_range(0.2..2.0)));
    }
    for i in 0..n {
        for j in i + 2..n {
            if !(i == 0 && j == n - 1) && rng.random::<f64>() < chord_prob {
                edges.push((i, j, rng.random_range(0.2..2.0)));
            }
        }
    }
    build_graph(&edges, n, false).expect("valid ring graph")
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Multinomial logistic regression by full-batch gradient descent, fit on the
/// rows in `train`; returns accuracy on the rows in `test`.
pub fn logistic_regression_accuracy(
    x: ArrayView2<f64>,
    labels: &[i64],
    classes: usize,
    train: &[usize],
    test: &[usize],
) -> f64 {
    let d = x.ncols();
    // standardize with training statistics so one step size fits every input
    let xt = x.select(Axis(0), train);
    let mean = xt.mean_axis(Axis(0)).expect("nonempty train");
    let std = xt.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
    let z = (&x - &mean) / &std;
    let mut w = Array2::<f64>::zeros((d + 1, classes));
    let lr = 0.5;
    for _ in 0..500 {
        let mut grad = Array2::<f64>::zeros((d + 1, classes));
        for &i in train {
            let row = z.row(i);
            let mut logits: Vec<f64> = (0..classes)
                .map(|c| w[[d, c]] + (0..d).map(|j| row[j] * w[[j, c]]).sum::<f64>())
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            logits.iter_mut().for_each(|l| *l = (*l - max).exp());
            let total: f64 = logits.iter().sum();
            for c in 0..classes {
                let p = logits[c] / total - if labels[i] as usize == c { 1.0 } else { 0.0 };
                for j in 0..d {
                    grad[[j, c]] += p * row[j];
                }
                grad[[d, c]] += p;
            }
        }
        w.scaled_add(-lr / train.len() as f64, &grad);
    }
    let correct = test
        .iter()
        .filter(|&&i| {
            let row = z.row(i);
            let best = (0..classes)
                .map(|c| w[[d, c]] + (0..d).map(|j| row[j] * w[[j, c]]).sum::<f64>())
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(c, _)| c)
                .expect("at least one class");
            best as i64 == labels[i]
        })
        .count();
    correct as f64 / test.len() as f64
}
