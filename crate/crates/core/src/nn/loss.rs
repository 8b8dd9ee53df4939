use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Mean softmax cross-entropy over the rows listed in `mask`.
///
/// Returns the loss and its gradient with respect to `logits`; rows outside
/// the mask get a zero gradient. Each row is shifted by its maximum before
/// exponentiation.
pub fn masked_softmax_xent(logits: ArrayView2<f64>, labels: &[i64], mask: &[usize]) -> Result<(f64, Array2<f64>)> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (n, classes) = logits.dim();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    let scale = 1.0 / mask.len() as f64;
    let mut grad = Array2::zeros((n, classes));
    let mut loss = 0.0;
    for &i in mask {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        let label = labels[i];
        if label < 0 || label as usize >= classes {
            return Err(Error::LabelOutOfRange {
                node: i,
                label,
                num_classes: classes,
            });
        }
        let row = logits.row(i);
        let (top, max) = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (c, &v)| if v > best.1 { (c, v) } else { best });
        // the max term is exactly 1; ln_1p keeps the rest when it is tiny
        let rest: f64 = row.iter().enumerate().filter(|&(c, _)| c != top).map(|(_, v)| (v - max).exp()).sum();
        let log_sum = rest.ln_1p();
        loss += log_sum - (row[label as usize] - max);
        let mut g = grad.row_mut(i);
        for (c, gv) in g.iter_mut().enumerate() {
            let p = (row[c] - max - log_sum).exp();
            *gv += scale * (p - if c == label as usize { 1.0 } else { 0.0 });
        }
    }
    Ok((loss * scale, grad))
}

/// Fraction of rows in `idx` whose arg-max logit equals the label.
pub fn accuracy(logits: ArrayView2<f64>, labels: &[i64], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let correct = idx
        .iter()
        .filter(|&&i| {
            let row = logits.row(i);
            let best = row
                .iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |b, (c, &v)| if v > b.1 { (c, v) } else { b })
                .0;
            best as i64 == labels[i]
        })
        .count();
    correct as f64 / idx.len() as f64
}
