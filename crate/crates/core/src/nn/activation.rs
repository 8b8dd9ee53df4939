use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};

pub fn relu(x: ArrayView2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Inverted dropout: zeroes each entry with probability `rate` and scales the
/// survivors by `1 / (1 - rate)`. Returns the output and the binary keep mask.
pub fn inverted_dropout<R: Rng + ?Sized>(x: ArrayView2<f64>, rate: f64, rng: &mut R) -> Result<(Array2<f64>, Array2<f64>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidRate(rate));
    }
    if rate == 0.0 {
        return Ok((x.to_owned(), Array2::ones(x.dim())));
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    let mask = Array2::from_shape_simple_fn(x.dim(), || if rng.random::<f64>() < keep { 1.0 } else { 0.0 });
    let out = ndarray::Zip::from(&x)
        .and(&mask)
        .map_collect(|&v, &m| v * m * scale);
    Ok((out, mask))
}
