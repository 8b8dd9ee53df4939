//! Adam training with validation-loss early stopping and multi-seed runs.

use std::time::Instant;

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{accuracy, masked_softmax_xent, Layer, LayerKind, Mode, Model, OperatorSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_epochs: usize,
    pub early_stop_window: usize,
    pub dropout_rate: f64,
    /// L2 coefficient on the first layer's weights.
    pub weight_decay: f64,
    pub hidden_units: usize,
    /// Number of graph convolution layers, the output layer included.
    pub num_layers: usize,
    pub filter_size: usize,
    pub layer_kind: LayerKind,
    pub seed: u64,
    pub num_runs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            max_epochs: 300,
            early_stop_window: 45,
            dropout_rate: 0.5,
            weight_decay: 5e-4,
            hidden_units: 16,
            num_layers: 2,
            filter_size: 2,
            layer_kind: LayerKind::Tagcn,
            seed: 0,
            num_runs: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidRate(self.dropout_rate));
        }
        if self.early_stop_window < 1 {
            return bad("early-stopping window must be at least 1");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return bad("Adam betas must lie in [0, 1) and epsilon must be positive");
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad("weight decay must be nonnegative");
        }
        if self.num_layers < 1 || self.hidden_units < 1 {
            return bad("need at least one layer and one hidden unit");
        }
        if self.num_runs < 1 {
            return bad("need at least one run");
        }
        Ok(())
    }
}

/// Adam first and second moments, shaped like the model parameters.
#[derive(Debug, Clone)]
pub struct AdamMoments {
    m: Vec<Layer>,
    v: Vec<Layer>,
}

impl AdamMoments {
    pub fn new(params: &[Layer]) -> Self {
        let zeros: Vec<Layer> = params.iter().map(Layer::zeros_like).collect();
        AdamMoments {
            m: zeros.clone(),
            v: zeros,
        }
    }
}

fn same_shape(a: &Layer, b: &Layer) -> bool {
    a.kind() == b.kind() && {
        let (pa, pb) = (a.params(), b.params());
        pa.len() == pb.len() && pa.iter().zip(&pb).all(|(x, y)| x.len() == y.len())
    }
}

/// One bias-corrected Adam update at step `t` (1-based). Weight decay is added
/// to the gradients of the first layer's weights before the moment update.
pub fn adam_step(params: &mut [Layer], grads: &[Layer], moments: &mut AdamMoments, t: usize, cfg: &TrainConfig) -> Result<()> {
    if t == 0 {
        return Err(Error::InvalidArgument("Adam step counter starts at 1".into()));
    }
    if params.len() != grads.len() || params.len() != moments.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameter layers, {} gradient layers, {} moment layers",
            params.len(),
            grads.len(),
            moments.m.len()
        )));
    }
    for (l, (p, g)) in params.iter().zip(grads).enumerate() {
        if !same_shape(p, g) || !same_shape(p, &moments.m[l]) {
            return Err(Error::ShapeMismatch(format!("layer {l} gradient or moment shape differs from parameters")));
        }
    }
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    for (l, p) in params.iter_mut().enumerate() {
        let decayed = if l == 0 { p.weights().len() } else { 0 };
        let gs = grads[l].params();
        let ms = moments.m[l].params_mut();
        let vs = moments.v[l].params_mut();
        for (s, ((ps, ms), vs)) in p.params_mut().into_iter().zip(ms).zip(vs).enumerate() {
            let wd = if s < decayed { cfg.weight_decay } else { 0.0 };
            for (i, x) in ps.iter_mut().enumerate() {
                let g = gs[s][i] + wd * *x;
                ms[i] = b1 * ms[i] + (1.0 - b1) * g;
                vs[i] = b2 * vs[i] + (1.0 - b2) * g * g;
                let m_hat = ms[i] / c1;
                let v_hat = vs[i] / c2;
                *x -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            }
        }
    }
    Ok(())
}

/// True when the latest validation loss exceeds the mean of the `window`
/// losses before it. Needs at least `window + 1` entries.
pub fn early_stop_check(history: &[f64], window: usize) -> bool {
    let n = history.len();
    if window == 0 || n <= window {
        return false;
    }
    let prev = &history[n - 1 - window..n - 1];
    let mean = prev.iter().sum::<f64>() / window as f64;
    history[n - 1] > mean
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// Epoch whose parameters were kept (best validation accuracy).
    pub best_epoch: Option<usize>,
    pub test_accuracy: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub wall_time_secs: f64,
}

impl RunMetrics {
    /// Everything except the wall time, which is the only nondeterministic field.
    pub fn same_outcome(&self, other: &RunMetrics) -> bool {
        let mut a = self.clone();
        a.wall_time_secs = other.wall_time_secs;
        &a == other
    }
}

pub fn build_model(d: &Dataset, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Model> {
    let hidden = vec![cfg.hidden_units; cfg.num_layers - 1];
    Model::build(
        cfg.layer_kind,
        d.num_features(),
        &hidden,
        d.num_classes(),
        cfg.filter_size,
        cfg.dropout_rate,
        rng,
    )
}

pub fn train_model(d: &Dataset, cfg: &TrainConfig) -> Result<(Model, RunMetrics)> {
    train_model_with(d, cfg, |_| {})
}

/// Trains on the train split, early-stops on validation loss, restores the
/// best-validation-accuracy parameters and reports test accuracy.
/// `on_epoch` sees every epoch as it finishes.
pub fn train_model_with<F: FnMut(&EpochRecord)>(d: &Dataset, cfg: &TrainConfig, mut on_epoch: F) -> Result<(Model, RunMetrics)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = build_model(d, cfg, &mut rng)?;
    let ops = OperatorSet::for_kinds(d.graph(), &model.kinds())?;
    let input = model.propagate_input(&ops, d.features().view())?;
    let labels = d.labels();

    let mut moments = AdamMoments::new(model.layers());
    let mut metrics = RunMetrics {
        seed: cfg.seed,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        val_accuracy: Vec::new(),
        best_epoch: None,
        test_accuracy: 0.0,
        epochs_run: 0,
        stopped_early: false,
        wall_time_secs: 0.0,
    };
    let mut best: Option<(f64, Model)> = None;

    for epoch in 0..cfg.max_epochs {
        let (logits, state) = model.forward_propagated(&ops, &input, Mode::Train(&mut rng))?;
        let (loss, grad) = masked_softmax_xent(logits.view(), labels, d.train_idx())?;
        let train_accuracy = accuracy(logits.view(), labels, d.train_idx());
        let grads = model.backward(&ops, &state, grad.view())?;
        let train_loss = loss + model.weight_decay_penalty(cfg.weight_decay);
        adam_step(model.layers_mut(), &grads, &mut moments, epoch + 1, cfg)?;

        let (eval_logits, _) = model.forward_propagated(&ops, &input, Mode::Eval)?;
        let (val_loss, val_accuracy) = if d.val_idx().is_empty() {
            (train_loss, train_accuracy)
        } else {
            (
                masked_softmax_xent(eval_logits.view(), labels, d.val_idx())?.0,
                accuracy(eval_logits.view(), labels, d.val_idx()),
            )
        };
        metrics.train_loss.push(train_loss);
        metrics.val_loss.push(val_loss);
        metrics.val_accuracy.push(val_accuracy);
        metrics.epochs_run = epoch + 1;
        if best.as_ref().is_none_or(|(acc, _)| val_accuracy > *acc) {
            best = Some((val_accuracy, model.clone()));
            metrics.best_epoch = Some(epoch);
        }
        on_epoch(&EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
        if early_stop_check(&metrics.val_loss, cfg.early_stop_window) {
            metrics.stopped_early = true;
            break;
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    metrics.test_accuracy = evaluate(&model, &ops, d.features().view(), labels, d.test_idx())?;
    metrics.wall_time_secs = start.elapsed().as_secs_f64();
    Ok((model, metrics))
}

/// Eval-mode accuracy of `model` on the nodes in `idx`.
pub fn evaluate(model: &Model, ops: &OperatorSet, x: ArrayView2<f64>, labels: &[i64], idx: &[usize]) -> Result<f64> {
    let logits = model.predict(ops, x)?;
    Ok(accuracy(logits.view(), labels, idx))
}

/// Runs seeds `cfg.seed, cfg.seed + 1, ...` (`cfg.num_runs` of them) on up to
/// `threads` worker threads. Results are in seed order.
pub fn run_seeds(d: &Dataset, cfg: &TrainConfig, threads: usize) -> Result<Vec<RunMetrics>> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.num_runs as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let threads = threads.clamp(1, seeds.len());
    let chunk = seeds.len().div_ceil(threads);
    let results: Vec<Result<Vec<RunMetrics>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&seed| {
                            let run_cfg = TrainConfig { seed, ..cfg.clone() };
                            train_model(d, &run_cfg).map(|(_, m)| m)
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training worker panicked")).collect()
    });
    let mut all = Vec::with_capacity(seeds.len());
    for r in results {
        all.extend(r?);
    }
    Ok(all)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub runs: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation (n - 1 denominator); zero for a single run.
    pub std_accuracy: f64,
}

pub fn aggregate_runs(runs: &[RunMetrics]) -> Result<RunSummary> {
    summarize(&runs.iter().map(|r| r.test_accuracy).collect::<Vec<_>>())
}

pub fn summarize(values: &[f64]) -> Result<RunSummary> {
    if values.is_empty() {
        return Err(Error::EmptyList);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(RunSummary {
        runs: values.len(),
        mean_accuracy: mean,
        std_accuracy: std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stop_rules() {
        let decreasing: Vec<f64> = (0..200).map(|i| 1.0 / (i + 1) as f64).collect();
        assert!((1..=decreasing.len()).all(|n| !early_stop_check(&decreasing[..n], 45)));
        assert!(!early_stop_check(&[1.0, 5.0], 45));

        let mut h: Vec<f64> = (0..60).map(|i| 1.0 - 0.001 * i as f64).collect();
        h.push(2.0);
        let first = (1..=h.len()).find(|&n| early_stop_check(&h[..n], 45));
        assert_eq!(first, Some(61));
    }

    #[test]
    fn aggregate() {
        assert!(matches!(summarize(&[]), Err(Error::EmptyList)));
        assert_eq!(summarize(&[0.7]).unwrap().std_accuracy, 0.0);
        let s = summarize(&[0.8, 0.9]).unwrap();
        assert!((s.mean_accuracy - 0.85).abs() < 1e-15);
        assert!((s.std_accuracy - 0.005f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { dropout_rate: 1.0, ..Default::default() },
            TrainConfig { early_stop_window: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }
}
