use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Zip};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::activation::{inverted_dropout, relu};
use super::layers::{Layer, LayerKind, OperatorSet};
use crate::error::{Error, Result};
use crate::filters::ParameterCount;

/// Forward-pass mode. Training mode draws fresh dropout masks from the given RNG.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

/// A stack of graph convolution layers with ReLU (and dropout while training)
/// between consecutive layers. The last layer emits class logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    layers: Vec<Layer>,
    dropout_rate: f64,
}

/// Layer-0 propagated input (`A^k X` terms). It depends only on the graph and
/// the input features, so training computes it once.
#[derive(Debug, Clone)]
pub struct PropagatedInput {
    terms: Arc<Vec<Array2<f64>>>,
}

impl PropagatedInput {
    pub fn terms(&self) -> &[Array2<f64>] {
        &self.terms
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardState {
    signature: Vec<(LayerKind, usize, usize)>,
    propagated: Vec<Arc<Vec<Array2<f64>>>>,
    pre_activations: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
    dropout_rate: f64,
}

impl ForwardState {
    /// Binary dropout masks of the hidden layers (`None` in eval mode).
    pub fn masks(&self) -> &[Option<Array2<f64>>] {
        &self.masks
    }

    pub fn pre_activations(&self) -> &[Array2<f64>] {
        &self.pre_activations
    }
}

impl Model {
    pub fn new(layers: Vec<Layer>, dropout_rate: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a model needs at least one layer".into()));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidRate(dropout_rate));
        }
        for pair in layers.windows(2) {
            if pair[0].out_width() != pair[1].in_width() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].out_width(),
                    found: pair[1].in_width(),
                });
            }
        }
        Ok(Model { layers, dropout_rate })
    }

    /// Standard architecture for `kind`: one hidden layer per entry of `hidden`,
    /// then a layer mapping to `num_classes`.
    ///
    /// For DCNN the hidden layers are diffusion layers over `filter_size` hops
    /// (their width is fixed at `(hops + 1) * C`, so `hidden` only sets the
    /// depth) and the classifier is a dense layer with bias.
    pub fn build<R: Rng>(
        kind: LayerKind,
        in_width: usize,
        hidden: &[usize],
        num_classes: usize,
        filter_size: usize,
        dropout_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = in_width;
        let outs = hidden.iter().copied().map(Some).chain(std::iter::once(None));
        for out in outs {
            let target = out.unwrap_or(num_classes);
            let layer = match kind {
                LayerKind::Tagcn => Layer::tagcn(width, target, filter_size, true, rng),
                LayerKind::Gcn => Layer::gcn(width, target, rng),
                LayerKind::Cheb => Layer::cheb(width, target, filter_size, rng),
                LayerKind::Dcnn if out.is_some() => Layer::dcnn(width, filter_size, rng),
                LayerKind::Dcnn => Layer::tagcn(width, target, 0, true, rng),
            };
            width = layer.out_width();
            layers.push(layer);
        }
        Model::new(layers, dropout_rate)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn in_width(&self) -> usize {
        self.layers[0].in_width()
    }

    pub fn out_width(&self) -> usize {
        self.layers[self.layers.len() - 1].out_width()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    /// Distinct layer kinds, in order of first appearance.
    pub fn kinds(&self) -> Vec<LayerKind> {
        let mut kinds = Vec::new();
        for l in &self.layers {
            if !kinds.contains(&l.kind()) {
                kinds.push(l.kind());
            }
        }
        kinds
    }

    pub fn parameter_count(&self) -> ParameterCount {
        self.layers.iter().fold(ParameterCount { learnable: 0, table_convention: 0 }, |acc, l| {
            let c = l.parameter_count();
            ParameterCount {
                learnable: acc.learnable + c.learnable,
                table_convention: acc.table_convention + c.table_convention,
            }
        })
    }

    /// Gradient container of the same shape, all zeros.
    pub fn zero_grads(&self) -> Vec<Layer> {
        self.layers.iter().map(Layer::zeros_like).collect()
    }

    pub fn propagate_input(&self, ops: &OperatorSet, x: ArrayView2<f64>) -> Result<PropagatedInput> {
        let first = &self.layers[0];
        let op = ops.get(first.kind().operator_kind())?;
        Ok(PropagatedInput {
            terms: Arc::new(first.propagate(op, x)?),
        })
    }

    pub fn forward(&self, ops: &OperatorSet, x: ArrayView2<f64>, mode: Mode<'_>) -> Result<(Array2<f64>, ForwardState)> {
        let input = self.propagate_input(ops, x)?;
        self.forward_propagated(ops, &input, mode)
    }

    /// Forward pass starting from an already propagated input.
    pub fn forward_propagated(
        &self,
        ops: &OperatorSet,
        input: &PropagatedInput,
        mut mode: Mode<'_>,
    ) -> Result<(Array2<f64>, ForwardState)> {
        let last = self.layers.len() - 1;
        let mut state = ForwardState {
            signature: self.signature(),
            propagated: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(last),
            masks: Vec::with_capacity(last),
            dropout_rate: self.dropout_rate,
        };
        let mut y = self.layers[0].combine(input.terms())?;
        state.propagated.push(Arc::clone(&input.terms));
        for layer in &self.layers[1..] {
            let mut h = relu(y.view());
            let mask = match &mut mode {
                Mode::Train(rng) if self.dropout_rate > 0.0 => {
                    let (dropped, mask) = inverted_dropout(h.view(), self.dropout_rate, &mut **rng)?;
                    h = dropped;
                    Some(mask)
                }
                _ => None,
            };
            state.pre_activations.push(y);
            state.masks.push(mask);
            let op = ops.get(layer.kind().operator_kind())?;
            let terms = layer.propagate(op, h.view())?;
            y = layer.combine(&terms)?;
            state.propagated.push(Arc::new(terms));
        }
        Ok((y, state))
    }

    /// Eval-mode logits.
    pub fn predict(&self, ops: &OperatorSet, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(ops, x, Mode::Eval)?.0)
    }

    /// Parameter gradients given the gradient of the loss with respect to the logits.
    pub fn backward(&self, ops: &OperatorSet, state: &ForwardState, grad: ArrayView2<f64>) -> Result<Vec<Layer>> {
        if state.signature != self.signature() {
            return Err(Error::StaleState("forward state was produced by a different architecture".into()));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad.to_owned();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            grads.push(layer.param_grads(&state.propagated[l], g.view())?);
            if l == 0 {
                break;
            }
            let op_t = ops.transposed(layer.kind().operator_kind())?;
            let mut gin = layer.input_grad(op_t, g.view())?;
            let pre = &state.pre_activations[l - 1];
            if pre.dim() != gin.dim() {
                return Err(Error::StaleState(format!(
                    "hidden activation shape {:?} does not match gradient {:?}",
                    pre.dim(),
                    gin.dim()
                )));
            }
            match &state.masks[l - 1] {
                Some(mask) => {
                    let scale = 1.0 / (1.0 - state.dropout_rate);
                    Zip::from(&mut gin).and(pre).and(mask).for_each(|gv, &p, &m| {
                        *gv = if p > 0.0 { *gv * m * scale } else { 0.0 };
                    });
                }
                None => Zip::from(&mut gin).and(pre).for_each(|gv, &p| {
                    if p <= 0.0 {
                        *gv = 0.0;
                    }
                }),
            }
            g = gin;
        }
        grads.reverse();
        Ok(grads)
    }

    /// Half the squared norm of the first layer's weights, scaled by `coeff`.
    /// Its gradient is `coeff * W`, which is what the optimizer adds.
    pub fn weight_decay_penalty(&self, coeff: f64) -> f64 {
        let sq: f64 = self.layers[0].weights().iter().flat_map(|w| w.iter()).map(|v| v * v).sum();
        0.5 * coeff * sq
    }

    fn signature(&self) -> Vec<(LayerKind, usize, usize)> {
        self.layers.iter().map(|l| (l.kind(), l.in_width(), l.out_width())).collect()
    }
}
