//! Layers, losses and the model stack for semi-supervised node classification.

mod activation;
mod checkpoint;
mod layers;
mod loss;
mod model;

pub use activation::{inverted_dropout, relu};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, LayerInfo, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use layers::{dcnn_forward, gcn_forward, tagcn_forward, Layer, LayerKind, OperatorSet};
pub use loss::{accuracy, masked_softmax_xent};
pub use model::{ForwardState, Mode, Model, PropagatedInput};
