//! Dense-network training core: forward pass, softmax cross-entropy with
//! hand-derived backpropagation, and the Adam optimizer.

mod adam;
mod loss;
mod net;

pub use adam::{adam_step, OptimizerConfig, ParamBlock};
pub use loss::{batch_probs, loss_and_backprop, softmax};
pub use net::{Activation, DenseLayer, ForwardTrace, MultiHeadNet};
