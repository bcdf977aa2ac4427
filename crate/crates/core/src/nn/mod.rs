//! Layers, the network forward/backward contract, losses and optimizers.

pub mod layer;
pub mod loss;
pub mod network;
pub mod optim;

pub use layer::{dropout_forward, BinaryActivationSpec, Conv2d, Dense, Layer, ParamGrad};
pub use loss::{accuracy, cross_entropy, predictions};
pub use network::{ForwardOutput, Gradients, Mode, Network};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind, OptimizerName};
