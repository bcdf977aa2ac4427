//! Neural-network training with the SHADE conditional-entropy regularizer,
//! baseline regularizers, and an information-theory toolkit for checking the
//! entropy bounds the regularizer relies on.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod data;
pub mod error;
pub mod experiment;
pub mod info;
pub mod nn;
pub mod rng;
pub mod shade;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::Tensor;
