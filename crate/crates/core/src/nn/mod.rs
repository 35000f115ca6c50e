//! Minimal feed-forward networks with hand-written backward passes.

mod adam;
mod layers;
mod network;
mod tensor;

use thiserror::Error;

pub use adam::Adam;
pub use layers::{sigmoid, LayerSpec};
pub use network::{Network, Trace};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch at {layer}: expected {expected}, got {got:?}")]
    Shape {
        layer: String,
        expected: String,
        got: Vec<usize>,
    },
    #[error("parameter count mismatch: expected {expected}, got {got}")]
    ParamCount { expected: usize, got: usize },
}
