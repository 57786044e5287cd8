//! From-scratch network kernel: tensors, layers, reverse-mode gradients, SGD.

pub mod layers;
mod model;
mod real;
mod tensor;

pub use layers::{Conv2d, CropIntegrate, Dense, Flatten, MaxPool2d, Param, Relu, Sigmoid};
pub use model::{Layer, LayerSpec, Model, ModelConfig, Preset};
pub use real::Real;
pub use tensor::Tensor;
