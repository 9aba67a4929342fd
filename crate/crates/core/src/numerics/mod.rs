//! Dense matrices, activations, seeded randomness and FLOP accounting.

mod activation;
mod dd;
pub mod flops;
mod rng;
mod tensor;

pub use activation::{activation, sigmoid, softmax_cols, softmax_rows, Activation};
pub use dd::DoubleDouble;
pub use flops::FlopTally;
pub use rng::RngStream;
pub use tensor::Tensor2;

#[cfg(test)]
mod tests;
