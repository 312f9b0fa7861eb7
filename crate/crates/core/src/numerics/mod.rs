//! Dense tensors, reverse-mode differentiation and Adam.

mod adam;
pub mod gradcheck;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use tape::{sigmoid, Gradients, Tape, Var};
pub use tensor::{cosine_sim, dot, softmax, Tensor};
