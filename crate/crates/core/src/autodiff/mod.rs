//! Reverse-mode differentiation: a tensor tape for the networks and the
//! unrolled solver, and a scalar tape for per-cell kernels.

pub mod scalar;
pub mod tape;
pub mod tensor;

pub use scalar::{ScalarTape, Var};
pub use tape::{gelu, gelu_grad, CustomOp, Gradients, NodeId, Tape};
pub use tensor::Tensor;
