//! Minimal differentiable core: dense layers, activations, losses,
//! optimizers and a finite-difference gradient checker.
//!
//! Everything is `f64` and hand-differentiated. Forward passes cache what
//! their backward pass needs; backward passes *accumulate* into
//! [`Tensor::grad`], so alternating updates (discriminator, generator,
//! surrogate) stay explicit about when gradients are cleared.

mod gradcheck;
mod layers;
pub mod loss;
mod optim;
mod tensor;

pub use gradcheck::grad_check;
pub use layers::{dense_backward, dense_forward, relu, sigmoid, softmax_rows, Activation, Dense, Mlp};
pub use optim::{Optimizer, OptimizerKind};
pub use tensor::{check_finite, Tensor};
