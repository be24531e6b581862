//! Dense numerical core: matrices, differentiable primitives with exact
//! analytic gradients, an SGD optimizer, and a finite-difference gradient
//! checker.

pub mod gradcheck;
pub mod matrix;
pub mod ops;
pub mod optim;

pub use gradcheck::{grad_check, BlockCheck, GradCheckReport};
pub use matrix::Matrix;
pub use ops::{
    bce_loss, dropout_backward, dropout_forward, linear_backward, linear_forward, relu_backward,
    relu_forward, softmax_rows, softmax_rows_backward, BCE_EPSILON,
};
pub use optim::{sgd_step, OptimState, ParamBlock, Parameterized};
