//! Dense numeric core: matrices, deterministic RNG, differentiable ops, and
//! a finite-difference gradient checker.
//!
//! Every differentiable operation comes as an explicit forward (usually
//! caching what backward needs) plus a hand-written backward. There is no
//! tape; composite models chain the per-op backwards themselves.

pub mod gradcheck;
pub mod matrix;
pub mod ops;
pub mod param;
pub mod rng;

pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use matrix::DenseMatrix;
pub use ops::{
    dropout_backward, dropout_forward, dsigmoid_from_y, dtanh_from_y, hardswish,
    hardswish_backward, hardswish_mat, linear_backward, linear_forward, mean_aggregate,
    mean_aggregate_backward, mse_loss, mse_loss_and_grad, rmse, sigmoid, sigmoid_mat, tanh_mat,
    DropoutMask, Neighborhood,
};
pub use param::{ParamModel, Parameter};
pub use rng::{stream, RngState};
