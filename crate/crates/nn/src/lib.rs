//! A deliberately small neural-network stack for 1-D temporal convolution.
//!
//! Everything operates on [`Tensor`], a dense `(batch, channels, time)` array of
//! `f64`. Layers expose explicit forward and backward passes; there is no
//! general autodiff graph. [`Sequential`] chains layers and caches what the
//! backward pass needs, [`AmsGrad`] updates parameters, and [`grad_check`]
//! verifies analytic gradients against central differences.

mod activation;
mod conv;
mod error;
mod gradcheck;
mod linalg;
mod loss;
mod optim;
mod param;
mod pool;
mod sequential;
mod tensor;

pub use activation::{dropout, dropout_grad, relu, relu_grad, sigmoid, sigmoid_grad, Mode};
pub use conv::{
    conv1d, conv1d_grad, transposed_conv1d, transposed_conv1d_grad, Conv1d, ConvGrads,
    TransposedConv1d,
};
pub use error::{NnError, Result};
pub use gradcheck::{
    grad_check, grad_check_with, layer_suite, GradCheckReport, LossKind, Objective, Probe, SequentialObjective,
    FD_STEP, MIN_COORDS,
};
pub use loss::{bce_loss, l1_penalty, l1_penalty_grad, mse_loss, Loss, BCE_CLAMP};
pub use optim::{amsgrad_step, AmsGrad, AmsGradConfig, Moments};
pub use param::Param;
pub use pool::{maxpool1d, maxpool1d_grad, MaxPoolOutput};
pub use sequential::{Layer, LayerSpec, Sequential};
pub use tensor::Tensor;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
