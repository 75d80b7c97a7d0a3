//! Dense tensors and the primitive layers, each with an explicit backward pass.

mod activation;
mod conv;
pub mod kink;
mod loss;
mod param;
mod shape_ops;
mod tensor;
mod threshold;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward, sigmoid_scalar};
pub use conv::{conv1d_backward, conv1d_forward, Conv1d, ConvSpec};
pub use loss::{argmax_rows, softmax_cross_entropy};
pub(crate) use param::join;
pub use param::{LayerParams, Param, Parameterized};
pub use shape_ops::{
    concat_channels, global_avg_pool, global_avg_pool_backward, linear_backward, linear_forward, linear_params,
    split_channels,
};
pub use tensor::{Scalar, Shape, Tensor};
pub use threshold::{soft_threshold, soft_threshold_backward};
