//! Dense tensors, convolution layers, the gradient tape and the optimizer.

pub mod activation;
pub mod checkpoint;
pub mod conv;
pub mod optim;
pub mod params;
pub mod softmax;
pub mod tape;
pub mod tensor;

pub use activation::{lrelu, Activation, LRELU_SLOPE};
pub use conv::{conv_forward, transposed_conv_forward, ConvLayerParams, ConvMode};
pub use optim::{Adam, AdamConfig};
pub use params::{Param, ParamId, ParamSet};
pub use softmax::{logsumexp, softmax, softmax_vec};
pub use tape::{Gradients, Pooling, Tape};
pub use tensor::Tensor;
