use crate::numerics::tensor::Tensor;

/// Slope of the leaky ReLU used throughout the discriminators.
pub const LRELU_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    None,
    Relu,
    LeakyRelu(f64),
    Tanh,
}

impl Activation {
    pub fn lrelu() -> Self {
        Activation::LeakyRelu(LRELU_SLOPE)
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::None => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::None => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn forward(self, x: &Tensor) -> Tensor {
        if self == Activation::None {
            return x.clone();
        }
        x.map(|v| self.apply(v))
    }

    pub fn backward(self, pre: &Tensor, post: &Tensor, grad_out: &Tensor) -> Tensor {
        let data = pre
            .data()
            .iter()
            .zip(post.data())
            .zip(grad_out.data())
            .map(|((&x, &y), &g)| g * self.derivative(x, y))
            .collect();
        Tensor::new(pre.shape(), data).expect("same shape")
    }
}

/// Elementwise leaky rectifier.
pub fn lrelu(x: &Tensor, slope: f64) -> Tensor {
    Activation::LeakyRelu(slope).forward(x)
}
