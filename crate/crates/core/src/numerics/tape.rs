//! Linear gradient tape for feed-forward chains.
//!
//! Each forward method applies one operation and, when recording, saves what
//! its backward rule needs. [`Tape::backward`] replays the records in reverse.

use crate::error::{Error, Result};
use crate::numerics::activation::Activation;
use crate::numerics::conv::{self, ConvMode};
use crate::numerics::params::{ParamId, ParamSet};
use crate::numerics::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pooling {
    /// Mean over every spatial and spectral position.
    Global,
    /// Mean over the spectral axis at the spatial center only.
    Center,
}

#[derive(Debug)]
enum Record {
    Conv {
        kernel: ParamId,
        bias: ParamId,
        stride: [usize; 3],
        mode: ConvMode,
        input: Tensor,
    },
    Act {
        kind: Activation,
        pre: Tensor,
        post: Tensor,
    },
    Pool {
        kind: Pooling,
        in_shape: Vec<usize>,
    },
    Dense {
        weight: ParamId,
        bias: ParamId,
        input: Tensor,
    },
    Reshape {
        in_shape: Vec<usize>,
    },
    Crop {
        in_shape: Vec<usize>,
        out_shape: Vec<usize>,
    },
}

/// Gradients produced by one backward replay.
#[derive(Clone, Debug)]
pub struct Gradients {
    /// One tensor per parameter of the set, zero where the tape never used it.
    pub params: Vec<Tensor>,
    /// Gradient with respect to the tape's first input.
    pub input: Tensor,
}

impl Gradients {
    /// Add another replay's parameter gradients into this one.
    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            a.axpy(1.0, b)?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct Tape {
    records: Vec<Record>,
    recording: bool,
    consumed: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            records: Vec::new(),
            recording: true,
            consumed: false,
        }
    }

    /// A tape that saves nothing; used for pure inference.
    pub fn inference() -> Self {
        Tape {
            records: Vec::new(),
            recording: false,
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn conv(
        &mut self,
        params: &ParamSet,
        x: Tensor,
        kernel: ParamId,
        bias: ParamId,
        stride: [usize; 3],
        mode: ConvMode,
    ) -> Result<Tensor> {
        let k = params.get(kernel);
        let b = params.get(bias);
        conv::check_kernel(k, b, stride)?;
        let y = match mode {
            ConvMode::Conv => conv::conv_linear(&x, k, b.data(), stride)?,
            ConvMode::Transposed => conv::transposed_linear(&x, k, b.data(), stride)?,
        };
        if self.recording {
            self.records.push(Record::Conv {
                kernel,
                bias,
                stride,
                mode,
                input: x,
            });
        }
        Ok(y)
    }

    pub fn activation(&mut self, x: Tensor, kind: Activation) -> Tensor {
        if kind == Activation::None {
            return x;
        }
        let y = kind.forward(&x);
        if self.recording {
            self.records.push(Record::Act {
                kind,
                pre: x,
                post: y.clone(),
            });
        }
        y
    }

    /// `(n, h, w, b, c)` to `(n, c)`.
    pub fn pool(&mut self, x: Tensor, kind: Pooling) -> Result<Tensor> {
        let s = x.shape().to_vec();
        if s.len() != 5 {
            return Err(Error::Shape(format!("pooling expects (n, h, w, b, c), got {s:?}")));
        }
        let (n, h, w, b, c) = (s[0], s[1], s[2], s[3], s[4]);
        let mut out = vec![0.0; n * c];
        let positions: Vec<usize> = match kind {
            Pooling::Global => (0..h * w * b).collect(),
            Pooling::Center => {
                let base = ((h / 2) * w + w / 2) * b;
                (base..base + b).collect()
            }
        };
        let scale = 1.0 / positions.len() as f64;
        for i in 0..n {
            let src = x.row(i);
            let dst = &mut out[i * c..(i + 1) * c];
            for &p in &positions {
                for (d, &v) in dst.iter_mut().zip(&src[p * c..(p + 1) * c]) {
                    *d += v;
                }
            }
            for d in dst.iter_mut() {
                *d *= scale;
            }
        }
        if self.recording {
            self.records.push(Record::Pool { kind, in_shape: s });
        }
        Tensor::new(&[n, c], out)
    }

    /// `(n, d_in) · (d_in, d_out) + bias`.
    pub fn dense(&mut self, params: &ParamSet, x: Tensor, weight: ParamId, bias: ParamId) -> Result<Tensor> {
        let w = params.get(weight);
        let b = params.get(bias);
        let (xs, ws) = (x.shape(), w.shape());
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] || b.shape() != [ws[1]] {
            return Err(Error::Shape(format!(
                "dense layer: input {xs:?}, weight {ws:?}, bias {:?}",
                b.shape()
            )));
        }
        let (n, dout) = (xs[0], ws[1]);
        let mut out = vec![0.0; n * dout];
        for i in 0..n {
            let row = &mut out[i * dout..(i + 1) * dout];
            row.copy_from_slice(b.data());
            for (k, &xv) in x.row(i).iter().enumerate() {
                let wr = &w.data()[k * dout..(k + 1) * dout];
                for (o, &wv) in row.iter_mut().zip(wr) {
                    *o += xv * wv;
                }
            }
        }
        if self.recording {
            self.records.push(Record::Dense {
                weight,
                bias,
                input: x,
            });
        }
        Tensor::new(&[n, dout], out)
    }

    pub fn reshape(&mut self, x: Tensor, shape: &[usize]) -> Result<Tensor> {
        let in_shape = x.shape().to_vec();
        let y = x.reshape(shape)?;
        if self.recording {
            self.records.push(Record::Reshape { in_shape });
        }
        Ok(y)
    }

    /// Keep the leading `(h, w, b)` block of a `(n, h, w, b, c)` tensor.
    pub fn crop(&mut self, x: Tensor, dims: [usize; 3]) -> Result<Tensor> {
        let s = x.shape().to_vec();
        if s.len() != 5 || dims[0] > s[1] || dims[1] > s[2] || dims[2] > s[3] {
            return Err(Error::Shape(format!("cannot crop {s:?} to {dims:?}")));
        }
        if dims == [s[1], s[2], s[3]] {
            return Ok(x);
        }
        let out_shape = vec![s[0], dims[0], dims[1], dims[2], s[4]];
        let c = s[4];
        let mut out = Vec::with_capacity(out_shape.iter().product());
        for n in 0..s[0] {
            let src = x.row(n);
            for h in 0..dims[0] {
                for w in 0..dims[1] {
                    let start = ((h * s[2] + w) * s[3]) * c;
                    out.extend_from_slice(&src[start..start + dims[2] * c]);
                }
            }
        }
        if self.recording {
            self.records.push(Record::Crop {
                in_shape: s,
                out_shape: out_shape.clone(),
            });
        }
        Tensor::new(&out_shape, out)
    }

    /// Replay backward and release the saved activations. A tape can be
    /// consumed once; a second call is a state error.
    pub fn backward(&mut self, params: &ParamSet, grad: Tensor) -> Result<Gradients> {
        let out = self.backward_retained(params, grad)?;
        self.records.clear();
        self.consumed = true;
        Ok(out)
    }

    /// Replay backward without consuming the tape; repeated calls return the
    /// same gradients.
    pub fn backward_retained(&self, params: &ParamSet, grad: Tensor) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::State("tape already consumed by backward".into()));
        }
        if !self.recording {
            return Err(Error::State("inference tape holds no records".into()));
        }
        let mut pgrads = params.zero_grads();
        let mut g = grad;
        for record in self.records.iter().rev() {
            g = match record {
                Record::Conv {
                    kernel,
                    bias,
                    stride,
                    mode,
                    input,
                } => {
                    let k = params.get(*kernel);
                    let (gx, gk, gb) = match mode {
                        ConvMode::Conv => conv::conv_linear_backward(input, k, *stride, &g),
                        ConvMode::Transposed => conv::transposed_linear_backward(input, k, *stride, &g),
                    };
                    pgrads[kernel.0].axpy(1.0, &gk)?;
                    pgrads[bias.0].axpy(1.0, &gb)?;
                    gx
                }
                Record::Act { kind, pre, post } => kind.backward(pre, post, &g),
                Record::Pool { kind, in_shape } => pool_backward(*kind, in_shape, &g),
                Record::Dense { weight, bias, input } => {
                    let w = params.get(*weight);
                    let (n, din) = (input.shape()[0], input.shape()[1]);
                    let dout = w.shape()[1];
                    let mut gx = vec![0.0; n * din];
                    let gw = pgrads[weight.0].data_mut();
                    for i in 0..n {
                        let gy = g.row(i);
                        let x = input.row(i);
                        for k in 0..din {
                            let wr = &w.data()[k * dout..(k + 1) * dout];
                            gx[i * din + k] = wr.iter().zip(gy).map(|(a, b)| a * b).sum();
                            let gwr = &mut gw[k * dout..(k + 1) * dout];
                            for (acc, &u) in gwr.iter_mut().zip(gy) {
                                *acc += x[k] * u;
                            }
                        }
                    }
                    let gb = pgrads[bias.0].data_mut();
                    for i in 0..n {
                        for (acc, &u) in gb.iter_mut().zip(g.row(i)) {
                            *acc += u;
                        }
                    }
                    Tensor::new(&[n, din], gx)?
                }
                Record::Reshape { in_shape } => g.reshape(in_shape)?,
                Record::Crop { in_shape, out_shape } => crop_backward(in_shape, out_shape, &g),
            };
        }
        Ok(Gradients {
            params: pgrads,
            input: g,
        })
    }
}

fn pool_backward(kind: Pooling, in_shape: &[usize], g: &Tensor) -> Tensor {
    let (n, h, w, b, c) = (in_shape[0], in_shape[1], in_shape[2], in_shape[3], in_shape[4]);
    let mut out = Tensor::zeros(in_shape);
    let positions: Vec<usize> = match kind {
        Pooling::Global => (0..h * w * b).collect(),
        Pooling::Center => {
            let base = ((h / 2) * w + w / 2) * b;
            (base..base + b).collect()
        }
    };
    let scale = 1.0 / positions.len() as f64;
    for i in 0..n {
        let gy: Vec<f64> = g.row(i).iter().map(|v| v * scale).collect();
        let dst = out.row_mut(i);
        for &p in &positions {
            dst[p * c..(p + 1) * c].copy_from_slice(&gy);
        }
    }
    out
}

fn crop_backward(in_shape: &[usize], out_shape: &[usize], g: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(in_shape);
    let c = in_shape[4];
    let run = out_shape[3] * c;
    for n in 0..in_shape[0] {
        let src = g.row(n).to_vec();
        let dst = out.row_mut(n);
        let mut offset = 0;
        for h in 0..out_shape[1] {
            for w in 0..out_shape[2] {
                let start = ((h * in_shape[2] + w) * in_shape[3]) * c;
                dst[start..start + run].copy_from_slice(&src[offset..offset + run]);
                offset += run;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_conv() -> (ParamSet, ParamId, ParamId) {
        let mut ps = ParamSet::new();
        let k = ps.add("k", Tensor::full(&[1, 1, 1, 1, 1], 1.0), true);
        let b = ps.add("b", Tensor::zeros(&[1]), true);
        (ps, k, b)
    }

    #[test]
    fn sum_of_identity_conv_has_unit_input_gradient() {
        let (ps, k, b) = identity_conv();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::randn(&[1, 3, 3, 2, 1], 1.0, &mut rng);
        let mut tape = Tape::new();
        let y = tape.conv(&ps, x, k, b, [1, 1, 1], ConvMode::Conv).unwrap();
        let g = tape.backward(&ps, Tensor::full(y.shape(), 1.0)).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let (ps, k, b) = identity_conv();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::randn(&[2, 3, 3, 2, 1], 1.0, &mut rng);
        let mut tape = Tape::new();
        let y = tape.conv(&ps, x, k, b, [1, 1, 1], ConvMode::Conv).unwrap();
        let y = tape.activation(y, Activation::lrelu());
        let g = tape.backward(&ps, Tensor::zeros(y.shape())).unwrap();
        assert!(g.params.iter().all(|t| t.max_abs() == 0.0));
    }

    #[test]
    fn second_backward_is_state_error() {
        let (ps, k, b) = identity_conv();
        let x = Tensor::zeros(&[1, 1, 1, 1, 1]);
        let mut tape = Tape::new();
        let y = tape.conv(&ps, x, k, b, [1, 1, 1], ConvMode::Conv).unwrap();
        tape.backward(&ps, y.clone()).unwrap();
        assert!(matches!(tape.backward(&ps, y), Err(Error::State(_))));
    }

    #[test]
    fn retained_backward_is_idempotent() {
        let (ps, k, b) = identity_conv();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::randn(&[1, 2, 2, 2, 1], 1.0, &mut rng);
        let mut tape = Tape::new();
        let y = tape.conv(&ps, x, k, b, [1, 1, 1], ConvMode::Conv).unwrap();
        let up = Tensor::randn(y.shape(), 1.0, &mut rng);
        let a = tape.backward_retained(&ps, up.clone()).unwrap();
        let c = tape.backward_retained(&ps, up).unwrap();
        assert_eq!(a.params, c.params);
        assert_eq!(a.input, c.input);
    }
}
