//! Spatial-spectral 3-D convolution and its adjoint.
//!
//! Feature tensors are laid out `(n, h, w, b, c)`: batch, two spatial axes,
//! the spectral axis, then channels. Kernels are `(kh, kw, kb, c_in, c_out)`
//! from the point of view of the layer that owns them. Convolution uses
//! cross-correlation (no kernel flip) with "same" zero padding, so a stride
//! `s` maps an extent `m` to `ceil(m / s)`. The transposed layer is the exact
//! adjoint of that map and scales every extent by its stride.

use crate::error::{Error, Result};
use crate::numerics::activation::Activation;
use crate::numerics::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvMode {
    Conv,
    Transposed,
}

/// Weights, bias and geometry of one convolutional layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayerParams {
    pub kernel: Tensor,
    pub bias: Tensor,
    pub stride: [usize; 3],
    pub mode: ConvMode,
}

impl ConvLayerParams {
    pub fn new(kernel: Tensor, bias: Tensor, stride: [usize; 3], mode: ConvMode) -> Result<Self> {
        check_kernel(&kernel, &bias, stride)?;
        Ok(ConvLayerParams {
            kernel,
            bias,
            stride,
            mode,
        })
    }

    pub fn extent(&self) -> [usize; 3] {
        let s = self.kernel.shape();
        [s[0], s[1], s[2]]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[3]
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[4]
    }

    /// The layer whose linear part is the adjoint of this one: channel axes
    /// swapped, mode flipped, zero bias.
    pub fn adjoint(&self) -> ConvLayerParams {
        let kernel = swap_channel_axes(&self.kernel);
        let c_out = kernel.shape()[4];
        ConvLayerParams {
            kernel,
            bias: Tensor::zeros(&[c_out]),
            stride: self.stride,
            mode: match self.mode {
                ConvMode::Conv => ConvMode::Transposed,
                ConvMode::Transposed => ConvMode::Conv,
            },
        }
    }
}

pub(crate) fn check_kernel(kernel: &Tensor, bias: &Tensor, stride: [usize; 3]) -> Result<()> {
    let ks = kernel.shape();
    if ks.len() != 5 {
        return Err(Error::Shape(format!(
            "kernel must be (kh, kw, kb, c_in, c_out), got {ks:?}"
        )));
    }
    if ks.contains(&0) {
        return Err(Error::Parameter(format!("kernel extents must be >= 1, got {ks:?}")));
    }
    if stride.contains(&0) {
        return Err(Error::Parameter(format!("strides must be >= 1, got {stride:?}")));
    }
    if bias.shape() != [ks[4]] {
        return Err(Error::Shape(format!(
            "bias shape {:?} does not match c_out = {}",
            bias.shape(),
            ks[4]
        )));
    }
    Ok(())
}

/// Swap the `c_in` and `c_out` axes of a 5-D kernel.
pub fn swap_channel_axes(kernel: &Tensor) -> Tensor {
    let s = kernel.shape();
    let (taps, ci, co) = (s[0] * s[1] * s[2], s[3], s[4]);
    let src = kernel.data();
    let mut out = vec![0.0; src.len()];
    for t in 0..taps {
        for i in 0..ci {
            for o in 0..co {
                out[(t * co + o) * ci + i] = src[(t * ci + i) * co + o];
            }
        }
    }
    Tensor::new(&[s[0], s[1], s[2], co, ci], out).expect("same element count")
}

/// Index bookkeeping shared by the convolution and its adjoint. `big` is the
/// high-resolution side (conv input, transposed output), `small` the strided
/// side.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Geometry {
    pub big: [usize; 3],
    pub small: [usize; 3],
    pub k: [usize; 3],
    pub s: [usize; 3],
    pub pad: [usize; 3],
}

impl Geometry {
    pub fn conv(big: [usize; 3], k: [usize; 3], s: [usize; 3]) -> Self {
        let mut small = [0; 3];
        let mut pad = [0; 3];
        for a in 0..3 {
            small[a] = big[a].div_ceil(s[a]);
            let needed = (small[a] - 1) * s[a] + k[a];
            pad[a] = needed.saturating_sub(big[a]) / 2;
        }
        Geometry { big, small, k, s, pad }
    }

    pub fn transposed(small: [usize; 3], k: [usize; 3], s: [usize; 3]) -> Self {
        let big = [small[0] * s[0], small[1] * s[1], small[2] * s[2]];
        Self::conv(big, k, s)
    }

    fn small_len(&self) -> usize {
        self.small.iter().product()
    }

    fn big_len(&self) -> usize {
        self.big.iter().product()
    }

    /// Calls `f(small_pos, big_pos, tap)` for every in-bounds pairing.
    #[inline]
    pub fn taps(&self, mut f: impl FnMut(usize, usize, usize)) {
        let [sh, sw, sb] = self.small;
        let [bh, bw, bb] = self.big;
        let [kh, kw, kb] = self.k;
        for oh in 0..sh {
            for dh in 0..kh {
                let ih = (oh * self.s[0] + dh) as isize - self.pad[0] as isize;
                if ih < 0 || ih >= bh as isize {
                    continue;
                }
                for ow in 0..sw {
                    for dw in 0..kw {
                        let iw = (ow * self.s[1] + dw) as isize - self.pad[1] as isize;
                        if iw < 0 || iw >= bw as isize {
                            continue;
                        }
                        for ob in 0..sb {
                            for db in 0..kb {
                                let ib = (ob * self.s[2] + db) as isize - self.pad[2] as isize;
                                if ib < 0 || ib >= bb as isize {
                                    continue;
                                }
                                let small = (oh * sw + ow) * sb + ob;
                                let big = ((ih as usize) * bw + iw as usize) * bb + ib as usize;
                                let tap = (dh * kw + dw) * kb + db;
                                f(small, big, tap);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn batched(input: &Tensor) -> Result<(usize, [usize; 3], usize)> {
    let s = input.shape();
    match s.len() {
        4 => Ok((1, [s[0], s[1], s[2]], s[3])),
        5 => Ok((s[0], [s[1], s[2], s[3]], s[4])),
        _ => Err(Error::Shape(format!(
            "feature tensor must be (h, w, b, c) or (n, h, w, b, c), got {s:?}"
        ))),
    }
}

fn reshaped_like(input: &Tensor, n: usize, dims: [usize; 3], c: usize, data: Vec<f64>) -> Tensor {
    let shape: Vec<usize> = if input.rank() == 4 {
        vec![dims[0], dims[1], dims[2], c]
    } else {
        vec![n, dims[0], dims[1], dims[2], c]
    };
    Tensor::new(&shape, data).expect("consistent geometry")
}

/// Linear part of a strided "same" cross-correlation, plus bias.
pub(crate) fn conv_linear(input: &Tensor, kernel: &Tensor, bias: &[f64], stride: [usize; 3]) -> Result<Tensor> {
    let (n, dims, ci) = batched(input)?;
    let ks = kernel.shape();
    if ks[3] != ci {
        return Err(Error::Shape(format!(
            "input has {ci} channels but kernel expects {}",
            ks[3]
        )));
    }
    let co = ks[4];
    let g = Geometry::conv(dims, [ks[0], ks[1], ks[2]], stride);
    let (small_len, big_len) = (g.small_len(), g.big_len());
    let w = kernel.data();
    let x = input.data();
    let mut out = vec![0.0; n * small_len * co];
    for b in 0..n {
        let xb = &x[b * big_len * ci..(b + 1) * big_len * ci];
        let ob = &mut out[b * small_len * co..(b + 1) * small_len * co];
        for p in 0..small_len {
            ob[p * co..(p + 1) * co].copy_from_slice(bias);
        }
        g.taps(|small, big, tap| {
            let xin = &xb[big * ci..(big + 1) * ci];
            let acc = &mut ob[small * co..(small + 1) * co];
            let wt = &w[tap * ci * co..(tap + 1) * ci * co];
            for (i, &xv) in xin.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let wr = &wt[i * co..(i + 1) * co];
                for (a, &wv) in acc.iter_mut().zip(wr) {
                    *a += xv * wv;
                }
            }
        });
    }
    Ok(reshaped_like(input, n, g.small, co, out))
}

/// Gradients of [`conv_linear`] given the upstream gradient of its output.
pub(crate) fn conv_linear_backward(
    input: &Tensor,
    kernel: &Tensor,
    stride: [usize; 3],
    grad_out: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (n, dims, ci) = batched(input).expect("validated in forward");
    let ks = kernel.shape();
    let co = ks[4];
    let g = Geometry::conv(dims, [ks[0], ks[1], ks[2]], stride);
    let (small_len, big_len) = (g.small_len(), g.big_len());
    let w = kernel.data();
    let x = input.data();
    let gy = grad_out.data();
    let mut gx = vec![0.0; x.len()];
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; co];
    for b in 0..n {
        let xb = &x[b * big_len * ci..(b + 1) * big_len * ci];
        let gxb = &mut gx[b * big_len * ci..(b + 1) * big_len * ci];
        let gyb = &gy[b * small_len * co..(b + 1) * small_len * co];
        for p in 0..small_len {
            for (acc, &v) in gb.iter_mut().zip(&gyb[p * co..(p + 1) * co]) {
                *acc += v;
            }
        }
        g.taps(|small, big, tap| {
            let up = &gyb[small * co..(small + 1) * co];
            let base = tap * ci * co;
            for i in 0..ci {
                let wr = &w[base + i * co..base + (i + 1) * co];
                let mut s = 0.0;
                for (&wv, &u) in wr.iter().zip(up) {
                    s += wv * u;
                }
                gxb[big * ci + i] += s;
                let xv = xb[big * ci + i];
                if xv != 0.0 {
                    let gwr = &mut gw[base + i * co..base + (i + 1) * co];
                    for (gv, &u) in gwr.iter_mut().zip(up) {
                        *gv += xv * u;
                    }
                }
            }
        });
    }
    (
        Tensor::new(input.shape(), gx).expect("shape"),
        Tensor::new(kernel.shape(), gw).expect("shape"),
        Tensor::new(&[co], gb).expect("shape"),
    )
}

/// Linear part of the transposed convolution, plus bias.
pub(crate) fn transposed_linear(
    input: &Tensor,
    kernel: &Tensor,
    bias: &[f64],
    stride: [usize; 3],
) -> Result<Tensor> {
    let (n, dims, ci) = batched(input)?;
    let ks = kernel.shape();
    if ks[3] != ci {
        return Err(Error::Shape(format!(
            "input has {ci} channels but kernel expects {}",
            ks[3]
        )));
    }
    let co = ks[4];
    let g = Geometry::transposed(dims, [ks[0], ks[1], ks[2]], stride);
    let (small_len, big_len) = (g.small_len(), g.big_len());
    let w = kernel.data();
    let x = input.data();
    let mut out = vec![0.0; n * big_len * co];
    for b in 0..n {
        let xb = &x[b * small_len * ci..(b + 1) * small_len * ci];
        let ob = &mut out[b * big_len * co..(b + 1) * big_len * co];
        for p in 0..big_len {
            ob[p * co..(p + 1) * co].copy_from_slice(bias);
        }
        g.taps(|small, big, tap| {
            let xin = &xb[small * ci..(small + 1) * ci];
            let acc = &mut ob[big * co..(big + 1) * co];
            let wt = &w[tap * ci * co..(tap + 1) * ci * co];
            for (i, &xv) in xin.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let wr = &wt[i * co..(i + 1) * co];
                for (a, &wv) in acc.iter_mut().zip(wr) {
                    *a += xv * wv;
                }
            }
        });
    }
    Ok(reshaped_like(input, n, g.big, co, out))
}

pub(crate) fn transposed_linear_backward(
    input: &Tensor,
    kernel: &Tensor,
    stride: [usize; 3],
    grad_out: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (n, dims, ci) = batched(input).expect("validated in forward");
    let ks = kernel.shape();
    let co = ks[4];
    let g = Geometry::transposed(dims, [ks[0], ks[1], ks[2]], stride);
    let (small_len, big_len) = (g.small_len(), g.big_len());
    let w = kernel.data();
    let x = input.data();
    let gy = grad_out.data();
    let mut gx = vec![0.0; x.len()];
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; co];
    for b in 0..n {
        let xb = &x[b * small_len * ci..(b + 1) * small_len * ci];
        let gxb = &mut gx[b * small_len * ci..(b + 1) * small_len * ci];
        let gyb = &gy[b * big_len * co..(b + 1) * big_len * co];
        for p in 0..big_len {
            for (acc, &v) in gb.iter_mut().zip(&gyb[p * co..(p + 1) * co]) {
                *acc += v;
            }
        }
        g.taps(|small, big, tap| {
            let up = &gyb[big * co..(big + 1) * co];
            let base = tap * ci * co;
            for i in 0..ci {
                let wr = &w[base + i * co..base + (i + 1) * co];
                let mut s = 0.0;
                for (&wv, &u) in wr.iter().zip(up) {
                    s += wv * u;
                }
                gxb[small * ci + i] += s;
                let xv = xb[small * ci + i];
                if xv != 0.0 {
                    let gwr = &mut gw[base + i * co..base + (i + 1) * co];
                    for (gv, &u) in gwr.iter_mut().zip(up) {
                        *gv += xv * u;
                    }
                }
            }
        });
    }
    (
        Tensor::new(input.shape(), gx).expect("shape"),
        Tensor::new(kernel.shape(), gw).expect("shape"),
        Tensor::new(&[co], gb).expect("shape"),
    )
}

/// `act(input * W + b)` for a layer in [`ConvMode::Conv`].
///
/// Accepts `(h, w, b, c_in)` or a batched `(n, h, w, b, c_in)` input.
pub fn conv_forward(input: &Tensor, params: &ConvLayerParams, activation: Activation) -> Result<Tensor> {
    if params.mode != ConvMode::Conv {
        return Err(Error::Parameter("conv_forward needs a layer in conv mode".into()));
    }
    let pre = conv_linear(input, &params.kernel, params.bias.data(), params.stride)?;
    Ok(activation.forward(&pre))
}

/// `act(input *^T W + b)` for a layer in [`ConvMode::Transposed`].
pub fn transposed_conv_forward(
    input: &Tensor,
    params: &ConvLayerParams,
    activation: Activation,
) -> Result<Tensor> {
    if params.mode != ConvMode::Transposed {
        return Err(Error::Parameter(
            "transposed_conv_forward needs a layer in transposed mode".into(),
        ));
    }
    let pre = transposed_linear(input, &params.kernel, params.bias.data(), params.stride)?;
    Ok(activation.forward(&pre))
}
