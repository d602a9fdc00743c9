//! Architecture registry for the four discriminator variants and the shared
//! generator.
//!
//! | variant | stack                                                   | pooling |
//! |---------|---------------------------------------------------------|---------|
//! | SS      | two spectral `1x1xkb` layers, then two spatial `3x3x1`  | global  |
//! | SPC     | the two spectral layers only                            | center  |
//! | SPA     | fixed `1x1` band map, then the two spatial layers        | global  |
//! | CONV    | two full `3x3xkb` layers                                | global  |
//!
//! Spectral layers stride the band axis by two. Every hidden layer uses a
//! leaky ReLU; a dense head maps pooled features to `K + 1` logits.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Activation, ConvMode, ParamId, ParamSet, Pooling, Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Conv,
    Spa,
    Spc,
    Ss,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Conv, Variant::Spa, Variant::Spc, Variant::Ss];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Conv => "CONV",
            Variant::Spa => "SPA",
            Variant::Spc => "SPC",
            Variant::Ss => "SS",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CONV" => Ok(Variant::Conv),
            "SPA" => Ok(Variant::Spa),
            "SPC" => Ok(Variant::Spc),
            "SS" => Ok(Variant::Ss),
            _ => Err(Error::Parameter(format!("unknown variant {s:?}"))),
        }
    }
}

/// Channel widths and kernel extents shared by every variant.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchConfig {
    pub spectral_width: usize,
    pub spatial_width: usize,
    pub spectral_kernel: usize,
    pub spatial_kernel: usize,
    pub spectral_stride: usize,
    pub noise_dim: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            spectral_width: 32,
            spatial_width: 64,
            spectral_kernel: 7,
            spatial_kernel: 3,
            spectral_stride: 2,
            noise_dim: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchShape {
    pub size: usize,
    pub bands: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub name: String,
    pub kernel: ParamId,
    pub bias: ParamId,
    pub stride: [usize; 3],
    pub mode: ConvMode,
    pub activation: Activation,
}

impl ConvLayer {
    fn apply(&self, params: &ParamSet, tape: &mut Tape, x: Tensor) -> Result<Tensor> {
        let y = tape.conv(params, x, self.kernel, self.bias, self.stride, self.mode)?;
        Ok(tape.activation(y, self.activation))
    }
}

struct LayerPlan {
    name: &'static str,
    extent: [usize; 3],
    c_out: usize,
    stride: [usize; 3],
}

fn add_conv<R: Rng + ?Sized>(
    params: &mut ParamSet,
    rng: &mut R,
    name: &str,
    extent: [usize; 3],
    c_in: usize,
    c_out: usize,
    std: f64,
    trainable: bool,
) -> (ParamId, ParamId) {
    let kernel = params.add(
        format!("{name}.kernel"),
        Tensor::randn(&[extent[0], extent[1], extent[2], c_in, c_out], std, rng),
        trainable,
    );
    let bias = params.add(format!("{name}.bias"), Tensor::zeros(&[c_out]), trainable);
    (kernel, bias)
}

fn he_std(extent: [usize; 3], c_in: usize) -> f64 {
    (2.0 / (extent.iter().product::<usize>() * c_in) as f64).sqrt()
}

/// `K + 1` class discriminator over `(s, s, B)` patches.
#[derive(Clone, Debug)]
pub struct Discriminator {
    pub variant: Variant,
    pub num_classes: usize,
    pub patch: PatchShape,
    pub arch: ArchConfig,
    pub params: ParamSet,
    band_map: Option<ConvLayer>,
    layers: Vec<ConvLayer>,
    pooling: Pooling,
    head: (ParamId, ParamId),
    /// Index into the conv stack whose pooled activation feeds feature matching.
    pub feature_layer_index: usize,
}

pub fn build_discriminator<R: Rng + ?Sized>(
    variant: Variant,
    num_classes: usize,
    patch: PatchShape,
    arch: &ArchConfig,
    rng: &mut R,
) -> Result<Discriminator> {
    if num_classes == 0 {
        return Err(Error::Parameter("discriminator needs at least one class".into()));
    }
    if patch.size.is_multiple_of(2) || patch.size == 0 || patch.bands == 0 {
        return Err(Error::Parameter(format!(
            "patch must be odd-sized and non-empty, got {patch:?}"
        )));
    }
    let kb = arch.spectral_kernel;
    let ks = arch.spatial_kernel;
    let ss = arch.spectral_stride;
    let (sw, pw) = (arch.spectral_width, arch.spatial_width);
    let spectral = |name, c_out| LayerPlan {
        name,
        extent: [1, 1, kb],
        c_out,
        stride: [1, 1, ss],
    };
    let spatial = |name, c_out| LayerPlan {
        name,
        extent: [ks, ks, 1],
        c_out,
        stride: [1, 1, 1],
    };
    let (plans, pooling) = match variant {
        Variant::Ss => (
            vec![
                spectral("spectral1", sw),
                spectral("spectral2", sw),
                spatial("spatial1", pw),
                spatial("spatial2", pw),
            ],
            Pooling::Global,
        ),
        Variant::Spc => (
            vec![spectral("spectral1", sw), spectral("spectral2", sw)],
            Pooling::Center,
        ),
        Variant::Spa => (
            vec![spatial("spatial1", pw), spatial("spatial2", pw)],
            Pooling::Global,
        ),
        Variant::Conv => (
            vec![
                LayerPlan {
                    name: "conv1",
                    extent: [ks, ks, kb],
                    c_out: sw,
                    stride: [1, 1, ss],
                },
                LayerPlan {
                    name: "conv2",
                    extent: [ks, ks, kb],
                    c_out: pw,
                    stride: [1, 1, ss],
                },
            ],
            Pooling::Global,
        ),
    };

    let mut params = ParamSet::new();
    let (mut dims, mut channels) = ([patch.size, patch.size, patch.bands], 1);
    let mut band_map = None;
    if variant == Variant::Spa {
        let std = (1.0 / patch.bands as f64).sqrt();
        let (k, b) = add_conv(&mut params, rng, "bandmap", [1, 1, 1], patch.bands, sw, std, false);
        band_map = Some(ConvLayer {
            name: "bandmap".into(),
            kernel: k,
            bias: b,
            stride: [1, 1, 1],
            mode: ConvMode::Conv,
            activation: Activation::None,
        });
        dims = [patch.size, patch.size, 1];
        channels = sw;
    }

    let mut layers = Vec::with_capacity(plans.len());
    for plan in &plans {
        for axis in 0..3 {
            if dims[axis] < plan.stride[axis] || (plan.extent[axis] > 1 && dims[axis] < 2) {
                return Err(Error::Shape(format!(
                    "patch {}x{}x{} too small for layer {} (axis {axis} extent {} with kernel {:?}, stride {:?})",
                    patch.size, patch.size, patch.bands, plan.name, dims[axis], plan.extent, plan.stride
                )));
            }
        }
        let (k, b) = add_conv(
            &mut params,
            rng,
            plan.name,
            plan.extent,
            channels,
            plan.c_out,
            he_std(plan.extent, channels),
            true,
        );
        layers.push(ConvLayer {
            name: plan.name.to_string(),
            kernel: k,
            bias: b,
            stride: plan.stride,
            mode: ConvMode::Conv,
            activation: Activation::lrelu(),
        });
        for axis in 0..3 {
            dims[axis] = dims[axis].div_ceil(plan.stride[axis]);
        }
        channels = plan.c_out;
    }

    let weight = params.add(
        "head.weight",
        Tensor::randn(&[channels, num_classes + 1], (1.0 / channels as f64).sqrt(), rng),
        true,
    );
    let bias = params.add("head.bias", Tensor::zeros(&[num_classes + 1]), true);
    let feature_layer_index = layers.len() - 1;
    Ok(Discriminator {
        variant,
        num_classes,
        patch,
        arch: arch.clone(),
        params,
        band_map,
        layers,
        pooling,
        head: (weight, bias),
        feature_layer_index,
    })
}

impl Discriminator {
    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    /// Trainable scalar count.
    pub fn parameter_count(&self) -> usize {
        self.params.trainable_count()
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let s = x.shape();
        let p = self.patch;
        if s.len() != 4 || s[1] != p.size || s[2] != p.size || s[3] != p.bands {
            return Err(Error::Shape(format!(
                "discriminator expects (n, {}, {}, {}) patches, got {s:?}",
                p.size, p.size, p.bands
            )));
        }
        Ok(s[0])
    }

    fn trunk(&self, tape: &mut Tape, patches: Tensor, upto: usize) -> Result<Tensor> {
        let n = self.check_input(&patches)?;
        let p = self.patch;
        let mut x = match &self.band_map {
            Some(map) => {
                let x = tape.reshape(patches, &[n, p.size, p.size, 1, p.bands])?;
                map.apply(&self.params, tape, x)?
            }
            None => tape.reshape(patches, &[n, p.size, p.size, p.bands, 1])?,
        };
        for layer in &self.layers[..=upto] {
            x = layer.apply(&self.params, tape, x)?;
        }
        tape.pool(x, self.pooling)
    }

    /// Pooled activation of the feature-matching layer, `(n, c)`.
    pub fn features(&self, tape: &mut Tape, patches: Tensor) -> Result<Tensor> {
        self.trunk(tape, patches, self.feature_layer_index)
    }

    /// `(n, K + 1)` logits for `(n, s, s, B)` patches.
    pub fn logits(&self, tape: &mut Tape, patches: Tensor) -> Result<Tensor> {
        let pooled = self.trunk(tape, patches, self.layers.len() - 1)?;
        tape.dense(&self.params, pooled, self.head.0, self.head.1)
    }
}

/// Maps noise vectors to `(s, s, B)` patches in `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Generator {
    pub noise_dim: usize,
    pub patch: PatchShape,
    pub params: ParamSet,
    dense: (ParamId, ParamId),
    seed_dims: [usize; 3],
    seed_channels: usize,
    layers: Vec<ConvLayer>,
}

/// Spatial upsampling factor of the first transposed layer.
const SPATIAL_UPSAMPLE: usize = 3;

pub fn build_generator<R: Rng + ?Sized>(patch: PatchShape, arch: &ArchConfig, rng: &mut R) -> Result<Generator> {
    if patch.size == 0 || patch.bands == 0 || arch.noise_dim == 0 {
        return Err(Error::Parameter(format!("invalid generator geometry {patch:?}")));
    }
    let ss = arch.spectral_stride;
    let seed_dims = [
        patch.size.div_ceil(SPATIAL_UPSAMPLE),
        patch.size.div_ceil(SPATIAL_UPSAMPLE),
        patch.bands.div_ceil(ss * ss),
    ];
    let seed_channels = arch.spatial_width;
    let seed_len = seed_dims.iter().product::<usize>() * seed_channels;
    let mut params = ParamSet::new();
    let dense_w = params.add(
        "gen.dense.weight",
        Tensor::randn(&[arch.noise_dim, seed_len], (1.0 / arch.noise_dim as f64).sqrt(), rng),
        true,
    );
    let dense_b = params.add("gen.dense.bias", Tensor::zeros(&[seed_len]), true);

    let kb = arch.spectral_kernel;
    let ks = arch.spatial_kernel;
    let e1 = [ks, ks, kb];
    let (k1, b1) = add_conv(&mut params, rng, "gen.up1", e1, seed_channels, arch.spectral_width, he_std(e1, seed_channels), true);
    let e2 = [1, 1, kb];
    let xavier = (1.0 / (kb * arch.spectral_width) as f64).sqrt();
    let (k2, b2) = add_conv(&mut params, rng, "gen.up2", e2, arch.spectral_width, 1, xavier, true);
    let layers = vec![
        ConvLayer {
            name: "gen.up1".into(),
            kernel: k1,
            bias: b1,
            stride: [SPATIAL_UPSAMPLE, SPATIAL_UPSAMPLE, ss],
            mode: ConvMode::Transposed,
            activation: Activation::Relu,
        },
        ConvLayer {
            name: "gen.up2".into(),
            kernel: k2,
            bias: b2,
            stride: [1, 1, ss],
            mode: ConvMode::Transposed,
            activation: Activation::Tanh,
        },
    ];
    Ok(Generator {
        noise_dim: arch.noise_dim,
        patch,
        params,
        dense: (dense_w, dense_b),
        seed_dims,
        seed_channels,
        layers,
    })
}

impl Generator {
    pub fn sample_noise<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Tensor {
        Tensor::randn(&[n, self.noise_dim], 1.0, rng)
    }

    /// `(n, noise_dim)` noise to `(n, s, s, B)` patches.
    pub fn forward(&self, tape: &mut Tape, noise: Tensor) -> Result<Tensor> {
        let n = noise.shape()[0];
        let x = tape.dense(&self.params, noise, self.dense.0, self.dense.1)?;
        let d = self.seed_dims;
        let x = tape.reshape(x, &[n, d[0], d[1], d[2], self.seed_channels])?;
        let mut x = tape.activation(x, Activation::Relu);
        for layer in &self.layers {
            x = layer.apply(&self.params, tape, x)?;
        }
        let p = self.patch;
        let x = tape.crop(x, [p.size, p.size, p.bands])?;
        tape.reshape(x, &[n, p.size, p.size, p.bands])
    }
}
