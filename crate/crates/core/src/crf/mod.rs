//! Fully connected CRF over all pixels of a scene.
//!
//! The energy of a labeling `x` is
//!
//! ```text
//! E(x) = Σ_i U_i(x_i) + Σ_{i<j} μ(x_i, x_j) · [w1 · f1(i, j) + w2 · f2(i, j)]
//! ```
//!
//! with `U_i(l) = -log q_i(l)` from a probability map, an appearance kernel
//! `f1` over position and spectrum, and a smoothness kernel `f2` over
//! position. Mean-field inference refines `q` with synchronous updates.

mod features;
mod inference;
mod kernels;
mod probability;

pub use features::{FeatureField, PixelFeature, FULL_SPECTRUM_MAX_BANDS, PCA_COMPONENTS};
pub use inference::{mean_field_infer, mean_field_trace, map_labeling, MeanFieldTrace};
pub use kernels::{energy, kernel_f1, kernel_f2, pairwise_potential, unary_from_probs, UnaryField};
pub use probability::{ProbabilityMap, MASS_TOLERANCE};

use crate::error::{Error, Result};

/// Label compatibility `μ(a, b)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Compatibility {
    /// `μ(a, b) = 1` when `a != b`, else `0`.
    Potts,
    /// Explicit `K x K` row-major matrix, symmetric with a zero diagonal.
    Matrix { classes: usize, values: Vec<f64> },
}

impl Compatibility {
    #[inline]
    pub fn mu(&self, a: usize, b: usize) -> f64 {
        match self {
            Compatibility::Potts => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            Compatibility::Matrix { classes, values } => values[a * classes + b],
        }
    }

    fn validate(&self, classes: usize) -> Result<()> {
        if let Compatibility::Matrix { classes: k, values } = self {
            if *k != classes || values.len() != k * k {
                return Err(Error::Parameter(format!(
                    "compatibility matrix is for {k} classes, map has {classes}"
                )));
            }
            for a in 0..*k {
                if values[a * k + a] != 0.0 {
                    return Err(Error::Parameter("compatibility diagonal must be zero".into()));
                }
                for b in 0..*k {
                    if values[a * k + b] != values[b * k + a] {
                        return Err(Error::Parameter("compatibility matrix must be symmetric".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrfParams {
    /// Appearance kernel weight.
    pub w1: f64,
    /// Smoothness kernel weight.
    pub w2: f64,
    /// Spatial bandwidth of the appearance kernel, pixels.
    pub theta_alpha: f64,
    /// Spectral bandwidth of the appearance kernel.
    pub theta_beta: f64,
    /// Spatial bandwidth of the smoothness kernel, pixels.
    pub theta_gamma: f64,
    pub compat: Compatibility,
    pub iterations: usize,
    pub unary_floor: f64,
}

impl Default for CrfParams {
    fn default() -> Self {
        CrfParams {
            w1: 1.0,
            w2: 0.3,
            theta_alpha: 3.0,
            theta_beta: 0.5,
            theta_gamma: 3.0,
            compat: Compatibility::Potts,
            iterations: 10,
            unary_floor: 1e-6,
        }
    }
}

impl CrfParams {
    pub fn validate(&self, classes: usize) -> Result<()> {
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) {
            return Err(Error::Parameter(format!(
                "kernel weights must be >= 0, got w1={} w2={}",
                self.w1, self.w2
            )));
        }
        for (name, v) in [
            ("theta_alpha", self.theta_alpha),
            ("theta_beta", self.theta_beta),
            ("theta_gamma", self.theta_gamma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.unary_floor > 0.0 && self.unary_floor <= 1e-2) {
            return Err(Error::Parameter(format!(
                "unary floor must lie in (0, 1e-2], got {}",
                self.unary_floor
            )));
        }
        self.compat.validate(classes)
    }
}
