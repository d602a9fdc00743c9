//! Semi-supervised spectral-spatial GAN classification of hyperspectral
//! images, refined by a fully connected conditional random field.

pub mod crf;
pub mod data;
pub mod error;
pub mod eval;
pub mod gan;
pub mod numerics;
pub mod parallel;
pub mod pipeline;

pub use error::{Error, Result};
