//! Discriminator and generator assemblies, the semi-supervised objective,
//! training and per-pixel prediction.

pub mod arch;
pub mod loss;
pub mod predict;
pub mod train;

pub use arch::{build_discriminator, build_generator, ArchConfig, Discriminator, Generator, PatchShape, Variant};
pub use loss::{
    feature_matching_loss, loss_supervised, loss_unsup_fake, loss_unsup_real, total_loss, LossReport,
};
pub use predict::predict_map;
pub use train::{log_csv, save_log, train, GeneratorObjective, TrainConfig, Trained, Trainer};
