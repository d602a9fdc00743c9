//! Hypercube I/O, normalization, patch extraction, splits and synthetic
//! scenes.

pub mod cube;
pub mod labels;
pub mod patch;
pub mod split;
pub mod synth;

pub use cube::{load_cube, read_cube, save_cube, write_cube, HyperCube, Normalization};
pub use labels::{load_labels, parse_pgm, save_labels, write_pgm, LabelMap, UNLABELED};
pub use patch::{extract_patch, patch_batch, Patch, DEFAULT_PATCH_SIZE};
pub use split::{make_split, DatasetSplit, Role};
pub use synth::{synth_scene, SynthSpec};
