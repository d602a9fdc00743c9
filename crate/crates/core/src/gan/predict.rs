use rayon::prelude::*;

use crate::crf::ProbabilityMap;
use crate::data::{patch_batch, HyperCube};
use crate::error::{Error, Result};
use crate::gan::arch::Discriminator;
use crate::numerics::softmax::softmax_into;
use crate::numerics::Tape;
use crate::parallel;

const CHUNK: usize = 64;

/// Class distribution for every pixel: the discriminator's softmax over the
/// `K` real classes, with the fake class conditioned away.
pub fn predict_map(disc: &Discriminator, cube: &HyperCube) -> Result<ProbabilityMap> {
    if cube.bands() != disc.patch.bands {
        return Err(Error::Shape(format!(
            "discriminator expects {} bands, cube has {}",
            disc.patch.bands,
            cube.bands()
        )));
    }
    let k = disc.num_classes;
    let pixels: Vec<usize> = (0..cube.pixels()).collect();
    let chunks: Vec<Result<Vec<f64>>> = parallel::install(|| {
        pixels
            .par_chunks(CHUNK)
            .map(|chunk| {
                let patches = patch_batch(cube, chunk, disc.patch.size);
                let logits = disc.logits(&mut Tape::inference(), patches)?;
                let mut out = vec![0.0; chunk.len() * k];
                for (i, row) in out.chunks_exact_mut(k).enumerate() {
                    softmax_into(&logits.row(i)[..k], row);
                }
                Ok(out)
            })
            .collect()
    });
    let mut q = Vec::with_capacity(cube.pixels() * k);
    for c in chunks {
        q.extend(c?);
    }
    ProbabilityMap::new(cube.height(), cube.width(), k, q)
}
