//! Synthetic scenes: Voronoi land-cover regions, each with a smooth spectral
//! signature, plus Gaussian noise.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::cube::HyperCube;
use crate::data::labels::LabelMap;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub classes: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            height: 32,
            width: 32,
            bands: 8,
            classes: 4,
            noise_sigma: 0.1,
            seed: 0,
        }
    }
}

/// Minimum RMS difference between any two class signatures.
const MIN_SIGNATURE_GAP: f64 = 0.15;

fn signature(bands: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let base = rng.gen_range(0.1..0.4);
    let bumps: Vec<(f64, f64, f64)> = (0..rng.gen_range(2..=3))
        .map(|_| {
            let amp = rng.gen_range(0.3..1.0);
            let center = rng.gen_range(0.0..(bands - 1) as f64);
            let width = rng.gen_range((bands as f64 / 10.0).max(0.5)..(bands as f64 / 3.0 + 0.5));
            (amp, center, width)
        })
        .collect();
    (0..bands)
        .map(|b| {
            base + bumps
                .iter()
                .map(|&(a, c, w)| a * (-(b as f64 - c).powi(2) / (2.0 * w * w)).exp())
                .sum::<f64>()
        })
        .collect()
}

fn rms_gap(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Class signatures used by [`synth_scene`], one per class.
pub fn class_signatures(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut sigs: Vec<Vec<f64>> = Vec::with_capacity(spec.classes);
    let mut attempts = 0;
    while sigs.len() < spec.classes {
        let s = signature(spec.bands, rng);
        attempts += 1;
        if attempts > 1000 || sigs.iter().all(|o| rms_gap(o, &s) >= MIN_SIGNATURE_GAP) {
            sigs.push(s);
        }
    }
    sigs
}

/// Build a fully labeled scene from `spec`.
pub fn synth_scene(spec: &SynthSpec) -> Result<(HyperCube, LabelMap)> {
    if spec.classes < 2 || spec.bands < 2 {
        return Err(Error::Parameter(format!(
            "synthetic scene needs K >= 2 and B >= 2, got K={} B={}",
            spec.classes, spec.bands
        )));
    }
    let pixels = spec.height * spec.width;
    if spec.classes > pixels {
        return Err(Error::Parameter(format!(
            "{} classes do not fit in {pixels} pixels",
            spec.classes
        )));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::Parameter(format!("bad noise sigma {}", spec.noise_sigma)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let seeds: Vec<(f64, f64)> = sample(&mut rng, pixels, spec.classes)
        .into_iter()
        .map(|p| ((p / spec.width) as f64, (p % spec.width) as f64))
        .collect();
    let sigs = class_signatures(spec, &mut rng);
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");

    let mut labels = Vec::with_capacity(pixels);
    let mut values = Vec::with_capacity(pixels * spec.bands);
    for r in 0..spec.height {
        for c in 0..spec.width {
            let (mut best, mut best_d) = (0, f64::INFINITY);
            for (k, &(sr, sc)) in seeds.iter().enumerate() {
                let d = (r as f64 - sr).powi(2) + (c as f64 - sc).powi(2);
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            labels.push(best as u16 + 1);
            for &v in &sigs[best] {
                let n = if spec.noise_sigma > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                values.push(v + n);
            }
        }
    }
    Ok((
        HyperCube::new(spec.height, spec.width, spec.bands, values)?,
        LabelMap::new(spec.height, spec.width, spec.classes, labels)?,
    ))
}
