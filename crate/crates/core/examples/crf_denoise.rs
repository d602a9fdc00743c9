//! Corrupt the ground truth of a synthetic scene with uniform label noise and
//! let the dense CRF clean it up.
//!
//! cargo run --release --example crf_denoise -- [noise_rate] [seed]

use hsigan::crf::{map_labeling, mean_field_trace, CrfParams, FeatureField, ProbabilityMap};
use hsigan::data::{synth_scene, SynthSpec};
use hsigan::eval::{confusion, overall_accuracy, save_map};
use rand::{Rng, SeedableRng};

fn main() -> hsigan::Result<()> {
    let mut args = std::env::args().skip(1);
    let rate: f64 = args.next().map_or(0.1, |s| s.parse().expect("noise rate"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let (raw, truth) = synth_scene(&SynthSpec::default())?;
    let cube = raw.normalize(Default::default())?;
    let k = truth.num_classes();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let noisy: Vec<u16> = truth
        .labels()
        .iter()
        .map(|&l| if rng.gen_bool(rate) { rng.gen_range(1..=k as u16) } else { l })
        .collect();
    let probs = ProbabilityMap::from_labels(truth.height(), truth.width(), k, &noisy, 0.2)?;
    let trace = mean_field_trace(&probs, &FeatureField::from_cube(&cube), &CrfParams::default())?;

    let all: Vec<usize> = (0..truth.len()).collect();
    let before = overall_accuracy(&confusion(&map_labeling(&probs), &truth, &all)?)?;
    let after = overall_accuracy(&confusion(&map_labeling(&trace.refined), &truth, &all)?)?;
    println!("noise rate {rate}: OA {before:.4} -> {after:.4}");
    println!("final residual: {:.2e}", trace.residuals.last().copied().unwrap_or(0.0));

    let dir = std::env::temp_dir().join("hsigan_crf_denoise");
    std::fs::create_dir_all(&dir).map_err(|e| hsigan::Error::Io { path: dir.clone(), source: e })?;
    save_map(&map_labeling(&probs), &dir.join("noisy.ppm"))?;
    save_map(&map_labeling(&trace.refined), &dir.join("refined.ppm"))?;
    println!("maps written to {}", dir.display());
    Ok(())
}
