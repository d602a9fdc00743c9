//! Train the spectral-spatial discriminator on a synthetic scene and report
//! test accuracy before and after CRF refinement.
//!
//! cargo run --release --example train_ss -- [epochs] [seed]

use std::time::Instant;

use hsigan::crf::{map_labeling, mean_field_infer, CrfParams, FeatureField};
use hsigan::data::{make_split, synth_scene, SynthSpec};
use hsigan::eval::{confusion, overall_accuracy};
use hsigan::gan::{predict_map, train, ArchConfig, TrainConfig, Variant};

fn main() -> hsigan::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(200, |s| s.parse().expect("epochs"));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    let variant: Variant = args.next().map_or(Ok(Variant::Ss), |s| s.parse())?;

    let (raw, labels) = synth_scene(&SynthSpec { seed, ..SynthSpec::default() })?;
    let cube = raw.normalize(Default::default())?;
    let split = make_split(&labels, 10, seed)?;
    let config = TrainConfig {
        epochs,
        seed,
        arch: ArchConfig {
            spectral_width: 8,
            spatial_width: 16,
            noise_dim: 16,
            ..ArchConfig::default()
        },
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let trained = train(&cube, &split, labels.num_classes(), variant, &config)?;
    let elapsed = start.elapsed();
    let probs = predict_map(&trained.discriminator, &cube)?;
    let test = split.test_pixels();
    let oa = overall_accuracy(&confusion(&map_labeling(&probs), &labels, &test)?)?;
    let refined = mean_field_infer(&probs, &FeatureField::from_cube(&cube), &CrfParams::default())?;
    let oa_crf = overall_accuracy(&confusion(&map_labeling(&refined), &labels, &test)?)?;
    let last = trained.log.last().expect("at least one step");
    println!("{variant} epochs={epochs} seed={seed} time={:.1}s", elapsed.as_secs_f64());
    println!("final l1={:.4} l2={:.4} l3={:.4} fm={:.4}", last.l1, last.l2, last.l3, last.feature_match);
    println!("OA without CRF {oa:.4}  with CRF {oa_crf:.4}");
    Ok(())
}
