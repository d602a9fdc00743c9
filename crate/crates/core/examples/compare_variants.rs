//! Median test accuracy of every discriminator variant over several seeds.
//!
//! cargo run --release --example compare_variants -- [seeds] [epochs] [spectral_width] [spatial_width] [variants]

use hsigan::crf::{map_labeling, mean_field_infer, CrfParams, FeatureField};
use hsigan::data::{make_split, synth_scene, SynthSpec};
use hsigan::eval::{confusion, overall_accuracy};
use hsigan::gan::{predict_map, train, ArchConfig, TrainConfig, Variant};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() -> hsigan::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map_or(5, |s| s.parse().expect("seeds"));
    let epochs = args.next().map_or(200, |s| s.parse().expect("epochs"));
    let spectral_width = args.next().map_or(8, |s| s.parse().expect("spectral width"));
    let spatial_width = args.next().map_or(16, |s| s.parse().expect("spatial width"));
    let variants: Vec<Variant> = match args.next() {
        Some(list) => list.split(',').map(str::parse).collect::<hsigan::Result<_>>()?,
        None => Variant::ALL.to_vec(),
    };
    let arch = ArchConfig {
        spectral_width,
        spatial_width,
        noise_dim: 16,
        ..ArchConfig::default()
    };
    println!("variant  seed  OA      OA+CRF");
    for variant in variants {
        let (mut plain, mut refined) = (Vec::new(), Vec::new());
        for seed in 0..seeds {
            let (raw, labels) = synth_scene(&SynthSpec { seed, ..SynthSpec::default() })?;
            let cube = raw.normalize(Default::default())?;
            let split = make_split(&labels, 10, seed)?;
            let config = TrainConfig {
                epochs,
                seed,
                arch: arch.clone(),
                ..TrainConfig::default()
            };
            let trained = train(&cube, &split, labels.num_classes(), variant, &config)?;
            let probs = predict_map(&trained.discriminator, &cube)?;
            let crf = mean_field_infer(&probs, &FeatureField::from_cube(&cube), &CrfParams::default())?;
            let test = split.test_pixels();
            let a = overall_accuracy(&confusion(&map_labeling(&probs), &labels, &test)?)?;
            let b = overall_accuracy(&confusion(&map_labeling(&crf), &labels, &test)?)?;
            println!("{variant:<8} {seed:<5} {a:.4}  {b:.4}");
            plain.push(a);
            refined.push(b);
        }
        println!("{variant:<8} median {:.4}  {:.4}", median(plain), median(refined));
    }
    Ok(())
}
