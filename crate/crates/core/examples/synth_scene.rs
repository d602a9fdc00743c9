//! Generate a synthetic hyperspectral scene, save it, and reload it.
//!
//! cargo run --example synth_scene -- [out_dir] [seed]

use std::path::PathBuf;

use hsigan::data::{load_cube, load_labels, save_cube, save_labels, synth_scene, SynthSpec};
use hsigan::eval::save_map;

fn main() -> hsigan::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map_or_else(|| std::env::temp_dir().join("hsigan_synth"), PathBuf::from);
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    let spec = SynthSpec { seed, ..SynthSpec::default() };
    let (cube, labels) = synth_scene(&spec)?;
    std::fs::create_dir_all(&dir).map_err(|e| hsigan::Error::Io { path: dir.clone(), source: e })?;
    save_cube(&cube, &dir.join("cube.hsi"))?;
    save_labels(&labels, &dir.join("labels.pgm"))?;
    save_map(&labels, &dir.join("labels.ppm"))?;

    let back = load_cube(&dir.join("cube.hsi"))?;
    assert_eq!(back, cube);
    assert_eq!(load_labels(&dir.join("labels.pgm"))?, labels);
    println!("{}x{}x{} scene, {} classes, written to {}", cube.height(), cube.width(), cube.bands(), labels.num_classes(), dir.display());
    for (class, count) in labels.class_counts().iter().enumerate().skip(1) {
        println!("  class {class}: {count} pixels");
    }
    for (band, (lo, hi)) in cube.band_ranges().iter().enumerate() {
        println!("  band {band}: [{lo:.3}, {hi:.3}]");
    }
    Ok(())
}
