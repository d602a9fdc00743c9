//! Synthesize, train, refine and evaluate in one go, writing the same files
//! as the `hsigan` binary.
//!
//! cargo run --release --example full_pipeline -- [out_dir] [epochs]

use std::path::PathBuf;

use hsigan::pipeline::{cmd_eval, cmd_refine, cmd_synth, cmd_train, PipelineConfig};

fn main() -> hsigan::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let mut config = PipelineConfig {
        out: args.next().map_or_else(|| std::env::temp_dir().join("hsigan_pipeline"), PathBuf::from),
        ..PipelineConfig::default()
    };
    if let Some(epochs) = args.next() {
        config.set("epochs", &epochs)?;
    }
    print!("{}", config.to_text());
    for written in [cmd_synth(&config)?, cmd_train(&config)?, cmd_refine(&config)?] {
        for path in written {
            println!("wrote {}", path.display());
        }
    }
    print!("{}", cmd_eval(&config)?);
    Ok(())
}
