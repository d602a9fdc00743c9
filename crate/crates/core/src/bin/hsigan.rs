use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hsigan::pipeline::{self, PipelineConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Synth,
    Train,
    Refine,
    Eval,
}

/// Hyperspectral GAN + CRF classification pipeline.
#[derive(Debug, Parser)]
#[command(name = "hsigan", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validate the config and list outputs without writing anything.
    #[arg(long)]
    dry_run: bool,
}

fn run(cli: &Cli) -> hsigan::Result<()> {
    let mut config = PipelineConfig::load(&cli.config).map_err(|e| match e {
        hsigan::Error::Io { .. } => hsigan::Error::Config(e.to_string()),
        e => e,
    })?;
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    let name = format!("{:?}", cli.command).to_lowercase();
    if cli.dry_run {
        print!("{}", pipeline::dry_run(&name, &config)?);
        return Ok(());
    }
    match cli.command {
        Command::Synth | Command::Train | Command::Refine => {
            let written = match cli.command {
                Command::Synth => pipeline::cmd_synth(&config)?,
                Command::Train => pipeline::cmd_train(&config)?,
                _ => pipeline::cmd_refine(&config)?,
            };
            for path in written {
                println!("wrote {}", path.display());
            }
        }
        Command::Eval => print!("{}", pipeline::cmd_eval(&config)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hsigan: {e}");
            ExitCode::from(pipeline::exit_code(&e) as u8)
        }
    }
}
