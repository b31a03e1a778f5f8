use anyhow::Result;
use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

use sqzlab::experiment::{load_config, run, ConfigError, Mode};
use sqzlab::SqzError;

/// Measurement-and-feedforward squeezer simulator.
#[derive(Parser, Debug)]
#[command(name = "sqzlab", version, about)]
struct Args {
    /// reproduce-paper, sweep, tomography, trajectory or compile
    mode: Mode,
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Overrides `sampling.seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides one configuration key, e.g. `--set protocol.transmittance=0.5`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 2 for configuration and argument errors, 3 for numerical-invariant
/// violations, 1 for anything else (I/O).
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<SqzError>() {
        Some(e) if e.is_invariant_violation() => 3,
        Some(SqzError::Io(_)) | Some(SqzError::Json(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn execute(args: &Args) -> Result<()> {
    let loaded = load_config(&args.config, &args.set, args.seed)?;
    let dir = args.out.clone().unwrap_or_else(|| loaded.config.output.dir.clone());
    println!(
        "sqzlab {}: config {} (hash {}), seed {}",
        args.mode,
        args.config.display(),
        &loaded.hash[..12],
        loaded.config.sampling.seed
    );
    let output = run(args.mode, &loaded)?;
    print!("{}", output.report);
    for path in output.write_to(&dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
