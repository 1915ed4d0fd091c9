use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isingpp_core::runner::{load_config, run_experiment, schema, ExperimentKind, RunOptions};
use isingpp_core::Error;

#[derive(Parser)]
#[command(
    name = "isingpp",
    version,
    about = "Pump-probe spectroscopy of the mixed-field Ising chain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory; replaces `output_dir` from the config
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 1 runs sequentially
    #[arg(long, env = "ISINGPP_THREADS")]
    threads: Option<usize>,
    /// `key.path=value` applied to the config before validation
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Low-lying spectrum and vacuum of the chain
    GroundState(RunArgs),
    /// Correlator spreading after a global quench
    EquilibriumQuench(RunArgs),
    /// Broadband pump-probe scan over t_p
    PumpProbe(RunArgs),
    /// Frequency-selective pump-probe scan
    Selective(RunArgs),
    /// Pump-probe scan checked against the exact commutator response
    OracleCheck(RunArgs),
    /// Print the configuration schema
    Schema,
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<(), Error> {
    let mut config = load_config(&args.config, &args.overrides)?;
    config.experiment = Some(kind);
    config.output_dir = Some(args.out.clone());
    if args.threads == Some(0) {
        return Err(Error::InvalidConfig {
            field: "threads".into(),
            reason: "must be at least 1".into(),
        });
    }
    let manifest = run_experiment(
        &config,
        &RunOptions {
            threads: args.threads,
        },
    )?;
    for name in &manifest.outputs {
        println!("{}", args.out.join(name).display());
    }
    println!("{}", args.out.join("manifest.json").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Schema => {
            println!(
                "{}",
                serde_json::to_string_pretty(&schema()).expect("schema serializes")
            );
            return ExitCode::SUCCESS;
        }
        Command::GroundState(a) => (ExperimentKind::GroundState, a),
        Command::EquilibriumQuench(a) => (ExperimentKind::EquilibriumQuench, a),
        Command::PumpProbe(a) => (ExperimentKind::PumpProbe, a),
        Command::Selective(a) => (ExperimentKind::Selective, a),
        Command::OracleCheck(a) => (ExperimentKind::OracleCheck, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
