mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{cmd_fci, cmd_mutual_info, cmd_vqe, cmd_wahtor, Emitted, Panel};
use config::RunConfig;
use error::CliError;

const NOT_CONVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "wahtor", version, about = "VQE with alternating orbital optimization on a statevector simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the simulator (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides output_path in the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact ground state in the particle-number sector.
    Fci,
    /// Multistart VQE on the HF Hamiltonian.
    Vqe,
    /// VQE alternated with trust-region orbital rotation; writes delta, eps and MI panels.
    Wahtor,
    /// Mutual-information matrices for the selected panels.
    MutualInfo {
        #[arg(long = "state", value_enum, num_args = 1.., default_values_t = Panel::ALL)]
        states: Vec<Panel>,
    },
}

fn run(cli: Cli) -> Result<Emitted, CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Input("--config <FILE> is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("--threads: {e}")))?;
    }
    let out = cli.output.unwrap_or_else(|| cfg.output_path.clone());
    match cli.command {
        Command::Fci => cmd_fci(&cfg, &out),
        Command::Vqe => cmd_vqe(&cfg, &out),
        Command::Wahtor => cmd_wahtor(&cfg, &out),
        Command::MutualInfo { states } => cmd_mutual_info(&cfg, &out, &states),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(e) => {
            println!("{}", e.summary);
            if e.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: run did not converge");
                ExitCode::from(NOT_CONVERGED)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
