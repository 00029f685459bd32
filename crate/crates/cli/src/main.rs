//! `mritrans` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mritrans::ErrorClass;

mod commands;

pub const RUN_ROOT_ENV: &str = "MRITRANS_RUN_ROOT";

#[derive(Parser, Debug)]
#[command(name = "mritrans", version, about = "Paired MRI modality translation")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// Run configuration file (TOML, flat dotted keys).
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build 2.5D slabs and a split manifest from a tree of NIfTI volumes.
    Preprocess(commands::PreprocessArgs),
    /// Train a generator/discriminator pair on a manifest's training split.
    Train(commands::TrainArgs),
    /// Score a checkpoint on a manifest's test split.
    Evaluate(commands::EvaluateArgs),
    /// Train and score the four encoder x decoder configurations.
    Ablate(commands::AblateArgs),
    /// Error heatmaps and feature-map panels for test samples.
    Figures(commands::FiguresArgs),
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Divergence => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Figures(a) => commands::figures(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
