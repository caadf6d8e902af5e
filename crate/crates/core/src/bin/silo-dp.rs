use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use silo_dp::harness::{run_command, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "silo-dp", version, about = "Private per-partner models and stacked aggregation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the synthetic partner datasets as CSV
    Generate(RunArgs),
    /// Non-private cold-start and ramped-up baselines
    Baseline(RunArgs),
    /// Individual private models across the epsilon grid
    Exp1(RunArgs),
    /// Aggregation over all partners
    Exp2(RunArgs),
    /// Aggregation lift as the number of partners varies
    Exp3(RunArgs),
    /// Empirical privacy audit
    Audit(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML file with experiment settings
    #[arg(long)]
    config: PathBuf,
    /// Root seed; replaces the seed in the config file
    #[arg(long)]
    seed: u64,
    /// Directory for the reports
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Generate(a) => (Command::Generate, a),
        Cmd::Baseline(a) => (Command::Baseline, a),
        Cmd::Exp1(a) => (Command::Exp1, a),
        Cmd::Exp2(a) => (Command::Exp2, a),
        Cmd::Exp3(a) => (Command::Exp3, a),
        Cmd::Audit(a) => (Command::Audit, a),
    };
    let result = ExperimentConfig::load(&args.config).and_then(|mut cfg| {
        cfg.seed = args.seed;
        run_command(command, &cfg, &args.out)
    });
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = json!({
                "error": {
                    "kind": e.kind(),
                    "message": e.to_string(),
                    "command": command,
                }
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
