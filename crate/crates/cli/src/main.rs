use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use drift_cli::commands::{cmd_bench, cmd_gen, cmd_run, parse_drifts, DataSource, GenArgs, RunArgs, Suite};
use drift_core::datagen::Generator;

#[derive(Parser)]
#[command(name = "drift", version, about = "Feature-level model drift detection on labeled streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the detector on a generated stream or a CSV file.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Synthetic generator name.
        #[arg(long, conflicts_with = "csv", required_unless_present = "csv")]
        gen: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Ground-truth drift indices, one per line.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Configuration override `key=value`; may repeat.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Compute the occlusion score over detected events.
        #[arg(long)]
        occlusion: bool,
    },
    /// Run a benchmark suite over the synthetic roster.
    Bench {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic stream to CSV.
    Gen {
        #[arg(long)]
        name: String,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value = "")]
        drifts: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "truth-out")]
        truth_out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> drift_core::Result<()> {
    drift_cli::init_threads()?;
    match cli.command {
        Command::Run { config, gen, csv, truth, out, overrides, occlusion } => {
            let source = match (gen, csv) {
                (Some(name), _) => DataSource::Generator(name.parse()?),
                (None, Some(path)) => DataSource::Csv(path),
                (None, None) => unreachable!("clap requires one source"),
            };
            let report = cmd_run(&RunArgs { config, overrides, source, truth, occlusion })?;
            let text = report.render();
            print!("{text}");
            if let Some(path) = out {
                std::fs::write(path, &text)?;
            }
        }
        Command::Bench { suite, seed } => {
            let suite: Suite = suite.parse()?;
            print!("{}", cmd_bench(suite, seed)?);
        }
        Command::Gen { name, length, drifts, seed, noise, out, truth_out } => {
            let generator: Generator = name.parse()?;
            cmd_gen(&GenArgs { generator, length, drifts: parse_drifts(&drifts)?, seed, noise, out, truth_out })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
