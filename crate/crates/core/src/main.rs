use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use spinex::runner::{run, RunOptions};
use spinex::scenario::{Scenario, ScenarioKind};

/// Batch runner for alkali / noble-gas spin-interface scenarios.
#[derive(Debug, Parser)]
#[command(name = "spinex", version)]
struct Cli {
    #[arg(value_enum)]
    kind: ScenarioKind,
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    seeds: Option<usize>,
    /// Output directory; defaults to `output.dir` of the scenario.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted override such as `physical.p_a=0.9`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = Scenario::load(&cli.scenario, &cli.overrides).and_then(|scenario| {
        let opts = RunOptions {
            seed: cli.seed,
            seeds: cli.seeds,
            out_dir: cli.out.clone(),
        };
        run(cli.kind, &scenario, &opts)
    });
    match result {
        Ok((_, files)) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("spinex: {e}");
            ExitCode::FAILURE
        }
    }
}
