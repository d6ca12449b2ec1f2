use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dynvir_cli::{resolve_out_dir, run_to_dir, CliError, Scenario, Suite};

#[derive(Parser)]
#[command(name = "dynvir", version, about = "Run dynvir verification scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write report.json plus CSV tables.
    Run {
        config: PathBuf,
        /// Output directory (overrides DYNVIR_OUT and the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the replica loops.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the default scenario for a suite.
    Defaults { suite: Suite },
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Defaults { suite } => {
            println!("{}", Scenario::default_for(suite).to_json());
            Ok(true)
        }
        Command::Run { config, out, seed, threads } => {
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| CliError::Config(format!("threads: {e}")))?;
            }
            let mut scenario = Scenario::load(&config)?;
            if let Some(s) = seed {
                scenario.seed = s;
            }
            let dir = resolve_out_dir(out.as_deref(), &scenario);
            let report = run_to_dir(&scenario, &dir)?;
            for c in &report.checks {
                let status = if c.pass { "PASS" } else { "FAIL" };
                println!("{status} {:<32} {:.3e} <= {:.3e}", c.name, c.value, c.tolerance);
            }
            println!("report: {}", dir.join("report.json").display());
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
