use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gel_cli::demo::{preset_bipartite_demo, DemoParams};
use gel_cli::suite::{replay_file, run_suite, write_witnesses, DEFAULT_SUITE_SEED};
use gel_cli::{run_experiment, CliError, ExperimentConfig, Result};

/// Graph energy lab: gradient-flow message passing experiments.
#[derive(Parser)]
#[command(name = "gel", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a `key = value` config file.
    Run { config: PathBuf },
    /// Gradient flow vs heat diffusion on the complete bipartite graph K_{a,b}.
    Bipartite {
        a: usize,
        b: usize,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long, default_value_t = 80)]
        steps: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Channel weight of the gradient flow.
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        w: f64,
        /// Directory for the report, plot and CSV files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every verify check and property battery.
    Suite {
        #[arg(long)]
        seed: Option<u64>,
        /// Where failing witnesses are written.
        #[arg(long, default_value = "witnesses")]
        witness_dir: PathBuf,
    },
    /// Re-evaluate a witness file written by `suite`.
    Replay { witness: PathBuf },
}

/// `GEL_SEED`, when set, overrides configured seeds.
fn env_seed() -> Result<Option<u64>> {
    match std::env::var("GEL_SEED") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::Config {
            path: "environment".into(),
            line: 0,
            key: "GEL_SEED".into(),
            msg: format!("`{v}` is not an unsigned integer"),
        }),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(seed) = env_seed()? {
                cfg.override_seed(seed);
            }
            let outcome = run_experiment(&cfg)?;
            print!("{}", outcome.report);
            if !outcome.checks_passed {
                return Err(CliError::Failure("a configured check failed".into()));
            }
        }
        Command::Bipartite { a, b, tau, steps, seed, w, out } => {
            let seed = match seed {
                Some(s) => s,
                None => env_seed()?.unwrap_or(1),
            };
            let params = DemoParams { w, ..DemoParams::new(a, b, tau, steps, seed) };
            let outcome = preset_bipartite_demo(&params)?;
            print!("{}", outcome.report);
            if let Some(dir) = out {
                for p in outcome.write_to(&dir)? {
                    println!("wrote {}", p.display());
                }
            }
            if !outcome.passed() {
                return Err(CliError::Failure(outcome.failures.join("; ")));
            }
        }
        Command::Suite { seed, witness_dir } => {
            let seed = match seed {
                Some(s) => s,
                None => env_seed()?.unwrap_or(DEFAULT_SUITE_SEED),
            };
            let reports = run_suite(seed)?;
            for r in &reports {
                println!("{r}");
            }
            let failed = reports.iter().filter(|r| !r.passed).count();
            println!("{} checks, {} failed", reports.len(), failed);
            if failed > 0 {
                for p in write_witnesses(&reports, &witness_dir)? {
                    println!("witness: {}", p.display());
                }
                return Err(CliError::Failure(format!("{failed} checks failed")));
            }
        }
        Command::Replay { witness } => {
            let reports = replay_file(&witness)?;
            for r in &reports {
                println!("{r}");
            }
            if reports.iter().any(|r| !r.passed) {
                return Err(CliError::Failure("replayed witness fails".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
