use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pws_cli::check::run_checks;
use pws_cli::run::{out_dir, portrait_only};
use pws_cli::{execute, load_config, thread_count, write_artifacts, Overrides};

#[derive(Parser)]
#[command(name = "pws", version, about = "Piecewise-smooth scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Integrator relative tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// RNG seed for randomized trials.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario and check its counts.
    Run { config: PathBuf },
    /// Draw the configured system and its orbits.
    Portrait { config: PathBuf },
    /// Built-in self-test suite.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t < 1e-2) {
            eprintln!("error: --tol must lie in (0, 1e-2)");
            return ExitCode::from(2);
        }
    }
    let ov = Overrides { out: cli.out.clone(), tol: cli.tol, seed: cli.seed };
    match cli.command {
        Command::Check => {
            let results = run_checks(thread_count());
            let mut ok = true;
            for r in &results {
                match &r.outcome {
                    Ok(m) => println!("PASS {}: {m}", r.name),
                    Err(m) => {
                        ok = false;
                        println!("FAIL {}: {m}", r.name);
                    }
                }
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Run { config } => run(&config, &ov, false),
        Command::Portrait { config } => run(&config, &ov, true),
    }
}

fn run(config: &std::path::Path, ov: &Overrides, portrait: bool) -> ExitCode {
    let cfg = match load_config(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let dir = out_dir(&cfg, ov);
    let a = if portrait { portrait_only(&cfg, ov) } else { execute(&cfg, ov) };
    if let Err(e) = write_artifacts(&a, &dir, portrait || cfg.output.portrait) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::FAILURE;
    }
    for (k, v) in &a.summary {
        println!("{k}={v}");
    }
    if portrait || a.passed() {
        ExitCode::SUCCESS
    } else {
        for f in &a.failures {
            eprintln!("FAIL {f}");
        }
        eprintln!("diagnostics written to {}", dir.join("diagnostics.txt").display());
        ExitCode::FAILURE
    }
}
