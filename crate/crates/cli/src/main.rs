mod checks;

use anyhow::Context;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vortexlab::cli_io::{load_config, read_records, rerender, run_config, runs_from_records, Summary};
use vortexlab::experiments::threads_from_env;

/// Vanishing-viscosity experiments for 2D Navier–Stokes with no-slip walls.
#[derive(Parser)]
#[command(name = "vortexlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the viscosity sweep described by a JSON plan.
    Run {
        /// JSON run plan (see configs/).
        #[arg(long)]
        config: PathBuf,
        /// Continue from checkpoints in `<output.dir>/checkpoints`.
        #[arg(long)]
        resume: bool,
    },
    /// Run the built-in numerical self-checks.
    Validate,
    /// Re-render plots and summary from `records.csv` in a report directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cmd: Command) -> anyhow::Result<bool> {
    match cmd {
        Command::Run { config, resume } => {
            let cfg = load_config(&config)?;
            let threads = threads_from_env();
            log::info!(
                "{} viscosities, T = {}, threads {}",
                cfg.physics.nu.values().len(),
                cfg.physics.t_end,
                threads.map_or("auto".to_string(), |t| if t == 0 { "sequential".into() } else { t.to_string() })
            );
            let (report, files) = run_config(&cfg, threads, resume)?;
            for run in &report.runs {
                match &run.failure {
                    None => log::info!("nu {:e}: max L2 difference {:.4e}", run.nu, run.l2_diff_max()),
                    Some(f) => log::warn!("nu {:e}: stopped early: {f}", run.nu),
                }
            }
            println!("records: {}", files.csv.display());
            println!("summary: {}", files.summary.display());
            Ok(report.all_completed())
        }
        Command::Validate => {
            let mut ok = true;
            for o in checks::run_all() {
                println!("{} {:<22} {:>7.2}s  {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.seconds, o.detail);
                ok &= o.pass;
            }
            Ok(ok)
        }
        Command::Report { dir } => {
            let files = rerender(&dir).with_context(|| format!("re-rendering {}", dir.display()))?;
            let summary = Summary::from_runs(&runs_from_records(&read_records(&files.csv)?));
            for c in &summary.checks {
                println!("{} {:<26} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("{} plots in {}", files.plots.len(), dir.display());
            Ok(true)
        }
    }
}
