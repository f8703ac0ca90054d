//! `harnack-lab`: run estimate-checking experiments from plain-text
//! configuration files.
//!
//! Exit codes: 0 all checks pass; 1 at least one margin below tolerance;
//! 2 configuration or hypothesis-audit error; 3 internal numerical failure.

mod config;
mod experiments;
mod presets;
mod svg;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "harnack-lab", about = "Sharp-estimate laboratory for drift-diffusion equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a named preset.
    Run {
        /// Path to a config file, or the name of a shipped preset.
        config: String,
        /// Parallel workers for sweep children.
        #[arg(long, default_value_t = 4)]
        jobs: usize,
        /// Output directory (overrides the [output] section).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the shipped presets.
    Presets,
    /// Parse and validate a config, printing every issue found.
    Validate {
        /// Path to a config file, or the name of a shipped preset.
        config: String,
    },
}

fn load(source: &str) -> Result<String, String> {
    if let Some(text) = presets::find(source) {
        return Ok(text.to_string());
    }
    std::fs::read_to_string(source)
        .map_err(|e| format!("`{source}` is neither a preset nor a readable file: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            for (name, text) in presets::ALL {
                let summary = text
                    .lines()
                    .find_map(|l| l.strip_prefix("# "))
                    .unwrap_or("");
                println!("{name:<24} {summary}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => {
            let text = match load(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            match config::parse_config(&text) {
                Ok(cfg) => {
                    println!("ok: experiment `{}`, name `{}`", cfg.experiment.as_str(), cfg.name);
                    ExitCode::SUCCESS
                }
                Err(issues) => {
                    eprint!("{issues}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Run { config, jobs, out } => {
            let text = match load(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            let cfg = match config::parse_config(&text) {
                Ok(c) => c,
                Err(issues) => {
                    eprint!("{issues}");
                    return ExitCode::from(2);
                }
            };
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let started = Instant::now();
            match experiments::run_experiment(&cfg, &out_dir, jobs) {
                Ok(summary) => {
                    for check in &summary.checks {
                        println!(
                            "{:<40} {}  min margin {:+.3e}",
                            check.name,
                            if check.pass { "pass" } else { "FAIL" },
                            check.min_margin
                        );
                    }
                    // Wall clock goes to stderr only: summary.json stays
                    // byte-identical across runs of the same config.
                    eprintln!(
                        "{}: exit {} in {:.2}s; artifacts in {}",
                        summary.name,
                        summary.exit_code,
                        started.elapsed().as_secs_f64(),
                        out_dir.display()
                    );
                    ExitCode::from(summary.exit_code as u8)
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
