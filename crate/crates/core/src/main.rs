use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use qimcf::ambient::verify_ambient;
use qimcf::config::parse_config_with;
use qimcf::harness::{exit_code, parse_vary, run_experiment, sweep, AMBIENT_SEED, EXIT_CONFIG};

/// Inverse mean curvature flow of S³-invariant star-shaped hypersurfaces in HH^n.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; takes precedence over QIMCF_OUT and output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cartesian product of the varied values concurrently.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// KEY=V1,V2,... (repeatable); KEY is `section.key` or an unambiguous `key`.
        #[arg(long, required = true)]
        vary: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the curvature tensor of HH^n on random samples.
    VerifyAmbient {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

fn out_override(cli: Option<PathBuf>) -> Option<PathBuf> {
    cli.or_else(|| std::env::var_os("QIMCF_OUT").map(PathBuf::from))
}

fn read(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        error!("cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG as u8)
    })
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run { config, out } => {
            let text = match read(&config) {
                Ok(t) => t,
                Err(c) => return c,
            };
            let mut cfg = match parse_config_with(&text, &[]) {
                Ok(c) => c,
                Err(e) => {
                    error!("{}: {e}", config.display());
                    return code(exit_code(&e));
                }
            };
            if let Some(dir) = out_override(out) {
                cfg.out_dir = dir;
            }
            code(run_experiment(&cfg).exit_code)
        }
        Command::Sweep { config, vary, out } => {
            let text = match read(&config) {
                Ok(t) => t,
                Err(c) => return c,
            };
            let vary: Result<Vec<_>, _> = vary.iter().map(|v| parse_vary(v)).collect();
            let result = vary.and_then(|vary| sweep(&text, &vary, out_override(out).as_deref()));
            match result {
                Ok(rows) => {
                    for r in &rows {
                        println!("cell {:03} {:?}: {}", r.cell, r.overrides, r.csv_row());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    error!("{e}");
                    code(exit_code(&e))
                }
            }
        }
        Command::VerifyAmbient { n, samples } => match verify_ambient(n, samples, AMBIENT_SEED) {
            Ok(rep) => {
                println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes"));
                if rep.passes() {
                    ExitCode::SUCCESS
                } else {
                    error!("curvature checks exceed tolerance");
                    ExitCode::FAILURE
                }
            }
            Err(e) => {
                error!("{e}");
                code(exit_code(&e))
            }
        },
    }
}
