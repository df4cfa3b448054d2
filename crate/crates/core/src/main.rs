use std::path::PathBuf;
use std::process::ExitCode;

use chaos_forge::runner::{parse_config, run, ExperimentKind, OutputFormat};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "chaos-forge",
    version,
    about = "Exact chaos-expansion experiments for normal approximation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Write the report here instead of the path in the config (or stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<OutputFormat>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; falls back to CHAOS_FORGE_JOBS.
        #[arg(long, env = "CHAOS_FORGE_JOBS")]
        jobs: Option<usize>,
    },
    /// List the available experiment kinds.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for kind in ExperimentKind::ALL {
                println!("{:<22} {}", kind.name(), kind.description());
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            out,
            format,
            seed,
            jobs,
        } => {
            if let Some(j) = jobs {
                if j == 0 {
                    eprintln!("error: --jobs must be at least 1");
                    return ExitCode::from(2);
                }
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(j)
                    .build_global()
                {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let mut cfg = match parse_config(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            if out.is_some() {
                cfg.output = out;
            }
            if let Some(f) = format {
                cfg.format = f;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = match run(&cfg) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(if e.is_usage() { 2 } else { 1 });
                }
            };
            if cfg.output.is_none() {
                print!("{}", report.render(cfg.format));
            }
            for a in report.failures() {
                eprintln!("FAILED {} [{}]: margin {:e}", a.case, a.name, a.margin);
            }
            eprintln!(
                "{}: {} records, {}/{} assertions passed, min margin {:e}, {:.2}s",
                cfg.experiment,
                report.records.len(),
                report.assertions.len() - report.failures().count(),
                report.assertions.len(),
                report.min_margin(),
                report.wall_clock_seconds
            );
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
