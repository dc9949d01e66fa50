use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use liegroup_index_cli::{cmd_cache, cmd_check, cmd_index, CacheAction, CheckKind, CliError, ExperimentConfig, RunPaths, RunSummary, CACHE_ENV};

#[derive(Parser)]
#[command(name = "liegroup-index", version, about = "Fredholm indices of pseudo-differential operators on T^n, SU(2) and SU(3)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a stabilization sweep and write report.json, tables/ and manifest.json.
    Index {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one invariant check suite.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        which: CheckKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect or maintain a Galerkin cache directory.
    Cache {
        #[arg(long, env = CACHE_ENV)]
        dir: PathBuf,
        #[arg(long)]
        action: CacheAction,
    },
}

fn env_cache() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn print_summary(s: &RunSummary) {
    for l in &s.lines {
        println!("{l}");
    }
    println!("wrote {} (manifest {})", s.out_dir.display(), &s.manifest_id[..16]);
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Index { config, out } => {
            let (cfg, base) = ExperimentConfig::load(&config)?;
            let summary = cmd_index(&cfg, &RunPaths::new(&cfg, &base, out, env_cache()))?;
            print_summary(&summary);
            Ok(summary.status.code())
        }
        Command::Check { config, which, out } => {
            let (cfg, base) = ExperimentConfig::load(&config)?;
            let summary = cmd_check(&cfg, which, &RunPaths::new(&cfg, &base, out, env_cache()))?;
            print_summary(&summary);
            Ok(summary.status.code())
        }
        Command::Cache { dir, action } => {
            let (status, lines) = cmd_cache(&dir, action)?;
            for l in lines {
                println!("{l}");
            }
            Ok(status.code())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
