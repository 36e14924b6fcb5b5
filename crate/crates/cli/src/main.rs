use std::path::PathBuf;
use std::process::ExitCode;

use bfmcmc_cli::{report, run_experiment, CliResult, Experiment, KernelChoice, Overrides, Preset, RawConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "sampler", version, about = "Run and summarise two-coin Barker MCMC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config (or a previous manifest.json).
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse::<Experiment>)]
        experiment: Option<Experiment>,
        #[arg(long, value_parser = parse::<KernelChoice>)]
        kernel: Option<KernelChoice>,
        /// Iterations per chain.
        #[arg(long)]
        n: Option<u64>,
        /// Number of replications.
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse::<Preset>)]
        preset: Option<Preset>,
    },
    /// Verify a run's outputs and rebuild its summary table from stored traces.
    Report { manifest: PathBuf },
}

fn parse<T: std::str::FromStr<Err = bfmcmc_cli::CliError>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: bfmcmc_cli::CliError| e.to_string())
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Run {
            config,
            experiment,
            kernel,
            n,
            reps,
            seed,
            out,
            preset,
        } => {
            let overrides = Overrides {
                experiment,
                kernel,
                n_iter: n,
                n_replications: reps,
                seed,
                output_dir: out,
                preset,
            };
            let cfg = RawConfig::load(&config)?.resolve(&overrides)?;
            let manifest = run_experiment(&cfg)?;
            let summary = cfg.output_dir.join("summary.txt");
            print!(
                "{}",
                std::fs::read_to_string(&summary).map_err(|e| bfmcmc_cli::CliError::io(&summary, e))?
            );
            for r in manifest.failed() {
                eprintln!(
                    "replication {} failed: {}",
                    r.replication + 1,
                    r.error.as_deref().unwrap_or("unknown error")
                );
            }
            println!("outputs written to {}", cfg.output_dir.display());
            let ok = manifest.failed().next().is_none();
            Ok(ok)
        }
        Command::Report { manifest } => {
            let (m, table) = report(&manifest)?;
            if m.config.thin > 1 {
                println!("(rebuilt from traces thinned by {})", m.config.thin);
            }
            print!("{table}");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
