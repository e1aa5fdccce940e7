use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use delaypo_cli::config::RunConfig;
use delaypo_cli::harness::{self, RunOptions, SweepAxis};
use delaypo_cli::scenarios;
use delaypo_cli::verify::{self, VerifyOptions};
use delaypo_core::dapo::Fault;
use delaypo_core::Error;

#[derive(Parser)]
#[command(name = "delaypo", version, about = "Policy optimization under delayed bandit feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration for each of its seeds.
    Run {
        #[command(flatten)]
        source: Source,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to the config's `out`, then `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vary one parameter and summarize each point.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// One of delay, K, eta, gamma.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the self-checks.
    Verify {
        /// Glob over check names.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// List the checks without running them.
        #[arg(long)]
        list: bool,
    },
    /// List the bundled scenarios.
    Scenarios,
}

#[derive(clap::Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Path to a JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Name of a bundled scenario.
    #[arg(long)]
    scenario: Option<String>,
}

impl Source {
    fn load(&self) -> delaypo_core::Result<RunConfig> {
        match (&self.config, &self.scenario) {
            (Some(path), _) => RunConfig::load(path),
            (None, Some(name)) => scenarios::shipped(name),
            (None, None) => Err(Error::Config("either --config or --scenario is required".into())),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    FlipRatio,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Tsv,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Shape(_) | Error::Structural(_) | Error::Json(_) => 2,
        Error::Numeric(_) | Error::Precondition(_) | Error::Resource(_) => 3,
        Error::Io(_) => 1,
    }
}

fn out_dir(flag: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    flag.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn write_timing(dir: &Path, seconds: f64) -> delaypo_core::Result<()> {
    let json = serde_json::json!({ "wall_seconds": seconds });
    fs::write(dir.join("timing.json"), format!("{json}\n"))?;
    Ok(())
}

fn run(command: Command) -> delaypo_core::Result<bool> {
    match command {
        Command::Run { source, seed, out } => {
            let mut config = source.load()?;
            if let Some(seed) = seed {
                config.seeds = vec![seed];
            }
            let dir = out_dir(out, &config);
            let start = Instant::now();
            let runs = harness::run_all(&config, RunOptions::default())?;
            let summary = harness::summarize(&config, &runs);
            harness::write_outputs(&dir, &runs, &summary)?;
            write_timing(&dir, start.elapsed().as_secs_f64())?;
            println!(
                "{} K={} seeds={} final regret {:.4} ± {:.4} -> {}",
                summary.algorithm,
                summary.episodes,
                summary.seeds.len(),
                summary.final_regret_mean,
                summary.final_regret_std,
                dir.display()
            );
            Ok(true)
        }
        Command::Sweep { source, axis, values, out } => {
            let config = source.load()?;
            let axis: SweepAxis = axis.parse()?;
            if values.is_empty() {
                return Err(Error::Config("--values needs at least one value".into()));
            }
            let rows = harness::sweep(&config, axis, &values)?;
            let csv = harness::sweep_csv(axis, &rows);
            let dir = out_dir(out, &config);
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("sweep.csv"), &csv)?;
            print!("{csv}");
            Ok(true)
        }
        Command::Verify { filter, inject_fault, format, list } => {
            if list {
                for check in verify::checks() {
                    println!("{}\t{}", check.name, check.about);
                }
                return Ok(true);
            }
            let options = VerifyOptions {
                fault: inject_fault.map(|f| match f {
                    FaultArg::FlipRatio => Fault::FlipRatioDenominator,
                }),
            };
            let results = verify::run_checks(filter.as_deref(), &options)?;
            match format {
                Format::Tsv => print!("{}", verify::to_tsv(&results)),
                Format::Text => {
                    for r in &results {
                        let status = if r.passed { "PASS" } else { "FAIL" };
                        println!("{status} {:<20} {:>8.2}s  {}", r.name, r.seconds, r.detail);
                    }
                }
            }
            Ok(results.iter().all(|r| r.passed))
        }
        Command::Scenarios => {
            for (name, _) in scenarios::SHIPPED {
                println!("{name}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
