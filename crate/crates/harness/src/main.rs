use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use distcritic_harness::aggregate::{aggregate, read_aggregate, write_aggregate};
use distcritic_harness::config::RunConfig;
use distcritic_harness::plot::{emit_plot, Curve};
use distcritic_harness::run::run_experiment_with;
use distcritic_harness::sweep::{run_jobs, summarize, worker_count, SweepConfig};
use distcritic_harness::verify::{run_suite, SuiteSize};
use distcritic_harness::HarnessResult;

#[derive(Parser)]
#[command(name = "distcritic", version, about = "Distributional actor-critic experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write metrics, checkpoint and manifest.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the cross product of a sweep grid on a pool of workers.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-step mean and population std of evaluation returns across runs.
    Aggregate {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// SVG learning curves from aggregate files; each file is one curve,
    /// named after the file (or `name=path`).
    Plot {
        #[arg(long, num_args = 1.., required = true)]
        agg: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the oracle suite and print a JSON report.
    Verify {
        /// Fewer random instances per check.
        #[arg(long)]
        fast: bool,
    },
}

fn curve_name(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) => (name.to_string(), PathBuf::from(path)),
        None => {
            let path = PathBuf::from(spec);
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            // `<label>/aggregate.csv` from a sweep is named after the label
            let name = if stem == "aggregate" {
                path.parent()
                    .and_then(|p| p.file_name())
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or(stem)
            } else {
                stem
            };
            (name, path)
        }
    }
}

fn run(cli: Cli) -> HarnessResult<bool> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let label = cfg.label();
            let path = run_experiment_with(&cfg, &out, |row| {
                eprintln!("{label} seed {} step {:>8} return {:>10.3}", cfg.seed, row.step, row.mean_return);
            })?;
            println!("{}", path.display());
            Ok(true)
        }
        Command::Sweep { config, jobs, out } => {
            let grid = SweepConfig::load(&config)?;
            let planned = grid.expand(&out)?;
            let workers = worker_count(jobs, planned.len());
            eprintln!("{} runs on {workers} workers", planned.len());
            let outcomes = run_jobs(planned, workers, |o| match &o.result {
                Ok(_) => eprintln!("done   {}", o.job.dir.display()),
                Err(e) => eprintln!("failed {}: {e}", o.job.dir.display()),
            });
            let labels = summarize(&outcomes, &out)?;
            eprintln!("aggregated: {}", labels.join(", "));
            Ok(outcomes.iter().all(|o| o.result.is_ok()))
        }
        Command::Aggregate { runs, out } => {
            write_aggregate(&out, &aggregate(&runs)?)?;
            Ok(true)
        }
        Command::Plot { agg, out } => {
            let curves = agg
                .iter()
                .map(|spec| {
                    let (name, path) = curve_name(spec);
                    Ok(Curve {
                        name,
                        rows: read_aggregate(path)?,
                    })
                })
                .collect::<HarnessResult<Vec<_>>>()?;
            emit_plot(&curves, &out)?;
            Ok(true)
        }
        Command::Verify { fast } => {
            let work = std::env::temp_dir().join(format!("distcritic-verify-{}", std::process::id()));
            let size = if fast { SuiteSize::FAST } else { SuiteSize::FULL };
            let report = run_suite(size, &work, |c| eprintln!("{}", c.line()));
            let _ = std::fs::remove_dir_all(&work);
            let report = report?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
