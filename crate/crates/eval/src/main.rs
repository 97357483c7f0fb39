use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dqcurate_core::pipeline::io::load_config;
use dqcurate_core::pipeline::PipelineConfig;
use dqcurate_eval::overhead::{load_fixture, overhead_report, write_overhead_csv};
use dqcurate_eval::replay::replay;
use dqcurate_eval::report::report_write;
use dqcurate_eval::sim::{simulate, SimConfig};
use dqcurate_eval::static_eval::{resolve_dataset, static_flow_eval, StaticEvalConfig};
use dqcurate_eval::train::train;
use dqcurate_eval::{EvalReport, Result};

#[derive(Parser)]
#[command(name = "dqcurate", version, about = "Data-quality curation engine: simulation, replay and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo timing run over a synthetic sensor network.
    Simulate {
        #[arg(long, default_value_t = 100)]
        sensors: usize,
        /// Seconds between readings of one sensor.
        #[arg(long, default_value_t = 120.0)]
        cadence: f64,
        /// Readings per sensor.
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 5)]
        rounds: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Pipeline configuration (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for timing CSVs and summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Curates an observation CSV and writes JSON lines.
    Replay {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-property size overhead of a serialized entity.
    Overhead {
        #[arg(long)]
        fixture: PathBuf,
        /// CSV output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Static-flow algorithm evaluation.
    StaticEval {
        /// Dataset JSON file or `synthetic:<seed>`.
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains detector and forecast models.
    Train {
        /// Dataset JSON file, `synthetic:<seed>` or observation CSV.
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        out_models: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            sensors,
            cadence,
            count,
            rounds,
            seed,
            config,
            out,
        } => {
            let sim = SimConfig {
                sensors,
                cadence_seconds: cadence,
                per_sensor: count,
                rounds,
                seed,
                ..SimConfig::default()
            };
            let pipeline = match config {
                Some(p) => load_config(p)?,
                None => PipelineConfig::default(),
            };
            let report = simulate(&sim, &pipeline)?;
            report_write(&report, &out)?;
            for (dim, f) in report.flatness() {
                println!(
                    "{dim:<13} mean {:.3e} s  cv {:.3}  drift {:.3}",
                    f.mean_total_s,
                    f.cv(),
                    f.relative_drift()
                );
            }
            if let Some(i) = report.saturation_index() {
                println!("completeness records saturate at item {i}");
            }
        }
        Command::Replay { input, config, out } => {
            let s = replay(&input, config.as_deref(), &out)?;
            println!(
                "{} observations in, {} pairs out ({} synthetic, {} outliers)",
                s.input, s.emitted, s.synthetic, s.outliers
            );
        }
        Command::Overhead { fixture, out } => {
            let rows = overhead_report(&load_fixture(&fixture)?)?;
            write_overhead_csv(&rows, &out)?;
            for r in rows {
                println!("{:<13} {:>6.2}%", r.dimension, r.percent);
            }
        }
        Command::StaticEval { dataset, config, out } => {
            let cfg = match config {
                Some(p) => StaticEvalConfig::from_toml_str(&std::fs::read_to_string(p)?)?,
                None => StaticEvalConfig::default(),
            };
            let metrics = static_flow_eval(&resolve_dataset(&dataset)?, &cfg)?;
            for d in &metrics.detection {
                println!(
                    "{}: recall {:.3} precision {:.3} local {}/{}",
                    d.algorithm, d.recall, d.precision, d.local_flagged, d.local_planted
                );
            }
            for m in metrics.imputation.iter().chain(std::iter::once(&metrics.forecast)) {
                println!("{}: MAPE {:.5} MAE {:.4}", m.method, m.mape, m.mae);
            }
            let report = EvalReport {
                metrics: Some(metrics),
                ..EvalReport::default()
            };
            report_write(&report, &out)?;
        }
        Command::Train { dataset, out_models } => {
            let s = train(&dataset, &out_models)?;
            println!(
                "{} hourly points, {} outliers removed, {}",
                s.hourly_points, s.outliers_removed, s.sarima
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
