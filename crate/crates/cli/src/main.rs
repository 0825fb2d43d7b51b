//! `glrt`: Monte Carlo harness for adaptive GLRT detection experiments.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::fs;
use std::path::PathBuf;

use glrt_core::harness::config::{parse_config, RunConfig};
use glrt_core::harness::report::{emit_report, read_records, RunManifest};
use glrt_core::harness::{
    calibrate_threshold, run_point, run_sweep, summarize_detector, DetectorKind, SweepSummary,
};
use glrt_core::sim::Hypothesis;

#[derive(Parser)]
#[command(
    name = "glrt",
    about = "Adaptive GLRT detection of structured signals in low-rank interference",
    version
)]
struct Cli {
    /// Flat key-value config file (scenario.*, detector.*, sweep.*).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for records, summaries, and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials (per sweep point) override.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Comma-separated detector list override.
    #[arg(long, global = true)]
    detectors: Option<String>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every detector at the configured scenario point.
    Simulate,
    /// Run the configured parameter sweep and emit summary tables.
    Sweep,
    /// Recompute thresholds from saved records.
    Calibrate {
        /// records.jsonl from a previous run (defaults to <out>/records.jsonl).
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Re-emit summary tables from saved records.
    Report {
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<(RunConfig, String)> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.sweep.trials_per_point = trials;
    }
    if let Some(list) = &cli.detectors {
        cfg.detectors = list
            .split(',')
            .map(DetectorKind::parse)
            .collect::<glrt_core::Result<Vec<_>>>()?;
    }
    Ok((cfg, text))
}

fn print_rows(summary: &SweepSummary) {
    println!(
        "{:>10} {:<18} {:>12} {:>12} {:>10} {:>10} {:>8}",
        "axis", "detector", "metric", "threshold", "mean_Nhat", "iters", "errors"
    );
    for row in &summary.rows {
        println!(
            "{:>10} {:<18} {:>12} {:>12} {:>10} {:>10} {:>8}",
            row.axis_value,
            row.detector,
            row.metric_value
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into()),
            row.threshold
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into()),
            row.mean_n_hat_h1
                .map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "-".into()),
            row.mean_iters
                .map(|v| format!("{v:.1}"))
                .unwrap_or_else(|| "-".into()),
            row.errors,
        );
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("building worker pool")?;
    }
    let (cfg, config_echo) = load_config(&cli)?;
    let detector_names: Vec<String> = cfg.detectors.iter().map(|d| d.name().to_string()).collect();

    match &cli.command {
        Command::Simulate => {
            let records = run_point(
                &cfg.scenario,
                &cfg.detectors,
                cfg.sweep.trials_per_point,
                &cfg.em,
            )?;
            let mut rows = Vec::new();
            for &det in &cfg.detectors {
                rows.push(summarize_detector(
                    &records,
                    det.name(),
                    0.0,
                    &cfg.sweep.metric,
                    0.0,
                ));
            }
            let summary = SweepSummary {
                axis: cfg.sweep.axis,
                metric: cfg.sweep.metric,
                rows,
                records: records.clone(),
            };
            print_rows(&summary);
            let manifest =
                RunManifest::new("simulate", cfg.scenario.seed, detector_names, config_echo);
            let files = emit_report(&records, Some(&summary), &manifest, &cli.out)?;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep => {
            let summary = run_sweep(&cfg.sweep, &cfg.scenario, &cfg.detectors, &cfg.em)?;
            print_rows(&summary);
            let manifest =
                RunManifest::new("sweep", cfg.scenario.seed, detector_names, config_echo);
            let files = emit_report(&summary.records, Some(&summary), &manifest, &cli.out)?;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Calibrate { records } => {
            let path = records
                .clone()
                .unwrap_or_else(|| cli.out.join("records.jsonl"));
            let records = read_records(&path)?;
            if records.is_empty() {
                bail!("no records in {}", path.display());
            }
            println!(
                "{:<18} {:>12} {:>12} {:>8}",
                "detector", "threshold", "achieved", "n"
            );
            let mut names: Vec<String> = records.iter().map(|r| r.detector.clone()).collect();
            names.sort();
            names.dedup();
            for name in names {
                let h0: Vec<f64> = records
                    .iter()
                    .filter(|r| r.detector == name && r.hypothesis == Hypothesis::H0)
                    .filter_map(|r| r.log_statistic)
                    .collect();
                let h1: Vec<f64> = records
                    .iter()
                    .filter(|r| r.detector == name && r.hypothesis == Hypothesis::H1)
                    .filter_map(|r| r.log_statistic)
                    .collect();
                if h0.is_empty() || h1.is_empty() {
                    println!(
                        "{:<18} {:>12} {:>12} {:>8}",
                        name,
                        "-",
                        "-",
                        h0.len() + h1.len()
                    );
                    continue;
                }
                let (eta, achieved) = calibrate_threshold(&h0, &h1, &cfg.sweep.metric);
                println!(
                    "{:<18} {:>12.4} {:>12.4} {:>8}",
                    name,
                    eta,
                    achieved,
                    h0.len() + h1.len()
                );
            }
        }
        Command::Report { records } => {
            let path = records
                .clone()
                .unwrap_or_else(|| cli.out.join("records.jsonl"));
            let records = read_records(&path)?;
            if records.is_empty() {
                bail!("no records in {}", path.display());
            }
            // Group by the scenario knobs that vary across sweep points.
            let mut axis_values: Vec<f64> = records.iter().map(|r| r.noise_var).collect();
            axis_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            axis_values.dedup();
            let mut names: Vec<String> = records.iter().map(|r| r.detector.clone()).collect();
            names.sort();
            names.dedup();
            let mut rows = Vec::new();
            for &v in &axis_values {
                let point: Vec<_> = records
                    .iter()
                    .filter(|r| r.noise_var == v)
                    .cloned()
                    .collect();
                for name in &names {
                    rows.push(summarize_detector(&point, name, v, &cfg.sweep.metric, 0.0));
                }
            }
            let summary = SweepSummary {
                axis: cfg.sweep.axis,
                metric: cfg.sweep.metric,
                rows,
                records: records.clone(),
            };
            print_rows(&summary);
            let manifest =
                RunManifest::new("report", cfg.scenario.seed, detector_names, config_echo);
            let files = emit_report(&records, Some(&summary), &manifest, &cli.out)?;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}
