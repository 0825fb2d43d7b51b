//! Persistence: JSON-lines trial records, deterministic CSV summaries, a
//! plotting script, and a run manifest.
//!
//! The summary CSV contains only deterministic columns so identical configs
//! produce byte-identical files; timing goes to a separate file.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{SweepRow, SweepSummary, TrialRecord};

/// Run provenance echoed next to the outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub detectors: Vec<String>,
    pub config_echo: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, detectors: Vec<String>, config_echo: String) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            detectors,
            config_echo,
        }
    }
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Header and rows of the sweep summary CSV.
pub fn summary_csv(summary: &SweepSummary) -> String {
    let mut out = String::new();
    out.push_str(
        "axis,axis_value,detector,metric,metric_value,threshold,mean_n_hat_h1,mean_iters,errors,trials\n",
    );
    let axis = format!("{:?}", summary.axis).to_lowercase();
    for row in &summary.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            axis,
            row.axis_value,
            row.detector,
            summary.metric.name(),
            fmt_opt_f64(row.metric_value),
            fmt_opt_f64(row.threshold),
            fmt_opt_f64(row.mean_n_hat_h1),
            fmt_opt_f64(row.mean_iters),
            row.errors,
            row.trials,
        );
    }
    out
}

fn timings_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("axis_value,detector,wall_secs\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{:.3}",
            row.axis_value, row.detector, row.wall_secs
        );
    }
    out
}

/// Round-trip parse of a summary CSV back into rows (used by `report` and
/// the serialization tests). Only the deterministic columns are recovered.
pub fn parse_summary_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::Config(format!(
                "summary line {} malformed: '{line}'",
                i + 1
            )));
        }
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| Error::Config(format!("bad float '{s}'")))
            }
        };
        rows.push(SweepRow {
            axis_value: f[1]
                .parse()
                .map_err(|_| Error::Config("bad axis value".into()))?,
            detector: f[2].to_string(),
            metric_value: opt(f[4])?,
            threshold: opt(f[5])?,
            mean_n_hat_h1: opt(f[6])?,
            mean_iters: opt(f[7])?,
            errors: f[8]
                .parse()
                .map_err(|_| Error::Config("bad error count".into()))?,
            trials: f[9]
                .parse()
                .map_err(|_| Error::Config("bad trial count".into()))?,
            wall_secs: 0.0,
        });
    }
    Ok(rows)
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot detector performance from summary.csv (written next to this file)."""
import csv
import os
import sys

try:
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is required: pip install matplotlib")

here = os.path.dirname(os.path.abspath(__file__))
path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "summary.csv")

series = {}
axis_name = "axis"
metric_name = "metric"
with open(path) as fh:
    for row in csv.DictReader(fh):
        axis_name = row["axis"]
        metric_name = row["metric"]
        if not row["metric_value"]:
            continue
        series.setdefault(row["detector"], []).append(
            (float(row["axis_value"]), float(row["metric_value"]))
        )

fig, ax = plt.subplots(figsize=(7, 4.5))
for name, pts in sorted(series.items()):
    pts.sort()
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=name)
ax.set_xlabel(axis_name)
ax.set_ylabel(metric_name)
ax.grid(True, alpha=0.4)
ax.legend()
out = os.path.join(os.path.dirname(path), "summary.png")
fig.tight_layout()
fig.savefig(out, dpi=150)
print(f"wrote {out}")
"#;

/// Write trial records (JSON lines), the summary and timing CSVs, the
/// plotting script, and the manifest into `out_dir`. Returns the paths.
pub fn emit_report(
    records: &[TrialRecord],
    summary: Option<&SweepSummary>,
    manifest: &RunManifest,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let records_path = out_dir.join("records.jsonl");
    {
        let mut fh = fs::File::create(&records_path)?;
        for rec in records {
            let line = serde_json::to_string(rec)
                .map_err(|e| Error::Config(format!("record serialization failed: {e}")))?;
            fh.write_all(line.as_bytes())?;
            fh.write_all(b"\n")?;
        }
    }
    written.push(records_path);

    if let Some(summary) = summary {
        let summary_path = out_dir.join("summary.csv");
        fs::write(&summary_path, summary_csv(summary))?;
        written.push(summary_path);
        let timings_path = out_dir.join("timings.csv");
        fs::write(&timings_path, timings_csv(&summary.rows))?;
        written.push(timings_path);
        let plot_path = out_dir.join("plot_summary.py");
        fs::write(&plot_path, PLOT_SCRIPT)?;
        written.push(plot_path);
    }

    let manifest_path = out_dir.join("manifest.json");
    let manifest_json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))?;
    fs::write(&manifest_path, manifest_json)?;
    written.push(manifest_path);
    Ok(written)
}

/// Load trial records back from a JSON-lines file.
pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let fh = fs::File::open(path)?;
    let mut records = Vec::new();
    for line in BufReader::new(fh).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Config(format!("bad record line: {e}")))?,
        );
    }
    Ok(records)
}
