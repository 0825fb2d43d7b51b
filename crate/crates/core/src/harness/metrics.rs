//! Threshold calibration from empirical H0/H1 statistic samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Performance metric and threshold rule.
///
/// `PdAtPfa`: the threshold is the empirical `ceil((1 - pfa) n)`-th order
/// statistic of the H0 sample (1-indexed), and the metric is the detection
/// rate above it. `MinError`: the threshold minimizes the balanced error
/// `(miss + false alarm) / 2` over the merged candidate set, and the metric
/// is that minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    PdAtPfa(f64),
    MinError,
}

impl Metric {
    pub fn validate(&self) -> Result<()> {
        if let Metric::PdAtPfa(pfa) = self {
            if !(*pfa > 0.0 && *pfa < 1.0) {
                return Err(Error::Config(format!("pfa must lie in (0, 1), got {pfa}")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::PdAtPfa(_) => "pd_at_pfa",
            Metric::MinError => "min_error",
        }
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Fraction of `sorted_values` strictly greater than `eta`.
fn frac_above(sorted_values: &[f64], eta: f64) -> f64 {
    let idx = sorted_values.partition_point(|&v| v <= eta);
    (sorted_values.len() - idx) as f64 / sorted_values.len() as f64
}

/// Calibrate a detection threshold and report the achieved metric value.
/// The decision rule is "declare H1 when the statistic exceeds eta".
pub fn calibrate_threshold(stats_h0: &[f64], stats_h1: &[f64], metric: &Metric) -> (f64, f64) {
    assert!(
        !stats_h0.is_empty() && !stats_h1.is_empty(),
        "empty statistic samples"
    );
    let h0 = sorted(stats_h0);
    let h1 = sorted(stats_h1);
    match metric {
        Metric::PdAtPfa(pfa) => {
            let n = h0.len();
            let rank = (((1.0 - pfa) * n as f64).ceil() as usize).clamp(1, n);
            let eta = h0[rank - 1];
            (eta, frac_above(&h1, eta))
        }
        Metric::MinError => {
            let mut candidates: Vec<f64> = h0.iter().chain(h1.iter()).cloned().collect();
            candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
            candidates.dedup();
            let mut best = (f64::NEG_INFINITY, f64::INFINITY);
            for &eta in &candidates {
                let miss = 1.0 - frac_above(&h1, eta);
                let fa = frac_above(&h0, eta);
                let err = 0.5 * (miss + fa);
                if err < best.1 {
                    best = (eta, err);
                }
            }
            best
        }
    }
}
