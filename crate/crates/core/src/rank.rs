//! Information-criterion estimation of the interference rank, for both the
//! white-Gaussian and deterministic interference models.

use crate::error::{Error, Result};
use crate::spectral::smooth_eigenvalues;
use serde::{Deserialize, Serialize};

/// Penalty rule `J(D)` applied to the model degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Penalty {
    Aic,
    Aicc,
    Bic,
    /// Generalized information criterion with tunable gain `G > 0`.
    Gic(f64),
}

/// Which likelihood model the candidate-rank scores use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterferenceModel {
    /// Temporally white Gaussian interference (low-rank-plus-identity
    /// covariance, smoothed-eigenvalue likelihood).
    Gauss,
    /// Deterministic low-rank interference (trailing-eigenvalue-sum
    /// likelihood).
    Det,
}

/// Rank-selection rule: penalty, search limit, and interference model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCriterion {
    pub penalty: Penalty,
    pub n_max: usize,
    pub model: InterferenceModel,
}

impl RankCriterion {
    pub fn gic(gain: f64, n_max: usize, model: InterferenceModel) -> Self {
        RankCriterion {
            penalty: Penalty::Gic(gain),
            n_max,
            model,
        }
    }

    /// Default search limit: `min(M, L) - 1` capped at `M/2`.
    pub fn default_n_max(m: usize, l: usize) -> usize {
        (m.min(l).saturating_sub(1)).min(m / 2)
    }

    pub fn validate(&self, m: usize, l: usize) -> Result<()> {
        if let Penalty::Gic(g) = self.penalty {
            if !(g > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "GIC gain must be positive, got {g}"
                )));
            }
        }
        let bound = match self.model {
            InterferenceModel::Gauss => m,
            InterferenceModel::Det => m.min(l),
        };
        if self.n_max >= bound {
            return Err(Error::InvalidInput(format!(
                "n_max {} out of range for model (must be < {bound})",
                self.n_max
            )));
        }
        Ok(())
    }
}

/// Penalty value `J(D)` for `D` parameter degrees of freedom and `T`
/// real-valued measurements.
pub fn penalty_value(penalty: Penalty, d: usize, t: usize) -> Result<f64> {
    let df = d as f64;
    let tf = t as f64;
    Ok(match penalty {
        Penalty::Aic => df,
        Penalty::Aicc => {
            if d + 1 >= t {
                return Err(Error::InvalidInput(format!(
                    "AICc needs D < T - 1, got D={d}, T={t}"
                )));
            }
            tf * df / (tf - df - 1.0)
        }
        Penalty::Bic => 0.5 * df * tf.ln(),
        Penalty::Gic(g) => g * df,
    })
}

/// Parameter degrees of freedom at rank hypothesis `n`.
///
/// Gauss model: a rank-`n` Hermitian interference covariance plus array
/// response plus noise variance, `(2M - n)n + 2M + 1`. Deterministic model:
/// an M x L rank-`n` complex factor instead, `2(M + L - n)n + 2M + 1`.
pub fn dof(model: InterferenceModel, n: usize, m: usize, l: usize) -> usize {
    match model {
        InterferenceModel::Gauss => (2 * m - n) * n + 2 * m + 1,
        InterferenceModel::Det => 2 * (m + l - n) * n + 2 * m + 1,
    }
}

/// Per-rank maximized log-likelihood given the sample eigenvalues under
/// hypothesis `n`.
///
/// Evaluated on the effective (numerically positive) spectrum: structural
/// zeros of a rank-deficient sample covariance carry no likelihood
/// information, and averaging them into the noise estimate drives the
/// formula to a spurious divergence at the sample rank. For a full-rank
/// spectrum this is the plain smoothed-eigenvalue (Gauss) or
/// trailing-sum (Det) likelihood. Candidates at or past the effective rank
/// score `-inf`.
pub fn rank_loglik(model: InterferenceModel, lams: &[f64], n: usize, l: usize) -> f64 {
    let r = effective_rank(lams);
    if n >= r {
        return f64::NEG_INFINITY;
    }
    let head = &lams[..r];
    let lf = l as f64;
    let rf = r as f64;
    match model {
        InterferenceModel::Gauss => {
            let (smoothed, nu) = smooth_eigenvalues(head, n).expect("n < r checked above");
            if nu <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let log_det: f64 = smoothed.iter().map(|&v| v.ln()).sum();
            -lf * (rf + log_det + rf * std::f64::consts::PI.ln())
        }
        InterferenceModel::Det => {
            let avg = head[n..].iter().sum::<f64>() / rf;
            if avg <= 0.0 {
                return f64::NEG_INFINITY;
            }
            -rf * lf * (1.0 + std::f64::consts::PI.ln()) - rf * lf * avg.ln()
        }
    }
}

/// Count of eigenvalues above the numerical-zero floor.
fn effective_rank(lams: &[f64]) -> usize {
    let floor = 1e-12 * lams[0].max(0.0);
    lams.iter().filter(|&&v| v > floor).count()
}

/// Estimate the interference rank from a descending eigenvalue sequence.
///
/// Returns the maximizing rank (ties to the smallest) together with the
/// per-rank scores `loglik(n) - J(D(n))` for `n = 0..=n_max`.
pub fn estimate_rank(
    lams: &[f64],
    criterion: &RankCriterion,
    l: usize,
) -> Result<(usize, Vec<f64>)> {
    let m = lams.len();
    criterion.validate(m, l)?;
    if lams.iter().all(|&v| v <= 0.0) {
        return Err(Error::DegenerateSpectrum);
    }
    if lams.windows(2).any(|w| w[0] < w[1] - 1e-12 * lams[0].abs()) {
        return Err(Error::InvalidInput(
            "eigenvalues must be sorted descending".into(),
        ));
    }
    let t = 2 * m * l;
    let mut scores = Vec::with_capacity(criterion.n_max + 1);
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for n in 0..=criterion.n_max {
        let ll = rank_loglik(criterion.model, lams, n, l);
        let score = ll - penalty_value(criterion.penalty, dof(criterion.model, n, m, l), t)?;
        if score > best_score {
            best_score = score;
            best = n;
        }
        scores.push(score);
    }
    if best_score == f64::NEG_INFINITY {
        return Err(Error::DegenerateSpectrum);
    }
    Ok((best, scores))
}
