//! EM-based GLRT detectors for probabilistically structured signals, under
//! white-Gaussian interference (`gauss`) and deterministic low-rank
//! interference (`det`).

pub mod det;
pub mod gauss;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::SignalPrior;
use crate::rank::RankCriterion;
use crate::CVec;

/// Relative threshold on `E - ||s||^2` below which the posterior is treated
/// as a point mass; the deterministic-interference EM then routes to its
/// closed-form limit.
pub const EPS_ZETA: f64 = 1e-10;

/// Soft (posterior-mean) or hard (nearest-atom ML) symbol updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionMode {
    Soft,
    Hard,
}

/// How the interference rank is chosen inside the EM loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankMode {
    Fixed(usize),
    Estimate {
        criterion: RankCriterion,
        /// Keep the rank chosen on the first iteration for the rest of the
        /// run instead of re-estimating every iteration.
        freeze_after_first: bool,
    },
}

/// EM loop configuration shared by both interference models.
#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub decision_mode: DecisionMode,
    pub rank_mode: RankMode,
    /// Use the diagonal-minus-rank-one eigenupdate instead of a dense
    /// eigendecomposition each iteration (white-Gaussian model only).
    pub fast_eig: bool,
}

impl EmConfig {
    pub fn new(rank_mode: RankMode) -> Self {
        EmConfig {
            max_iters: 50,
            rel_tol: 0.01,
            decision_mode: DecisionMode::Soft,
            rank_mode,
            fast_eig: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidInput("max_iters must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidInput(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Starting point `(s^0, E^0)` of the EM iterations.
#[derive(Debug, Clone)]
pub struct InitState {
    pub s0: CVec,
    pub e0: f64,
}

impl InitState {
    pub fn new(s0: CVec, e0: f64) -> Result<Self> {
        if !(e0 > 0.0) || !e0.is_finite() {
            return Err(Error::InvalidInput(format!(
                "initial E must be positive, got {e0}"
            )));
        }
        if e0 < s0.norm_squared() - 1e-9 * e0.max(1.0) {
            return Err(Error::InvalidInput(
                "initial E must dominate ||s0||^2".into(),
            ));
        }
        Ok(InitState { s0, e0 })
    }

    /// Initialize from the prior moments alone (zero-precision posterior).
    pub fn from_prior(prior: &SignalPrior) -> Result<Self> {
        let mut s0 = CVec::zeros(prior.len());
        let mut e0 = 0.0;
        for (l, p) in prior.symbols.iter().enumerate() {
            let (mean, second) = p.prior_moments();
            s0[l] = mean;
            e0 += second;
        }
        InitState::new(s0, e0)
    }
}

/// Final log-domain statistic plus diagnostics common to all detectors.
#[derive(Debug, Clone)]
pub struct DetectorReport {
    pub log_statistic: f64,
    /// Eigenvalues of `(1/L) Y Y^H`, descending.
    pub lams0: Vec<f64>,
    /// Eigenvalues of the final signal-removed sample covariance, descending.
    pub lams1: Vec<f64>,
    pub nu0: f64,
    pub nu1: f64,
    pub n_hat: usize,
    pub iters: usize,
}

impl From<crate::closedform::ClosedFormReport> for DetectorReport {
    fn from(r: crate::closedform::ClosedFormReport) -> Self {
        DetectorReport {
            log_statistic: r.log_statistic,
            lams0: r.lams0,
            lams1: r.lams1,
            nu0: r.nu0,
            nu1: r.nu1,
            n_hat: r.rank_used,
            iters: 0,
        }
    }
}

/// Relative EM stopping rule on consecutive symbol estimates; a vanished
/// estimate counts as converged.
pub(crate) fn converged(s_new: &CVec, s_prev: &CVec, rel_tol: f64) -> bool {
    let denom = s_new.norm();
    if denom == 0.0 {
        return true;
    }
    let mut diff = 0.0;
    for (a, b) in s_new.iter().zip(s_prev.iter()) {
        diff += (a - b).norm_sqr();
    }
    diff.sqrt() / denom < rel_tol
}

pub(crate) fn as_cvec(v: &[C64]) -> CVec {
    CVec::from_column_slice(v)
}
