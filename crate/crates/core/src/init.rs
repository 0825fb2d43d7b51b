//! Training-based EM initialization: ML estimates from the training columns,
//! shrinkage of the training covariance with the shrinkage weight chosen by
//! leave-one-out cross-validation, an unbiasing gain for the approximate
//! whitened-matched-filter outputs, and the resulting `(s^0, E^0)`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::priors::{posterior_stats, SignalPrior, SymbolPrior};
use crate::spectral::{hermitian_eig, EigenSystem};
use crate::{CMat, CVec};

/// Shrinkage grid used when the caller does not supply one.
pub const DEFAULT_ALPHA_GRID: [f64; 9] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0];

/// Cap on the LOOCV precision estimate, keeping downstream softmax finite.
pub const XI_CAP: f64 = 1e12;

/// Everything the EM loop needs to start, plus the tuning diagnostics.
#[derive(Debug, Clone)]
pub struct InitProduct {
    pub s0: CVec,
    pub e0: f64,
    pub alpha_star: f64,
    pub beta_hat: C64,
    pub xi_hat: f64,
    pub h_train: CVec,
}

/// Joint ML estimates from the training block: the array response
/// `h = Y_t s_t / ||s_t||^2` and the signal-removed sample covariance
/// `(1/Q) Y_t P_{s_t}^perp Y_t^H`, with its eigendecomposition.
pub fn train_estimates(y_train: &CMat, s_train: &CVec) -> Result<(CVec, CMat, EigenSystem)> {
    let q = y_train.ncols();
    if q < 2 || s_train.len() != q {
        return Err(Error::InvalidInput(format!(
            "need Q >= 2 training snapshots matching the symbol count, got Q={q}, |s|={}",
            s_train.len()
        )));
    }
    let s_norm_sq = s_train.norm_squared();
    if s_norm_sq <= 0.0 {
        return Err(Error::ZeroSignal);
    }
    let h = (y_train * s_train).unscale(s_norm_sq);
    let sigma =
        ((y_train * y_train.adjoint()) - (&h * h.adjoint()).scale(s_norm_sq)).unscale(q as f64);
    let eig = hermitian_eig(&sigma)?;
    Ok((h, sigma, eig))
}

/// Rank-`n` ML training covariance: the sample covariance with its trailing
/// eigenvalues smoothed to their mean. An alternative to the regularized
/// shrinkage route used by [`initialize`]; its unbiasing gain and precision
/// have no leave-one-out counterpart, which is why the shrinkage route is
/// the default.
pub fn train_covariance_rank_n(y_train: &CMat, s_train: &CVec, n: usize) -> Result<(CVec, CMat)> {
    let (h_train, _, eig) = train_estimates(y_train, s_train)?;
    let m = y_train.nrows();
    if n >= m {
        return Err(Error::InvalidRank {
            n,
            m,
            l: y_train.ncols(),
        });
    }
    let (smoothed, _) = crate::spectral::smooth_eigenvalues(&eig.values, n)?;
    let mut scaled = eig.vectors.clone();
    for (j, &v) in smoothed.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    Ok((h_train, &scaled * eig.vectors.adjoint()))
}

/// Intermediate quantities reused across the shrinkage grid.
struct LoocvContext {
    h_train: CVec,
    /// Eigenvalues of the training covariance.
    lams: Vec<f64>,
    /// Shrinkage target level `tr(Sigma_t)/M`, floored to keep the
    /// regularized matrix invertible on noiseless training data.
    c: f64,
    /// `V^H h_t`.
    h_tilde: CVec,
    /// `Y_t^H V` and `Nhat_t^H V`.
    ytv: CMat,
    ntv: CMat,
    s_train: CVec,
    s_norm_sq: f64,
    q: usize,
    m: usize,
}

impl LoocvContext {
    fn new(y_train: &CMat, s_train: &CVec) -> Result<Self> {
        let (m, q) = y_train.shape();
        if q < 3 {
            return Err(Error::InvalidInput(format!(
                "leave-one-out needs Q >= 3 training snapshots, got {q}"
            )));
        }
        let (h_train, sigma, eig) = train_estimates(y_train, s_train)?;
        let s_norm_sq = s_train.norm_squared();
        for l in 0..q {
            let rest = s_norm_sq - s_train[l].norm_sqr();
            if rest <= 1e-14 * s_norm_sq {
                return Err(Error::DegenerateTraining(format!(
                    "leave-one-out symbol norm vanishes at column {l}"
                )));
            }
            if s_train[l].norm_sqr() == 0.0 {
                return Err(Error::DegenerateTraining(format!(
                    "training symbol {l} is zero; unbiasing gain undefined"
                )));
            }
        }
        let c = (sigma.trace().re / m as f64).max(1e-300);
        let nhat = y_train - &h_train * s_train.adjoint();
        let h_tilde = eig.vectors.adjoint() * &h_train;
        let ytv = y_train.adjoint() * &eig.vectors;
        let ntv = nhat.adjoint() * &eig.vectors;
        Ok(LoocvContext {
            h_train,
            lams: eig.values,
            c,
            h_tilde,
            ytv,
            ntv,
            s_train: s_train.clone(),
            s_norm_sq,
            q,
            m,
        })
    }

    /// Leave-one-out statistics `rhat_l` for one shrinkage weight, via the
    /// rank-one inverse update in the training-covariance eigenbasis.
    fn r_alpha(&self, alpha: f64) -> Result<Vec<C64>> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        let qf = self.q as f64;
        let tilt = (1.0 - alpha) * qf / (qf - 1.0);
        let gammas: Vec<f64> = self
            .lams
            .iter()
            .map(|&lam| tilt * lam + alpha * self.c)
            .collect();
        let mut out = Vec::with_capacity(self.q);
        for l in 0..self.q {
            let mut a = C64::new(0.0, 0.0); // y_l^H A^{-1} h
            let mut b = C64::new(0.0, 0.0); // n_l^H A^{-1} h
            let mut cc = C64::new(0.0, 0.0); // y_l^H A^{-1} n_l
            let mut d = 0.0; // n_l^H A^{-1} n_l
            for k in 0..self.m {
                let inv = 1.0 / gammas[k];
                let yt = self.ytv[(l, k)];
                let nt = self.ntv[(l, k)];
                a += yt * self.h_tilde[k] * inv;
                b += nt * self.h_tilde[k] * inv;
                cc += yt * nt.conj() * inv;
                d += nt.norm_sqr() * inv;
            }
            let rest = self.s_norm_sq - self.s_train[l].norm_sqr();
            let g = (1.0 - alpha) / (qf - 1.0) * (1.0 + self.s_train[l].norm_sqr() / rest);
            let denom = 1.0 - g * d;
            let r = a + cc / denom * (b * g - self.s_train[l] / rest);
            out.push(r);
        }
        Ok(out)
    }

    /// Unbiasing gain and post-unbiasing precision for one shrinkage weight.
    fn beta_xi(&self, r_alpha: &[C64]) -> Result<(C64, f64)> {
        let mut sum = C64::new(0.0, 0.0);
        for (l, r) in r_alpha.iter().enumerate() {
            sum += r / self.s_train[l];
        }
        if !sum.re.is_finite() || !sum.im.is_finite() || sum.norm() == 0.0 {
            return Err(Error::DegenerateTraining(
                "unbiasing gain denominator vanished".into(),
            ));
        }
        let beta = C64::new(self.q as f64, 0.0) / sum;
        let mse: f64 = r_alpha
            .iter()
            .enumerate()
            .map(|(l, r)| (beta * r - self.s_train[l]).norm_sqr())
            .sum::<f64>()
            / self.q as f64;
        let xi = if mse > 0.0 {
            (1.0 / mse).min(XI_CAP)
        } else {
            XI_CAP
        };
        Ok((beta, xi))
    }
}

/// Leave-one-out statistics, unbiasing gain, and precision for a given
/// shrinkage weight `alpha`.
pub fn loocv_precision(y_train: &CMat, s_train: &CVec, alpha: f64) -> Result<(C64, f64, Vec<C64>)> {
    let ctx = LoocvContext::new(y_train, s_train)?;
    let r = ctx.r_alpha(alpha)?;
    let (beta, xi) = ctx.beta_xi(&r)?;
    Ok((beta, xi, r))
}

/// Pick the shrinkage weight maximizing the LOOCV precision; ties go to the
/// larger (more regularized) weight.
pub fn select_alpha(y_train: &CMat, s_train: &CVec, grid: &[f64]) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty shrinkage grid".into()));
    }
    let ctx = LoocvContext::new(y_train, s_train)?;
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = (sorted[0], f64::NEG_INFINITY);
    for &alpha in &sorted {
        let r = ctx.r_alpha(alpha)?;
        let (_, xi) = ctx.beta_xi(&r)?;
        if xi >= best.1 {
            best = (alpha, xi);
        }
    }
    Ok(best)
}

/// Build the starting point of the EM iterations from training data.
///
/// The training entries of `s0` are the known symbols; data entries are
/// posterior means of the unbiased approximate-WMF statistic `beta rhat_l`
/// at the LOOCV precision `xi`; `E0` aggregates the second moments.
pub fn initialize(
    y: &CMat,
    s_train: &CVec,
    prior: &SignalPrior,
    grid: &[f64],
) -> Result<InitProduct> {
    let (_, l) = y.shape();
    let q = s_train.len();
    if q > l || prior.len() != l {
        return Err(Error::InvalidInput(format!(
            "Q={q}, L={l}, prior length {} are inconsistent",
            prior.len()
        )));
    }
    for k in 0..q {
        match &prior.symbols[k] {
            SymbolPrior::PointMass { value } if (value - s_train[k]).norm() <= 1e-12 => {}
            other => {
                return Err(Error::InvalidInput(format!(
                    "prior symbol {k} must be a point mass at the training value, got {other:?}"
                )))
            }
        }
    }
    let y_train = y.columns(0, q).clone_owned();
    let (alpha_star, _) = select_alpha(&y_train, s_train, grid)?;
    let ctx = LoocvContext::new(&y_train, s_train)?;
    let r_train = ctx.r_alpha(alpha_star)?;
    let (beta_hat, xi_hat) = ctx.beta_xi(&r_train)?;

    let mut s0 = CVec::zeros(l);
    let mut e0 = 0.0;
    for k in 0..q {
        s0[k] = s_train[k];
        e0 += s_train[k].norm_sqr();
    }
    if q < l {
        // Full-sample regularized inverse applied in the training eigenbasis.
        let gammas: Vec<f64> = ctx
            .lams
            .iter()
            .map(|&lam| (1.0 - alpha_star) * lam + alpha_star * ctx.c)
            .collect();
        let eig_vectors = {
            // Recover V from the context products: ytv = Y_t^H V was formed
            // from the same eigendecomposition; recompute it directly here.
            let (_, _, eig) = train_estimates(&y_train, s_train)?;
            eig.vectors
        };
        let h_tilde = &ctx.h_tilde;
        let data = y.columns(q, l - q);
        let ydv = data.adjoint() * &eig_vectors;
        for (idx, lsym) in (q..l).enumerate() {
            let mut r = C64::new(0.0, 0.0);
            for k in 0..ctx.m {
                r += ydv[(idx, k)] * h_tilde[k] / gammas[k];
            }
            let post = posterior_stats(&prior.symbols[lsym], beta_hat * r, xi_hat)?;
            s0[lsym] = post.mean;
            e0 += post.second_moment;
        }
    }
    Ok(InitProduct {
        s0,
        e0,
        alpha_star,
        beta_hat,
        xi_hat,
        h_train: ctx.h_train,
    })
}
