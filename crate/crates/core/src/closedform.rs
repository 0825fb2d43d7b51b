//! Closed-form GLRT statistics for a fully known signal: Kelly's full-rank
//! test, the Gerlach-Steiner clamped-eigenvalue variant, the KMR low-rank
//! test, and McWhorter's deterministic-interference test.
//!
//! All statistics are returned in the log domain; products of M eigenvalue
//! ratios overflow long before M reaches array sizes of interest.

use crate::error::{Error, Result};
use crate::spectral::{hermitian_eig, smooth_eigenvalues, EPS_PSD_REL};
use crate::{CMat, CVec};

/// Log-domain statistic plus the eigenvalue diagnostics it was built from.
#[derive(Debug, Clone)]
pub struct ClosedFormReport {
    pub log_statistic: f64,
    /// Eigenvalues of `(1/L) Y Y^H`, descending.
    pub lams0: Vec<f64>,
    /// Eigenvalues of `(1/L) Y P_s^perp Y^H`, descending.
    pub lams1: Vec<f64>,
    pub nu0: f64,
    pub nu1: f64,
    pub rank_used: usize,
}

/// Eigenvalues of the two sample covariances entering every known-signal
/// test: `(1/L) Y Y^H` and `(1/L) Y P_s^perp Y^H`.
fn detection_eigs(y: &CMat, s: &CVec) -> Result<(Vec<f64>, Vec<f64>)> {
    let (_, l) = y.shape();
    if s.len() != l {
        return Err(Error::InvalidInput(format!(
            "signal length {} != snapshot count {}",
            s.len(),
            l
        )));
    }
    let s_norm_sq = s.norm_squared();
    if s_norm_sq <= 0.0 {
        return Err(Error::ZeroSignal);
    }
    let linv = 1.0 / l as f64;
    let sig0 = (y * y.adjoint()).scale(linv);
    // Y P_s^perp Y^H = Y Y^H - (Ys)(Ys)^H / ||s||^2
    let ys = y * s;
    let sig1 = &sig0 - (&ys * ys.adjoint()).scale(linv / s_norm_sq);
    let e0 = hermitian_eig(&sig0)?;
    let e1 = hermitian_eig(&sig1)?;
    Ok((e0.values, e1.values))
}

/// Kelly's GLRT: `sum_m ln(lam0_m / lam1_m)`.
///
/// Requires `L >= M + 1`; with fewer snapshots the signal-removed sample
/// covariance is singular and the test is undefined.
pub fn kelly_statistic(y: &CMat, s: &CVec) -> Result<ClosedFormReport> {
    let (m, l) = y.shape();
    if l < m + 1 {
        return Err(Error::KellyUndefined(format!(
            "needs L >= M+1 snapshots, got L={l}, M={m}"
        )));
    }
    let (lams0, lams1) = detection_eigs(y, s)?;
    let eps = EPS_PSD_REL * lams0[0].max(0.0);
    let mut stat = 0.0;
    for (&l0, &l1) in lams0.iter().zip(&lams1) {
        if l1 <= eps {
            return Err(Error::KellyUndefined(format!(
                "signal-removed covariance eigenvalue {l1} is numerically zero"
            )));
        }
        stat += (l0 / l1).ln();
    }
    Ok(ClosedFormReport {
        log_statistic: stat,
        lams0,
        lams1,
        nu0: 0.0,
        nu1: 0.0,
        rank_used: m,
    })
}

/// Gerlach-Steiner GLRT for known noise variance `nu`: Kelly's eigenvalue
/// ratio with both spectra clamped from below at `nu`.
pub fn gerlach_steiner_statistic(y: &CMat, s: &CVec, nu: f64) -> Result<ClosedFormReport> {
    if !(nu > 0.0) {
        return Err(Error::InvalidInput(format!(
            "threshold nu must be positive, got {nu}"
        )));
    }
    let (lams0, lams1) = detection_eigs(y, s)?;
    let stat = lams0
        .iter()
        .zip(&lams1)
        .map(|(&l0, &l1)| (l0.max(nu) / l1.max(nu)).ln())
        .sum();
    Ok(ClosedFormReport {
        log_statistic: stat,
        lams0,
        lams1,
        nu0: nu,
        nu1: nu,
        rank_used: y.nrows(),
    })
}

/// KMR low-rank GLRT: eigenvalue ratio with the trailing `M - N` eigenvalues
/// of each spectrum replaced by their mean.
pub fn kmr_statistic(y: &CMat, s: &CVec, n: usize) -> Result<ClosedFormReport> {
    let (m, l) = y.shape();
    if n >= m || n > l {
        return Err(Error::InvalidRank { n, m, l });
    }
    let (lams0, lams1) = detection_eigs(y, s)?;
    let (sm0, nu0) = smooth_eigenvalues(&lams0, n)?;
    let (sm1, nu1) = smooth_eigenvalues(&lams1, n)?;
    let eps = EPS_PSD_REL * sm0[0].max(0.0);
    let mut stat = 0.0;
    for (&l0, &l1) in sm0.iter().zip(&sm1) {
        if l1 <= eps {
            return Err(Error::DegenerateNoise(l1));
        }
        stat += (l0 / l1).ln();
    }
    Ok(ClosedFormReport {
        log_statistic: stat,
        lams0,
        lams1,
        nu0,
        nu1,
        rank_used: n,
    })
}

/// McWhorter's GLRT under deterministic interference of rank `n`:
/// `M L ln(nu0 / nu1)` where `nu_i` sums the trailing eigenvalues.
pub fn mcwhorter_statistic(y: &CMat, s: &CVec, n: usize) -> Result<ClosedFormReport> {
    let (m, l) = y.shape();
    if n >= m.min(l) {
        return Err(Error::InvalidRank { n, m, l });
    }
    let (lams0, lams1) = detection_eigs(y, s)?;
    let nu0: f64 = lams0[n..].iter().sum();
    let nu1: f64 = lams1[n..].iter().sum();
    let eps = EPS_PSD_REL * lams0[0].max(0.0);
    if nu1 <= eps {
        return Err(Error::DegenerateNoise(nu1));
    }
    Ok(ClosedFormReport {
        log_statistic: (m * l) as f64 * (nu0 / nu1).ln(),
        lams0,
        lams1,
        nu0,
        nu1,
        rank_used: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{rand_cvec, rand_matrix, Rng64};
    use crate::C64;

    #[test]
    fn kelly_scalar_example() {
        // M=1, Y=[1,1], s=[1,0]: lam0 = 1, lam1 = 0.5, statistic ln 2.
        let y = CMat::from_row_slice(1, 2, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let s = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let rep = kelly_statistic(&y, &s).unwrap();
        assert!((rep.lams0[0] - 1.0).abs() < 1e-12);
        assert!((rep.lams1[0] - 0.5).abs() < 1e-12);
        assert!((rep.log_statistic - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kelly_scale_invariant() {
        let mut rng = Rng64::new(5);
        let y = rand_matrix(3, 8, &mut rng);
        let s = rand_cvec(8, &mut rng);
        let a = kelly_statistic(&y, &s).unwrap().log_statistic;
        let b = kelly_statistic(&y.scale(7.0), &s).unwrap().log_statistic;
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn kelly_vanishes_when_rows_orthogonal_to_signal() {
        // Rows of Y orthogonal to s leave Y P_s_perp = Y, so both spectra
        // coincide and the statistic is zero.
        let mut rng = Rng64::new(7);
        let s = rand_cvec(8, &mut rng);
        let mut y = rand_matrix(3, 8, &mut rng);
        for r in 0..3 {
            let row = y.row(r).transpose().conjugate();
            let proj = s.dotc(&row) / s.norm_squared();
            let adjusted = row - s.clone() * proj;
            y.set_row(r, &adjusted.conjugate().transpose());
        }
        assert!((&y * &s).norm() < 1e-10);
        let rep = kelly_statistic(&y, &s).unwrap();
        assert!(
            rep.log_statistic.abs() < 1e-10,
            "statistic {}",
            rep.log_statistic
        );
        for (a, b) in rep.lams0.iter().zip(&rep.lams1) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kelly_requires_enough_snapshots() {
        let mut rng = Rng64::new(9);
        let y = rand_matrix(4, 4, &mut rng);
        let s = rand_cvec(4, &mut rng);
        assert!(matches!(
            kelly_statistic(&y, &s),
            Err(Error::KellyUndefined(_))
        ));
    }

    #[test]
    fn kelly_rejects_zero_signal() {
        let mut rng = Rng64::new(10);
        let y = rand_matrix(2, 6, &mut rng);
        let s = CVec::zeros(6);
        assert!(matches!(kelly_statistic(&y, &s), Err(Error::ZeroSignal)));
    }

    #[test]
    fn gerlach_steiner_limits() {
        let mut rng = Rng64::new(11);
        let y = rand_matrix(3, 9, &mut rng);
        let s = rand_cvec(9, &mut rng);
        let kelly = kelly_statistic(&y, &s).unwrap().log_statistic;
        let gs = gerlach_steiner_statistic(&y, &s, 1e-14)
            .unwrap()
            .log_statistic;
        assert!((kelly - gs).abs() < 1e-9);
        // Threshold above every eigenvalue clamps both spectra flat.
        let rep = kelly_statistic(&y, &s).unwrap();
        let big = rep.lams0[0] * 2.0;
        let gs0 = gerlach_steiner_statistic(&y, &s, big)
            .unwrap()
            .log_statistic;
        assert!(gs0.abs() < 1e-12);
    }

    #[test]
    fn gerlach_steiner_matches_clamp_oracle() {
        let mut rng = Rng64::new(13);
        let y = rand_matrix(4, 10, &mut rng);
        let s = rand_cvec(10, &mut rng);
        let nu = 0.3;
        let rep = gerlach_steiner_statistic(&y, &s, nu).unwrap();
        let oracle: f64 = rep
            .lams0
            .iter()
            .zip(&rep.lams1)
            .map(|(&a, &b)| (a.max(nu)).ln() - (b.max(nu)).ln())
            .sum();
        assert!((rep.log_statistic - oracle).abs() < 1e-12);
    }

    #[test]
    fn kmr_n_zero_is_trace_ratio_of_means() {
        let mut rng = Rng64::new(17);
        let y = rand_matrix(4, 12, &mut rng);
        let s = rand_cvec(12, &mut rng);
        let rep = kmr_statistic(&y, &s, 0).unwrap();
        let m = 4.0;
        let mean0: f64 = rep.lams0.iter().sum::<f64>() / m;
        let mean1: f64 = rep.lams1.iter().sum::<f64>() / m;
        assert!((rep.log_statistic - m * (mean0 / mean1).ln()).abs() < 1e-10);
    }

    #[test]
    fn kmr_scale_invariant_and_trace_preserving() {
        let mut rng = Rng64::new(19);
        let y = rand_matrix(5, 16, &mut rng);
        let s = rand_cvec(16, &mut rng);
        for n in 0..5 {
            let a = kmr_statistic(&y, &s, n).unwrap();
            let b = kmr_statistic(&y.scale(3.0), &s, n).unwrap();
            assert!((a.log_statistic - b.log_statistic).abs() < 1e-8);
            let (sm0, _) = smooth_eigenvalues(&a.lams0, n).unwrap();
            let t0: f64 = a.lams0.iter().sum();
            let t1: f64 = sm0.iter().sum();
            assert!((t0 - t1).abs() < 1e-12 * t0);
        }
    }

    #[test]
    fn mcwhorter_n_zero_is_trace_ratio() {
        let mut rng = Rng64::new(23);
        let y = rand_matrix(3, 7, &mut rng);
        let s = rand_cvec(7, &mut rng);
        let rep = mcwhorter_statistic(&y, &s, 0).unwrap();
        let tr0: f64 = rep.lams0.iter().sum();
        let tr1: f64 = rep.lams1.iter().sum();
        assert!((rep.log_statistic - 21.0 * (tr0 / tr1).ln()).abs() < 1e-9);
    }

    #[test]
    fn mcwhorter_noiseless_is_degenerate() {
        let mut rng = Rng64::new(29);
        let h = rand_cvec(4, &mut rng);
        let s = rand_cvec(9, &mut rng);
        let y = &h * s.adjoint();
        assert!(matches!(
            mcwhorter_statistic(&y, &s, 1),
            Err(Error::DegenerateNoise(_))
        ));
    }

    #[test]
    fn statistics_are_nonnegative_and_phase_invariant() {
        let mut rng = Rng64::new(31);
        for _ in 0..50 {
            let m = 2 + (rng.next_u64() % 4) as usize;
            let l = m + 2 + (rng.next_u64() % 10) as usize;
            let y = rand_matrix(m, l, &mut rng);
            let s = rand_cvec(l, &mut rng);
            let c = C64::new(-0.7, 1.9);
            let n = (rng.next_u64() % (m as u64 - 1)) as usize;

            let kel = kelly_statistic(&y, &s).unwrap().log_statistic;
            let kmr = kmr_statistic(&y, &s, n).unwrap().log_statistic;
            let mcw = mcwhorter_statistic(&y, &s, n).unwrap().log_statistic;
            assert!(kel >= -1e-9);
            assert!(kmr >= -1e-9);
            assert!(mcw >= -1e-9);

            let s_scaled = s.map(|v| v * c);
            assert!((kelly_statistic(&y, &s_scaled).unwrap().log_statistic - kel).abs() < 1e-8);
            assert!((kmr_statistic(&y, &s_scaled, n).unwrap().log_statistic - kmr).abs() < 1e-8);
            assert!(
                (mcwhorter_statistic(&y, &s_scaled, n).unwrap().log_statistic - mcw).abs() < 1e-6
            );
        }
    }
}
