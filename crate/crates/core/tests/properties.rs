//! Property tests for the contracts that hold on arbitrary inputs.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use glrt_core::harness::{calibrate_threshold, Metric};
use glrt_core::priors::{posterior_stats, qpsk_alphabet, SymbolPrior};
use glrt_core::spectral::{principal_svd, smooth_eigenvalues};

fn descending(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn smoothing_preserves_trace_and_is_idempotent(
        lams in prop::collection::vec(1e-6..1e6_f64, 2..24),
        n_frac in 0.0..1.0_f64,
    ) {
        let lams = descending(lams);
        let n = ((lams.len() - 1) as f64 * n_frac) as usize;
        let (smoothed, nu) = smooth_eigenvalues(&lams, n).unwrap();
        let t0: f64 = lams.iter().sum();
        let t1: f64 = smoothed.iter().sum();
        prop_assert!((t0 - t1).abs() <= 1e-12 * t0);
        prop_assert!(nu >= 0.0);
        let (twice, _) = smooth_eigenvalues(&smoothed, n).unwrap();
        prop_assert_eq!(smoothed, twice);
    }

    #[test]
    fn svd_energy_identity(
        entries in prop::collection::vec((-5.0..5.0_f64, -5.0..5.0_f64), 24),
        n in 1usize..4,
    ) {
        let y = DMatrix::from_fn(4, 6, |i, j| {
            let (re, im) = entries[i * 6 + j];
            C64::new(re, im)
        });
        let svd = principal_svd(&y, n).unwrap();
        let energy: f64 = svd.singulars.iter().map(|s| s * s).sum();
        prop_assert!(y.norm_squared() - energy >= -1e-9);
        for w in svd.singulars.windows(2) {
            prop_assert!(w[0] >= w[1]);
            prop_assert!(w[1] >= 0.0);
        }
    }

    #[test]
    fn posterior_moments_respect_jensen(
        re in -4.0..4.0_f64,
        im in -4.0..4.0_f64,
        log_xi in -6.0..8.0_f64,
    ) {
        let r = C64::new(re, im);
        let xi = 10.0_f64.powf(log_xi);
        for prior in [
            SymbolPrior::uniform_discrete(&qpsk_alphabet()),
            SymbolPrior::Gaussian { mean: C64::new(0.3, -0.2), variance: 0.8 },
            SymbolPrior::PointMass { value: C64::new(-1.0, 2.0) },
        ] {
            let post = posterior_stats(&prior, r, xi).unwrap();
            prop_assert!(post.second_moment >= post.mean.norm_sqr() - 1e-12);
            if let Some(w) = post.weights {
                let sum: f64 = w.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hard_and_soft_decisions_agree_for_any_precision(
        re in -3.0..3.0_f64,
        im in -3.0..3.0_f64,
        log_xi in -4.0..8.0_f64,
    ) {
        let atoms = qpsk_alphabet();
        let prior = SymbolPrior::uniform_discrete(&atoms);
        let r = C64::new(re, im);
        // Stay away from decision bisectors, where both answers are valid.
        prop_assume!(re.abs() > 1e-3 && im.abs() > 1e-3);
        let xi = 10.0_f64.powf(log_xi);
        let post = posterior_stats(&prior, r, xi).unwrap();
        let w = post.weights.unwrap();
        let argmax = w
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let nearest = atoms
            .iter()
            .enumerate()
            .min_by(|a, b| (r - a.1).norm_sqr().partial_cmp(&(r - b.1).norm_sqr()).unwrap())
            .unwrap()
            .0;
        prop_assert_eq!(argmax, nearest);
    }

    #[test]
    fn calibrated_false_alarm_rate_is_bounded(
        h0 in prop::collection::vec(-100.0..100.0_f64, 10..200),
        h1 in prop::collection::vec(-100.0..100.0_f64, 10..200),
        pfa in 0.01..0.5_f64,
    ) {
        let (eta, pd) = calibrate_threshold(&h0, &h1, &Metric::PdAtPfa(pfa));
        let fa = h0.iter().filter(|&&v| v > eta).count() as f64 / h0.len() as f64;
        prop_assert!(fa <= pfa + 1e-12, "fa {fa} exceeds pfa {pfa}");
        prop_assert!((0.0..=1.0).contains(&pd));
        let (_, err) = calibrate_threshold(&h0, &h1, &Metric::MinError);
        prop_assert!((0.0..=0.5 + 1e-12).contains(&err));
    }
}
