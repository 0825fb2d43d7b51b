//! Per-symbol signal priors and their posterior statistics given the
//! Gaussian-channel sufficient statistic `r_l = s_l + CN(0, 1/xi)`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Prior on a single symbol.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolPrior {
    /// Known symbol (training, or the zero tail of a pulsed signal).
    PointMass { value: C64 },
    /// Finite alphabet with prior weights (nonnegative, summing to one).
    Discrete { atoms: Vec<C64>, weights: Vec<f64> },
    /// Circular complex Gaussian.
    Gaussian { mean: C64, variance: f64 },
}

impl SymbolPrior {
    /// Equal-weight prior over an alphabet.
    pub fn uniform_discrete(atoms: &[C64]) -> Self {
        let k = atoms.len();
        SymbolPrior::Discrete {
            atoms: atoms.to_vec(),
            weights: vec![1.0 / k as f64; k],
        }
    }

    /// Prior mean and second moment, i.e. the posterior at zero precision.
    pub fn prior_moments(&self) -> (C64, f64) {
        match self {
            SymbolPrior::PointMass { value } => (*value, value.norm_sqr()),
            SymbolPrior::Discrete { atoms, weights } => {
                let mean = atoms
                    .iter()
                    .zip(weights)
                    .fold(C64::new(0.0, 0.0), |acc, (d, w)| acc + d * *w);
                let second = atoms
                    .iter()
                    .zip(weights)
                    .map(|(d, w)| w * d.norm_sqr())
                    .sum();
                (mean, second)
            }
            SymbolPrior::Gaussian { mean, variance } => (*mean, mean.norm_sqr() + variance),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SymbolPrior::PointMass { .. } => Ok(()),
            SymbolPrior::Discrete { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return Err(Error::InvalidInput(
                        "discrete prior atom/weight mismatch".into(),
                    ));
                }
                if weights.iter().any(|&w| w < 0.0) {
                    return Err(Error::InvalidInput("negative prior weight".into()));
                }
                let sum: f64 = weights.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "prior weights sum to {sum}, expected 1"
                    )));
                }
                Ok(())
            }
            SymbolPrior::Gaussian { variance, .. } => {
                if *variance > 0.0 && variance.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!(
                        "Gaussian prior variance {variance}"
                    )))
                }
            }
        }
    }
}

/// Independent prior over the full symbol vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPrior {
    pub symbols: Vec<SymbolPrior>,
}

impl SignalPrior {
    pub fn new(symbols: Vec<SymbolPrior>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidInput("empty signal prior".into()));
        }
        for s in &symbols {
            s.validate()?;
        }
        Ok(SignalPrior { symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// True when every component is a point mass (fully known signal).
    pub fn is_point_mass(&self) -> bool {
        self.symbols
            .iter()
            .all(|s| matches!(s, SymbolPrior::PointMass { .. }))
    }
}

/// Posterior mean, second moment, and (for discrete priors) atom weights.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub mean: C64,
    pub second_moment: f64,
    pub weights: Option<Vec<f64>>,
}

/// Posterior statistics of one symbol from `r = s + CN(0, 1/xi)`.
///
/// Discrete weights are computed as a softmax of `-xi |r - d_k|^2 + ln w_k`
/// with max subtraction, so large precisions cannot overflow the exponent.
pub fn posterior_stats(prior: &SymbolPrior, r: C64, xi: f64) -> Result<PosteriorSummary> {
    if !(xi > 0.0) || !xi.is_finite() {
        return Err(Error::InvalidPrecision(xi));
    }
    prior.validate()?;
    match prior {
        SymbolPrior::PointMass { value } => Ok(PosteriorSummary {
            mean: *value,
            second_moment: value.norm_sqr(),
            weights: None,
        }),
        SymbolPrior::Gaussian { mean, variance } => {
            let gain = variance / (variance + 1.0 / xi);
            let post_mean = mean + (r - mean) * gain;
            let post_var = 1.0 / (xi + 1.0 / variance);
            Ok(PosteriorSummary {
                mean: post_mean,
                second_moment: post_mean.norm_sqr() + post_var,
                weights: None,
            })
        }
        SymbolPrior::Discrete { atoms, weights } => {
            let logits: Vec<f64> = atoms
                .iter()
                .zip(weights)
                .map(|(d, w)| {
                    let lw = if *w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
                    -xi * (r - d).norm_sqr() + lw
                })
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let unnorm: Vec<f64> = logits.iter().map(|&e| (e - max).exp()).collect();
            let z: f64 = unnorm.iter().sum();
            let post: Vec<f64> = unnorm.iter().map(|&u| u / z).collect();
            let mean = atoms
                .iter()
                .zip(&post)
                .fold(C64::new(0.0, 0.0), |acc, (d, w)| acc + d * *w);
            let second = atoms.iter().zip(&post).map(|(d, w)| w * d.norm_sqr()).sum();
            Ok(PosteriorSummary {
                mean,
                second_moment: second,
                weights: Some(post),
            })
        }
    }
}

/// Hard (ML) decision: the atom nearest to `r`, ties broken toward the
/// lowest atom index. Point masses stay pinned; Gaussian components return
/// `r` itself (the unconstrained ML estimate).
pub fn hard_decision(prior: &SymbolPrior, r: C64) -> C64 {
    match prior {
        SymbolPrior::PointMass { value } => *value,
        SymbolPrior::Gaussian { .. } => r,
        SymbolPrior::Discrete { atoms, .. } => {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, d) in atoms.iter().enumerate() {
                let dist = (r - d).norm_sqr();
                if dist < best_d {
                    best_d = dist;
                    best = k;
                }
            }
            atoms[best]
        }
    }
}

/// Posterior mean vector and aggregated second moment `E = sum_l E|s_l|^2`.
pub fn signal_posterior(prior: &SignalPrior, r: &[C64], xi: f64) -> Result<(Vec<C64>, f64)> {
    if prior.len() != r.len() {
        return Err(Error::InvalidInput(format!(
            "prior length {} != statistic length {}",
            prior.len(),
            r.len()
        )));
    }
    let mut s_hat = Vec::with_capacity(r.len());
    let mut energy = 0.0;
    for (p, &rl) in prior.symbols.iter().zip(r) {
        let post = posterior_stats(p, rl, xi)?;
        s_hat.push(post.mean);
        energy += post.second_moment;
    }
    Ok((s_hat, energy))
}

/// Distribution assumed for the unknown data symbols.
#[derive(Debug, Clone, PartialEq)]
pub enum DataModel {
    /// Equal-weight draw from the alphabet.
    Discrete,
    /// Zero-mean circular Gaussian with the given variance.
    Gaussian(f64),
}

/// Build the training/data prior: the first `Q` symbols are point masses at
/// the known training values, the remaining `L - Q` follow `data_model`.
pub fn training_data_prior(
    s_train: &[C64],
    alphabet: &[C64],
    l: usize,
    data_model: &DataModel,
) -> Result<SignalPrior> {
    let q = s_train.len();
    if q > l {
        return Err(Error::InvalidInput(format!("Q={q} exceeds L={l}")));
    }
    if matches!(data_model, DataModel::Discrete) && alphabet.is_empty() && q < l {
        return Err(Error::InvalidInput(
            "empty alphabet for discrete data prior".into(),
        ));
    }
    let mut symbols = Vec::with_capacity(l);
    for &s in s_train {
        symbols.push(SymbolPrior::PointMass { value: s });
    }
    for _ in q..l {
        symbols.push(match data_model {
            DataModel::Discrete => SymbolPrior::uniform_discrete(alphabet),
            DataModel::Gaussian(v) => SymbolPrior::Gaussian {
                mean: C64::new(0.0, 0.0),
                variance: *v,
            },
        });
    }
    SignalPrior::new(symbols)
}

/// The unit-variance QPSK alphabet `(±1 ± j)/sqrt(2)`.
pub fn qpsk_alphabet() -> Vec<C64> {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        C64::new(a, a),
        C64::new(a, -a),
        C64::new(-a, a),
        C64::new(-a, -a),
    ]
}

/// The unit-variance BPSK alphabet `±1`.
pub fn bpsk_alphabet() -> Vec<C64> {
    vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::Rng64;

    #[test]
    fn gaussian_posterior_example() {
        let prior = SymbolPrior::Gaussian {
            mean: C64::new(0.0, 0.0),
            variance: 1.0,
        };
        let post = posterior_stats(&prior, C64::new(2.0, 0.0), 1.0).unwrap();
        assert!((post.mean - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((post.second_moment - 1.5).abs() < 1e-12);
    }

    #[test]
    fn bpsk_symmetry_gives_zero_mean() {
        let prior = SymbolPrior::uniform_discrete(&bpsk_alphabet());
        let post = posterior_stats(&prior, C64::new(0.0, 0.0), 3.0).unwrap();
        assert!(post.mean.norm() < 1e-15);
    }

    #[test]
    fn qpsk_high_precision_converges_to_atom() {
        let atoms = qpsk_alphabet();
        let prior = SymbolPrior::uniform_discrete(&atoms);
        let post = posterior_stats(&prior, atoms[2], 1e6).unwrap();
        assert!((post.mean - atoms[2]).norm() < 1e-6);
        assert!((post.weights.unwrap()[2] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn precision_must_be_positive() {
        let prior = SymbolPrior::uniform_discrete(&bpsk_alphabet());
        assert!(matches!(
            posterior_stats(&prior, C64::new(0.0, 0.0), 0.0),
            Err(Error::InvalidPrecision(_))
        ));
        assert!(posterior_stats(&prior, C64::new(0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn point_mass_signal_posterior() {
        let vals = vec![C64::new(1.0, 1.0), C64::new(-1.0, 0.5)];
        let prior = SignalPrior::new(
            vals.iter()
                .map(|&v| SymbolPrior::PointMass { value: v })
                .collect(),
        )
        .unwrap();
        let r = vec![C64::new(9.0, 9.0); 2];
        let (s_hat, e) = signal_posterior(&prior, &r, 1.0).unwrap();
        assert_eq!(s_hat, vals);
        let expect: f64 = vals.iter().map(|v| v.norm_sqr()).sum();
        assert!((e - expect).abs() < 1e-12);
    }

    #[test]
    fn gaussian_prior_dominates_at_low_precision() {
        let l = 8;
        let prior = SignalPrior::new(vec![
            SymbolPrior::Gaussian {
                mean: C64::new(0.0, 0.0),
                variance: 1.0
            };
            l
        ])
        .unwrap();
        let r = vec![C64::new(5.0, -3.0); l];
        let (s_hat, e) = signal_posterior(&prior, &r, 1e-12).unwrap();
        for s in &s_hat {
            assert!(s.norm() < 1e-10);
        }
        assert!((e - l as f64).abs() < 1e-9);
    }

    #[test]
    fn mixed_prior_matches_per_symbol_loop() {
        let mut rng = Rng64::new(29);
        let atoms = qpsk_alphabet();
        let mut symbols = vec![
            SymbolPrior::PointMass { value: atoms[0] },
            SymbolPrior::PointMass { value: atoms[3] },
        ];
        for _ in 0..6 {
            symbols.push(SymbolPrior::uniform_discrete(&atoms));
        }
        let prior = SignalPrior::new(symbols).unwrap();
        let r: Vec<C64> = (0..8).map(|_| rng.cnormal()).collect();
        let xi = 2.7;
        let (s_hat, e) = signal_posterior(&prior, &r, xi).unwrap();
        let mut e_ref = 0.0;
        for (l, p) in prior.symbols.iter().enumerate() {
            let post = posterior_stats(p, r[l], xi).unwrap();
            assert_eq!(post.mean, s_hat[l]);
            e_ref += post.second_moment;
        }
        assert_eq!(e, e_ref);
    }

    #[test]
    fn training_prior_construction() {
        let atoms = bpsk_alphabet();
        let s_train = vec![atoms[0], atoms[1]];
        let p = training_data_prior(&s_train, &atoms, 4, &DataModel::Discrete).unwrap();
        assert_eq!(p.len(), 4);
        assert!(matches!(p.symbols[0], SymbolPrior::PointMass { .. }));
        assert!(matches!(p.symbols[1], SymbolPrior::PointMass { .. }));
        match &p.symbols[2] {
            SymbolPrior::Discrete { weights, .. } => {
                assert_eq!(weights, &vec![0.5, 0.5]);
            }
            other => panic!("expected discrete prior, got {other:?}"),
        }
        // Q = L: all point masses.
        let p = training_data_prior(&s_train, &atoms, 2, &DataModel::Discrete).unwrap();
        assert!(p.is_point_mass());
        // Q = 0: fully blind.
        let p = training_data_prior(&[], &qpsk_alphabet(), 3, &DataModel::Discrete).unwrap();
        assert!(p
            .symbols
            .iter()
            .all(|s| matches!(s, SymbolPrior::Discrete { .. })));
        // Q > L rejected.
        assert!(training_data_prior(&s_train, &atoms, 1, &DataModel::Discrete).is_err());
    }

    #[test]
    fn posterior_mean_converges_to_nearest_atom() {
        let atoms = qpsk_alphabet();
        let prior = SymbolPrior::uniform_discrete(&atoms);
        let mut rng = Rng64::new(31);
        for _ in 0..200 {
            let r = rng.cnormal() * 2.0;
            // Skip draws near a decision bisector, where "nearest" is ambiguous.
            let mut dists: Vec<f64> = atoms.iter().map(|d| (r - d).norm()).collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if dists[1] - dists[0] < 1e-3 {
                continue;
            }
            let nearest = hard_decision(&prior, r);
            let post = posterior_stats(&prior, r, 1e8).unwrap();
            assert!((post.mean - nearest).norm() < 1e-6);
        }
    }

    #[test]
    fn hard_and_soft_decisions_agree() {
        let atoms = qpsk_alphabet();
        let prior = SymbolPrior::uniform_discrete(&atoms);
        let mut rng = Rng64::new(37);
        for _ in 0..200 {
            let r = rng.cnormal() * 1.5;
            let xi = 10.0_f64.powf(rng.uniform() * 6.0 - 2.0);
            let hard = hard_decision(&prior, r);
            let post = posterior_stats(&prior, r, xi).unwrap();
            let w = post.weights.unwrap();
            let argmax = w
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(atoms[argmax], hard);
        }
    }

    #[test]
    fn pulsed_prior_passes_contracts() {
        let atoms = qpsk_alphabet();
        let mut symbols: Vec<SymbolPrior> = (0..4)
            .map(|_| SymbolPrior::uniform_discrete(&atoms))
            .collect();
        for _ in 0..4 {
            symbols.push(SymbolPrior::PointMass {
                value: C64::new(0.0, 0.0),
            });
        }
        let prior = SignalPrior::new(symbols).unwrap();
        let r = vec![C64::new(0.3, 0.1); 8];
        let (s_hat, e) = signal_posterior(&prior, &r, 2.0).unwrap();
        let norm_sq: f64 = s_hat.iter().map(|s| s.norm_sqr()).sum();
        assert!(e >= norm_sq - 1e-12);
        for s in &s_hat[4..] {
            assert_eq!(s.norm(), 0.0);
        }
    }
}
