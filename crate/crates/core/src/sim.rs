//! Synthetic communications-scenario generation: raised-cosine pulse
//! shaping, residual timing and frequency offsets, uniform-planar-array
//! responses with sidelobe-placed interferers, several interference classes,
//! and hypothesis-labeled snapshot synthesis with counter-based per-trial
//! RNG streams.

use num_complex::Complex64 as C64;
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::priors::qpsk_alphabet;
use crate::{CMat, CVec};

/// Frequency-offset magnitude used for unsynchronized interferers, matching
/// the signal's default oscillator-error scale.
const INTERFERER_FO_T: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceKind {
    Gauss,
    QpskUnsync,
    Sinusoid,
    Spike,
}

/// Scenario parameters. Defaults follow the reference experiment scale:
/// a 64-element planar array, 1024 symbols of which 32 are training, five
/// interferers, twofold delay oversampling, and noise/interference powers
/// tied to the training length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub m: usize,
    pub l: usize,
    pub q: usize,
    pub n_true: usize,
    pub noise_var: f64,
    pub interference_power: f64,
    pub alphabet: Vec<C64>,
    pub interference_kind: InterferenceKind,
    pub oversample: usize,
    pub rolloff: f64,
    pub fo_t_range: (f64, f64),
    pub tau_fixed: Option<f64>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            m: 64,
            l: 1024,
            q: 32,
            n_true: 5,
            noise_var: 32.0,
            interference_power: 32.0,
            alphabet: qpsk_alphabet(),
            interference_kind: InterferenceKind::Gauss,
            oversample: 2,
            rolloff: 0.35,
            fo_t_range: (-1e-4, 1e-4),
            tau_fixed: None,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let k = (self.m as f64).sqrt().round() as usize;
        if k * k != self.m || self.m == 0 {
            return Err(Error::InvalidInput(format!(
                "M={} must be a perfect square for the planar array",
                self.m
            )));
        }
        if self.q > self.l {
            return Err(Error::InvalidInput(format!(
                "Q={} exceeds L={}",
                self.q, self.l
            )));
        }
        if self.n_true >= self.m.min(self.l) {
            return Err(Error::InvalidInput(format!(
                "N={} must be < min(M, L) = {}",
                self.n_true,
                self.m.min(self.l)
            )));
        }
        if self.noise_var < 0.0 || self.interference_power < 0.0 {
            return Err(Error::InvalidInput("negative power".into()));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::InvalidInput(format!(
                "rolloff {} outside [0,1]",
                self.rolloff
            )));
        }
        if self.oversample == 0 {
            return Err(Error::InvalidInput("oversample factor must be >= 1".into()));
        }
        if self.alphabet.is_empty() {
            return Err(Error::InvalidInput("empty alphabet".into()));
        }
        if self.fo_t_range.0 > self.fo_t_range.1 {
            return Err(Error::InvalidInput(
                "empty frequency-offset interval".into(),
            ));
        }
        Ok(())
    }
}

/// One synthesized trial.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub y: CMat,
    pub hypothesis: Hypothesis,
    pub s: CVec,
    pub h: CVec,
    pub b: CMat,
    pub phi: CMat,
    pub tau_resid: f64,
    pub fo_t: f64,
}

fn sinc_pi(x: f64) -> f64 {
    let px = PI * x;
    if px.abs() < 1e-8 {
        1.0 - px * px / 6.0
    } else {
        px.sin() / px
    }
}

/// Raised-cosine pulse `g(t)` evaluated at `t/T`, with the removable
/// singularities at `t = 0` and `t = ±T/(2 rolloff)` handled analytically.
pub fn rc_pulse(t_over_t: f64, rolloff: f64) -> f64 {
    let x = t_over_t;
    if rolloff > 0.0 {
        let edge = 2.0 * rolloff * x.abs();
        if (edge - 1.0).abs() < 1e-8 {
            // cos(pi a x) / (1 - (2 a x)^2) -> pi/4 as |2 a x| -> 1.
            return (PI / 4.0) * sinc_pi(x);
        }
    }
    let denom = 1.0 - (2.0 * rolloff * x) * (2.0 * rolloff * x);
    (PI * rolloff * x).cos() / denom * sinc_pi(x)
}

/// The L x L pulse-shaping matrix `[G_delta]_{q,l} = g((l - q - delta) T)`.
pub fn pulse_matrix(delta: f64, l: usize, rolloff: f64) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(l, l, |q, col| {
        rc_pulse(col as f64 - q as f64 - delta, rolloff)
    })
}

/// The diagonal frequency-offset matrix `[J_omega]_{ll} = e^{j 2 pi omega l}`
/// for symbol indices `l = 1..=L`.
pub fn freq_matrix(omega: f64, l: usize) -> CMat {
    CMat::from_fn(l, l, |i, j| {
        if i == j {
            C64::from_polar(1.0, 2.0 * PI * omega * (i + 1) as f64)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Steering vector of a half-wavelength-spaced uniform planar array for the
/// direction cosines `(u, v) = (cos(el) sin(az), sin(el))`; the grid index
/// along `u` varies fastest.
pub fn upa_response(az: f64, el: f64, m: usize) -> Result<CVec> {
    let k = (m as f64).sqrt().round() as usize;
    if k * k != m || m == 0 {
        return Err(Error::InvalidInput(format!(
            "M={m} is not a perfect square"
        )));
    }
    let u = el.cos() * az.sin();
    let v = el.sin();
    Ok(steering_uv(u, v, k))
}

fn steering_uv(u: f64, v: f64, k: usize) -> CVec {
    let eu = C64::from_polar(1.0, PI * u);
    let ev = C64::from_polar(1.0, PI * v);
    let mut pu = Vec::with_capacity(k);
    let mut pv = Vec::with_capacity(k);
    let mut au = C64::new(1.0, 0.0);
    let mut av = C64::new(1.0, 0.0);
    for _ in 0..k {
        pu.push(au);
        pv.push(av);
        au *= eu;
        av *= ev;
    }
    let mut h = CVec::zeros(k * k);
    for q in 0..k {
        for p in 0..k {
            h[p + q * k] = pu[p] * pv[q];
        }
    }
    h
}

/// Default beampattern search grid: azimuth and elevation point counts.
const AZ_GRID: usize = 181;
const EL_GRID: usize = 91;

/// Distance between direction cosines as the steering map sees them: the
/// element phases `exp(j pi (p u + q v))` are 2-periodic in `u` and `v`,
/// so coordinates two apart describe the same array response.
fn wrap_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0);
    d.min(2.0 - d)
}

/// Steering vectors at the `n` largest sidelobes of the beampattern
/// `|h^H b(az, el)|^2`, excluding the mainlobe out to its first nulls.
pub fn interferer_responses(h: &CVec, n: usize) -> Result<CMat> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one interferer".into()));
    }
    let m = h.len();
    let k = (m as f64).sqrt().round() as usize;
    if k * k != m {
        return Err(Error::InvalidInput(format!(
            "M={m} is not a perfect square"
        )));
    }
    let az_step = 2.0 * PI / (AZ_GRID - 1) as f64;
    let el_step = PI / (EL_GRID - 1) as f64;

    let mut power = vec![0.0_f64; AZ_GRID * EL_GRID];
    let mut uv = vec![(0.0_f64, 0.0_f64); AZ_GRID * EL_GRID];
    for ie in 0..EL_GRID {
        let el = -PI / 2.0 + ie as f64 * el_step;
        for ia in 0..AZ_GRID {
            let az = -PI + ia as f64 * az_step;
            let u = el.cos() * az.sin();
            let v = el.sin();
            let b = steering_uv(u, v, k);
            let corr = h.dotc(&b);
            power[ia + ie * AZ_GRID] = corr.norm_sqr();
            uv[ia + ie * AZ_GRID] = (u, v);
        }
    }

    // Mainlobe location and its null-to-null exclusion rectangle in (u, v).
    let peak = power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let (u_main, v_main) = uv[peak];
    let null = 2.0 / k as f64;

    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for ie in 0..EL_GRID {
        for ia in 0..AZ_GRID {
            let idx = ia + ie * AZ_GRID;
            let p = power[idx];
            if p <= 0.0 {
                continue;
            }
            let (u, v) = uv[idx];
            if wrap_dist(u, u_main) < null && wrap_dist(v, v_main) < null {
                continue;
            }
            let mut is_max = true;
            'nb: for de in -1_i64..=1 {
                for da in -1_i64..=1 {
                    if de == 0 && da == 0 {
                        continue;
                    }
                    let (ja, je) = (ia as i64 + da, ie as i64 + de);
                    if ja < 0 || je < 0 || ja >= AZ_GRID as i64 || je >= EL_GRID as i64 {
                        continue;
                    }
                    if power[ja as usize + je as usize * AZ_GRID] > p {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                candidates.push((p, idx));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    // The angle grid double-covers direction-cosine space (mirror azimuths
    // give identical (u, v), the steering map wraps at the +/-1 edges, and
    // one physical lobe can put several cells at a local maximum), so keep
    // only peaks separated by at least half a null spacing.
    let lobe = 1.0 / k as f64;
    let mut kept: Vec<usize> = Vec::new();
    for &(_, idx) in &candidates {
        let (u, v) = uv[idx];
        if kept
            .iter()
            .all(|&j| wrap_dist(uv[j].0, u) > lobe || wrap_dist(uv[j].1, v) > lobe)
        {
            kept.push(idx);
            if kept.len() == n {
                break;
            }
        }
    }
    if kept.len() < n {
        return Err(Error::InsufficientSidelobes {
            found: kept.len(),
            requested: n,
        });
    }
    let mut b = CMat::zeros(m, n);
    for (col, &idx) in kept.iter().enumerate() {
        let (u, v) = uv[idx];
        b.set_column(col, &steering_uv(u, v, k));
    }
    Ok(b)
}

fn cnormal(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Temporal interference factor `Phi` (L x N) with per-column mean-square
/// power `sigma_i^2 / N`.
pub fn gen_interference(
    kind: InterferenceKind,
    n: usize,
    l: usize,
    sigma_i2: f64,
    rolloff: f64,
    rng: &mut ChaCha8Rng,
) -> CMat {
    let mut phi = CMat::zeros(l, n);
    if n == 0 {
        return phi;
    }
    let col_power = (sigma_i2 / n as f64).sqrt();
    match kind {
        InterferenceKind::Gauss => {
            for col in 0..n {
                for row in 0..l {
                    phi[(row, col)] = cnormal(rng) * col_power;
                }
            }
        }
        InterferenceKind::QpskUnsync => {
            let atoms = qpsk_alphabet();
            for col in 0..n {
                let theta: f64 = rng.gen::<f64>() * 2.0 * PI;
                let tau: f64 = rng.gen::<f64>() - 0.5;
                let fo_t: f64 = (rng.gen::<f64>() * 2.0 - 1.0) * INTERFERER_FO_T;
                let symbols: Vec<C64> = (0..l)
                    .map(|_| atoms[(rng.gen::<u32>() % 4) as usize] * col_power)
                    .collect();
                // phi_n^H = e^{j theta} s_n^H G_tau J_{f T}; store the column.
                let phase = C64::from_polar(1.0, theta);
                for row in 0..l {
                    let mut acc = C64::new(0.0, 0.0);
                    for (qi, sq) in symbols.iter().enumerate() {
                        acc += sq.conj() * rc_pulse(row as f64 - qi as f64 - tau, rolloff);
                    }
                    let jj = C64::from_polar(1.0, 2.0 * PI * fo_t * (row + 1) as f64);
                    phi[(row, col)] = (phase * acc * jj).conj();
                }
            }
        }
        InterferenceKind::Sinusoid => {
            for col in 0..n {
                let theta: f64 = rng.gen::<f64>() * 2.0 * PI;
                let omega_t: f64 = (rng.gen::<f64>() * 2.0 - 1.0) * PI;
                for row in 0..l {
                    phi[(row, col)] =
                        C64::from_polar(col_power, omega_t * (row + 1) as f64 + theta);
                }
            }
        }
        InterferenceKind::Spike => {
            let amp = (sigma_i2 * l as f64 / n as f64).sqrt();
            for col in 0..n {
                let theta: f64 = rng.gen::<f64>() * 2.0 * PI;
                let tau: f64 = rng.gen::<f64>() * l as f64;
                let phase = C64::from_polar(amp, theta);
                for row in 0..l {
                    phi[(row, col)] = phase * rc_pulse((row + 1) as f64 - tau, rolloff);
                }
            }
        }
    }
    phi
}

/// The signal row `s^H G_tau J_{foT}` without materializing the L x L
/// matrices.
fn signal_row(s: &CVec, tau: f64, fo_t: f64, rolloff: f64) -> Vec<C64> {
    let l = s.len();
    let mut row = vec![C64::new(0.0, 0.0); l];
    if tau == 0.0 {
        for (col, r) in row.iter_mut().enumerate() {
            *r = s[col].conj();
        }
    } else {
        for (col, r) in row.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (q, sq) in s.iter().enumerate() {
                acc += sq.conj() * rc_pulse(col as f64 - q as f64 - tau, rolloff);
            }
            *r = acc;
        }
    }
    if fo_t != 0.0 {
        for (col, r) in row.iter_mut().enumerate() {
            *r *= C64::from_polar(1.0, 2.0 * PI * fo_t * (col + 1) as f64);
        }
    }
    row
}

/// Synthesize one trial. Every random quantity is drawn from a stream
/// derived from `(config.seed, trial_index)`, and the draw order does not
/// depend on the hypothesis, so H0/H1 pairs at the same index share their
/// noise, interference, and offset realizations.
pub fn synthesize(
    config: &ScenarioConfig,
    hypothesis: Hypothesis,
    trial_index: u64,
) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial_index);
    let (m, l) = (config.m, config.l);

    let s = CVec::from_fn(l, |_, _| {
        config.alphabet[(rng.gen::<u32>() as usize) % config.alphabet.len()]
    });
    let az: f64 = rng.gen::<f64>() * 2.0 * PI;
    let el: f64 = rng.gen::<f64>() * 2.0 * PI;
    let h = upa_response(az, el, m)?;
    let half = 1.0 / (2.0 * config.oversample as f64);
    let tau_drawn = (rng.gen::<f64>() * 2.0 - 1.0) * half;
    let tau_resid = config
        .tau_fixed
        .unwrap_or(if tau_drawn >= half { -half } else { tau_drawn });
    let (fo_lo, fo_hi) = config.fo_t_range;
    let fo_t = fo_lo + rng.gen::<f64>() * (fo_hi - fo_lo);

    let (b, phi) = if config.n_true > 0 {
        let b = interferer_responses(&h, config.n_true)?;
        let phi = gen_interference(
            config.interference_kind,
            config.n_true,
            l,
            config.interference_power,
            config.rolloff,
            &mut rng,
        );
        (b, phi)
    } else {
        (CMat::zeros(m, 0), CMat::zeros(l, 0))
    };

    let mut y = if config.n_true > 0 && config.interference_power > 0.0 {
        &b * phi.adjoint()
    } else {
        CMat::zeros(m, l)
    };

    if config.noise_var > 0.0 {
        let sd = config.noise_var.sqrt();
        for col in 0..l {
            for row in 0..m {
                y[(row, col)] += cnormal(&mut rng) * sd;
            }
        }
    }

    if hypothesis == Hypothesis::H1 {
        let row = signal_row(&s, tau_resid, fo_t, config.rolloff);
        for col in 0..l {
            for r in 0..m {
                y[(r, col)] += h[r] * row[col];
            }
        }
    }

    Ok(Scenario {
        y,
        hypothesis,
        s,
        h,
        b,
        phi,
        tau_resid,
        fo_t,
    })
}
