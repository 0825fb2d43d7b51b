//! Monte Carlo experiment harness: detector wiring, paired-trial execution,
//! threshold calibration, parameter sweeps, and report emission.

pub mod config;
pub mod metrics;
pub mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::closedform::{kelly_statistic, kmr_statistic, mcwhorter_statistic};
use crate::em::det::glrt_det;
use crate::em::gauss::glrt_gauss;
use crate::em::{DecisionMode, DetectorReport, EmConfig, InitState, RankMode};
use crate::error::{Error, Result};
use crate::init::{initialize, train_estimates, DEFAULT_ALPHA_GRID};
use crate::priors::{training_data_prior, DataModel};
use crate::rank::{estimate_rank, InterferenceModel, RankCriterion};
use crate::sim::{synthesize, Hypothesis, Scenario, ScenarioConfig};
use crate::{CVec, C64};

pub use metrics::{calibrate_threshold, Metric};

/// The detectors of the experiment suite. Training-only baselines see just
/// the first Q snapshot columns; EM detectors see all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    KelTr,
    KmrTr,
    McwTr,
    KelEm,
    KmrEm,
    McwEm,
    Forsythe,
    ForsytheLowRank,
    HardMcwEm,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 9] = [
        DetectorKind::KelTr,
        DetectorKind::KmrTr,
        DetectorKind::McwTr,
        DetectorKind::KelEm,
        DetectorKind::KmrEm,
        DetectorKind::McwEm,
        DetectorKind::Forsythe,
        DetectorKind::ForsytheLowRank,
        DetectorKind::HardMcwEm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::KelTr => "kel-tr",
            DetectorKind::KmrTr => "kmr-tr",
            DetectorKind::McwTr => "mcw-tr",
            DetectorKind::KelEm => "kel-em",
            DetectorKind::KmrEm => "kmr-em",
            DetectorKind::McwEm => "mcw-em",
            DetectorKind::Forsythe => "forsythe",
            DetectorKind::ForsytheLowRank => "forsythe-lowrank",
            DetectorKind::HardMcwEm => "hard-mcw-em",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        DetectorKind::ALL
            .iter()
            .find(|d| d.name() == name.trim())
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown detector '{name}'")))
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Shared tuning knobs for the EM detectors and baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub fast_eig: bool,
    /// Rank-search limit; `None` uses `min(M, L) - 1` capped at `M/2`.
    pub n_max: Option<usize>,
    pub freeze_rank: bool,
    pub gic_kmr_em: f64,
    pub gic_mcw_em: f64,
    pub gic_kmr_tr: f64,
    pub gic_mcw_tr: f64,
    pub alpha_grid: Vec<f64>,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iters: 50,
            rel_tol: 0.01,
            fast_eig: true,
            n_max: None,
            freeze_rank: false,
            gic_kmr_em: 10.0,
            gic_mcw_em: 1.7,
            gic_kmr_tr: 1.1,
            gic_mcw_tr: 1.25,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
        }
    }
}

/// One detector evaluation on one synthesized draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub hypothesis: Hypothesis,
    pub detector: String,
    pub log_statistic: Option<f64>,
    pub error: Option<String>,
    pub n_hat: Option<usize>,
    pub iters: Option<usize>,
    pub sigma_i2: f64,
    pub noise_var: f64,
    pub q: usize,
    pub tau_resid: f64,
    pub fo_t: f64,
}

/// Scenario plus the per-trial quantities detectors share: the training
/// prior and (lazily, since only EM detectors need it) the LOOCV init.
struct TrialContext<'a> {
    scenario: &'a Scenario,
    config: &'a ScenarioConfig,
    opts: &'a EmOptions,
    s_train: CVec,
    init: std::cell::OnceCell<Result<InitState>>,
}

impl<'a> TrialContext<'a> {
    fn new(scenario: &'a Scenario, config: &'a ScenarioConfig, opts: &'a EmOptions) -> Self {
        let s_train = scenario.s.rows(0, config.q).clone_owned();
        TrialContext {
            scenario,
            config,
            opts,
            s_train,
            init: std::cell::OnceCell::new(),
        }
    }

    fn em_init(&self) -> Result<InitState> {
        let res = self.init.get_or_init(|| {
            let s_slice: Vec<C64> = self.s_train.iter().cloned().collect();
            let prior = training_data_prior(
                &s_slice,
                &self.config.alphabet,
                self.config.l,
                &DataModel::Discrete,
            )?;
            let product = initialize(
                &self.scenario.y,
                &self.s_train,
                &prior,
                &self.opts.alpha_grid,
            )?;
            InitState::new(product.s0, product.e0)
        });
        match res {
            Ok(init) => Ok(InitState {
                s0: init.s0.clone(),
                e0: init.e0,
            }),
            Err(e) => Err(Error::Config(format!("initialization failed: {e}"))),
        }
    }

    fn n_max(&self, model: InterferenceModel, l: usize) -> usize {
        let m = self.config.m;
        let default = RankCriterion::default_n_max(m, l);
        let cap = match model {
            InterferenceModel::Gauss => m - 1,
            InterferenceModel::Det => m.min(l) - 1,
        };
        self.opts.n_max.unwrap_or(default).min(cap)
    }

    fn em_config(&self, rank_mode: RankMode, mode: DecisionMode) -> EmConfig {
        EmConfig {
            max_iters: self.opts.max_iters,
            rel_tol: self.opts.rel_tol,
            decision_mode: mode,
            rank_mode,
            fast_eig: self.opts.fast_eig,
        }
    }
}

/// Evaluate one detector on one scenario.
pub fn evaluate_detector(
    kind: DetectorKind,
    scenario: &Scenario,
    config: &ScenarioConfig,
    opts: &EmOptions,
) -> Result<DetectorReport> {
    let ctx = TrialContext::new(scenario, config, opts);
    evaluate_with_context(kind, &ctx)
}

fn evaluate_with_context(kind: DetectorKind, ctx: &TrialContext<'_>) -> Result<DetectorReport> {
    let y = &ctx.scenario.y;
    let config = ctx.config;
    let q = config.q;
    let m = config.m;
    match kind {
        DetectorKind::KelTr => {
            let y_train = y.columns(0, q).clone_owned();
            Ok(kelly_statistic(&y_train, &ctx.s_train)?.into())
        }
        DetectorKind::KmrTr => {
            let y_train = y.columns(0, q).clone_owned();
            let (_, _, eig) = train_estimates(&y_train, &ctx.s_train)?;
            let crit = RankCriterion::gic(
                ctx.opts.gic_kmr_tr,
                ctx.n_max(InterferenceModel::Gauss, q),
                InterferenceModel::Gauss,
            );
            let (n_hat, _) = estimate_rank(&eig.values, &crit, q)?;
            Ok(kmr_statistic(&y_train, &ctx.s_train, n_hat)?.into())
        }
        DetectorKind::McwTr => {
            let y_train = y.columns(0, q).clone_owned();
            let (_, _, eig) = train_estimates(&y_train, &ctx.s_train)?;
            let crit = RankCriterion::gic(
                ctx.opts.gic_mcw_tr,
                ctx.n_max(InterferenceModel::Det, q),
                InterferenceModel::Det,
            );
            let (n_hat, _) = estimate_rank(&eig.values, &crit, q)?;
            Ok(mcwhorter_statistic(&y_train, &ctx.s_train, n_hat)?.into())
        }
        _ => {
            let s_slice: Vec<C64> = ctx.s_train.iter().cloned().collect();
            let prior =
                training_data_prior(&s_slice, &config.alphabet, config.l, &DataModel::Discrete)?;
            let init = ctx.em_init()?;
            let gauss_est = |gain: f64| RankMode::Estimate {
                criterion: RankCriterion::gic(
                    gain,
                    ctx.n_max(InterferenceModel::Gauss, config.l),
                    InterferenceModel::Gauss,
                ),
                freeze_after_first: ctx.opts.freeze_rank,
            };
            let det_est = |gain: f64| RankMode::Estimate {
                criterion: RankCriterion::gic(
                    gain,
                    ctx.n_max(InterferenceModel::Det, config.l),
                    InterferenceModel::Det,
                ),
                freeze_after_first: ctx.opts.freeze_rank,
            };
            match kind {
                DetectorKind::KelEm => {
                    let cfg = ctx.em_config(RankMode::Fixed(m), DecisionMode::Soft);
                    glrt_gauss(y, &prior, &init, &cfg)
                }
                DetectorKind::KmrEm => {
                    let cfg = ctx.em_config(gauss_est(ctx.opts.gic_kmr_em), DecisionMode::Soft);
                    glrt_gauss(y, &prior, &init, &cfg)
                }
                DetectorKind::McwEm => {
                    let cfg = ctx.em_config(det_est(ctx.opts.gic_mcw_em), DecisionMode::Soft);
                    glrt_det(y, &prior, &init, &cfg)
                }
                DetectorKind::Forsythe => {
                    let cfg = ctx.em_config(RankMode::Fixed(m), DecisionMode::Hard);
                    glrt_gauss(y, &prior, &init, &cfg)
                }
                DetectorKind::ForsytheLowRank => {
                    let cfg = ctx.em_config(gauss_est(ctx.opts.gic_kmr_em), DecisionMode::Hard);
                    glrt_gauss(y, &prior, &init, &cfg)
                }
                DetectorKind::HardMcwEm => {
                    let cfg = ctx.em_config(det_est(ctx.opts.gic_mcw_em), DecisionMode::Hard);
                    glrt_det(y, &prior, &init, &cfg)
                }
                _ => unreachable!("training-only kinds handled above"),
            }
        }
    }
}

fn record_from(
    kind: DetectorKind,
    scenario: &Scenario,
    config: &ScenarioConfig,
    trial_index: u64,
    outcome: Result<DetectorReport>,
) -> TrialRecord {
    let (log_statistic, error, n_hat, iters) = match outcome {
        Ok(rep) if rep.log_statistic.is_finite() => (
            Some(rep.log_statistic),
            None,
            Some(rep.n_hat),
            Some(rep.iters),
        ),
        Ok(rep) => (
            None,
            Some(format!("non-finite statistic {}", rep.log_statistic)),
            Some(rep.n_hat),
            Some(rep.iters),
        ),
        Err(e) => (None, Some(e.to_string()), None, None),
    };
    TrialRecord {
        trial_index,
        hypothesis: scenario.hypothesis,
        detector: kind.name().to_string(),
        log_statistic,
        error,
        n_hat,
        iters,
        sigma_i2: config.interference_power,
        noise_var: config.noise_var,
        q: config.q,
        tau_resid: scenario.tau_resid,
        fo_t: scenario.fo_t,
    }
}

/// Run `trials` paired H1/H0 draws and evaluate every detector on both.
/// Individual detector failures become per-record error tags; the batch
/// never aborts. Records come back ordered by (trial, hypothesis, detector).
pub fn run_point(
    config: &ScenarioConfig,
    detectors: &[DetectorKind],
    trials: u64,
    opts: &EmOptions,
) -> Result<Vec<TrialRecord>> {
    if detectors.is_empty() {
        return Err(Error::Config("no detectors requested".into()));
    }
    config.validate()?;
    let nested: Vec<Vec<TrialRecord>> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<TrialRecord>> {
            let mut out = Vec::with_capacity(detectors.len() * 2);
            for hyp in [Hypothesis::H1, Hypothesis::H0] {
                let scenario = synthesize(config, hyp, trial)?;
                let ctx = TrialContext::new(&scenario, config, opts);
                for &kind in detectors {
                    let outcome = evaluate_with_context(kind, &ctx);
                    out.push(record_from(kind, &scenario, config, trial, outcome));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(nested.into_concat())
}

trait Concat<T> {
    fn into_concat(self) -> Vec<T>;
}

impl<T> Concat<T> for Vec<Vec<T>> {
    fn into_concat(self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.iter().map(Vec::len).sum());
        for v in self {
            out.extend(v);
        }
        out
    }
}

/// Sweep axis. Axis-coupled powers follow the reference experiments: the
/// training-length axis can tie both powers to Q, and the rank axis can fix
/// the per-interferer power instead of the total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Q,
    Snr,
    Sir,
    NTrue,
    Tau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials_per_point: u64,
    pub metric: Metric,
    pub per_interferer_power: bool,
    pub couple_noise: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep has no axis values".into()));
        }
        if self.trials_per_point < 2 {
            return Err(Error::Config("need at least 2 trials per point".into()));
        }
        self.metric.validate()
    }

    /// The scenario at one axis value.
    pub fn point_config(&self, base: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut cfg = base.clone();
        match self.axis {
            SweepAxis::Q => {
                cfg.q = value.round() as usize;
                if self.couple_noise {
                    cfg.noise_var = value;
                    cfg.interference_power = value;
                }
            }
            SweepAxis::Snr => {
                cfg.noise_var = value;
                cfg.interference_power = value;
            }
            SweepAxis::Sir => {
                cfg.interference_power = value;
            }
            SweepAxis::NTrue => {
                cfg.n_true = value.round() as usize;
                if self.per_interferer_power {
                    cfg.interference_power = base.interference_power * value;
                }
            }
            SweepAxis::Tau => {
                cfg.tau_fixed = Some(value);
            }
        }
        cfg
    }
}

/// One (axis value, detector) summary row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub detector: String,
    pub metric_value: Option<f64>,
    pub threshold: Option<f64>,
    pub mean_n_hat_h1: Option<f64>,
    pub mean_iters: Option<f64>,
    pub errors: u64,
    pub trials: u64,
    pub wall_secs: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub axis: SweepAxis,
    pub metric: Metric,
    pub rows: Vec<SweepRow>,
    pub records: Vec<TrialRecord>,
}

/// Summarize one detector's records at one point into a row.
pub fn summarize_detector(
    records: &[TrialRecord],
    detector: &str,
    axis_value: f64,
    metric: &Metric,
    wall_secs: f64,
) -> SweepRow {
    let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.detector == detector).collect();
    let h0: Vec<f64> = mine
        .iter()
        .filter(|r| r.hypothesis == Hypothesis::H0)
        .filter_map(|r| r.log_statistic)
        .collect();
    let h1: Vec<f64> = mine
        .iter()
        .filter(|r| r.hypothesis == Hypothesis::H1)
        .filter_map(|r| r.log_statistic)
        .collect();
    let errors = mine.iter().filter(|r| r.error.is_some()).count() as u64;
    let trials = mine
        .iter()
        .filter(|r| r.hypothesis == Hypothesis::H1)
        .count() as u64;
    let (metric_value, threshold) = if h0.is_empty() || h1.is_empty() {
        (None, None)
    } else {
        let (eta, achieved) = calibrate_threshold(&h0, &h1, metric);
        (Some(achieved), Some(eta))
    };
    let n_hats: Vec<f64> = mine
        .iter()
        .filter(|r| r.hypothesis == Hypothesis::H1)
        .filter_map(|r| r.n_hat.map(|n| n as f64))
        .collect();
    let iters: Vec<f64> = mine
        .iter()
        .filter_map(|r| r.iters.map(|n| n as f64))
        .collect();
    let mean = |v: &[f64]| {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    SweepRow {
        axis_value,
        detector: detector.to_string(),
        metric_value,
        threshold,
        mean_n_hat_h1: mean(&n_hats),
        mean_iters: mean(&iters),
        errors,
        trials,
        wall_secs,
    }
}

/// Run a full sweep: one `run_point` per axis value, thresholds calibrated
/// per (point, detector) from the paired statistics.
pub fn run_sweep(
    sweep: &SweepSpec,
    base: &ScenarioConfig,
    detectors: &[DetectorKind],
    opts: &EmOptions,
) -> Result<SweepSummary> {
    sweep.validate()?;
    let mut rows = Vec::new();
    let mut all_records = Vec::new();
    for &value in &sweep.values {
        let cfg = sweep.point_config(base, value);
        let started = Instant::now();
        let records = run_point(&cfg, detectors, sweep.trials_per_point, opts)?;
        let elapsed = started.elapsed().as_secs_f64();
        for &det in detectors {
            rows.push(summarize_detector(
                &records,
                det.name(),
                value,
                &sweep.metric,
                elapsed / detectors.len() as f64,
            ));
        }
        all_records.extend(records);
    }
    Ok(SweepSummary {
        axis: sweep.axis,
        metric: sweep.metric,
        rows,
        records: all_records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ScenarioConfig {
        // 3x3 planar array: the smallest grid that actually has sidelobes
        // for the interferer placement.
        ScenarioConfig {
            m: 9,
            l: 24,
            q: 6,
            n_true: 1,
            noise_var: 6.0,
            interference_power: 6.0,
            seed: 42,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn run_point_counts_and_determinism() {
        let cfg = tiny_config();
        let opts = EmOptions::default();
        let recs = run_point(&cfg, &[DetectorKind::KmrEm], 1, &opts).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].hypothesis, Hypothesis::H1);
        assert_eq!(recs[1].hypothesis, Hypothesis::H0);
        let again = run_point(&cfg, &[DetectorKind::KmrEm], 1, &opts).unwrap();
        assert_eq!(recs[0].log_statistic, again[0].log_statistic);
        assert_eq!(recs[1].log_statistic, again[1].log_statistic);
    }

    #[test]
    fn kelly_undefined_with_short_training() {
        // Q = 6 < M + 1 = 10: every kel-tr record carries the error tag.
        let cfg = tiny_config();
        let opts = EmOptions::default();
        let recs = run_point(&cfg, &[DetectorKind::KelTr], 3, &opts).unwrap();
        assert_eq!(recs.len(), 6);
        for r in &recs {
            assert!(r.error.as_deref().unwrap_or("").contains("Kelly"));
            assert!(r.log_statistic.is_none());
        }
        // Q = M + 1 works.
        let cfg = ScenarioConfig {
            q: 10,
            ..tiny_config()
        };
        let recs = run_point(&cfg, &[DetectorKind::KelTr], 3, &opts).unwrap();
        assert!(recs.iter().all(|r| r.error.is_none()));
    }

    #[test]
    fn every_detector_returns_finite_statistics_on_noise() {
        let cfg = ScenarioConfig {
            q: 6,
            ..tiny_config()
        };
        let opts = EmOptions::default();
        let recs = run_point(&cfg, &DetectorKind::ALL[1..], 2, &opts).unwrap();
        for r in &recs {
            assert!(
                r.log_statistic.is_some(),
                "{} failed: {:?}",
                r.detector,
                r.error
            );
        }
    }

    #[test]
    fn sweep_point_config_couplings() {
        let base = tiny_config();
        let sweep = SweepSpec {
            axis: SweepAxis::Q,
            values: vec![8.0],
            trials_per_point: 2,
            metric: Metric::PdAtPfa(0.1),
            per_interferer_power: false,
            couple_noise: true,
        };
        let cfg = sweep.point_config(&base, 8.0);
        assert_eq!(cfg.q, 8);
        assert_eq!(cfg.noise_var, 8.0);
        assert_eq!(cfg.interference_power, 8.0);

        let sweep = SweepSpec {
            axis: SweepAxis::NTrue,
            values: vec![2.0],
            trials_per_point: 2,
            metric: Metric::MinError,
            per_interferer_power: true,
            couple_noise: false,
        };
        let cfg = sweep.point_config(&base, 2.0);
        assert_eq!(cfg.n_true, 2);
        assert_eq!(cfg.interference_power, 12.0);

        let sweep_tau = SweepSpec {
            axis: SweepAxis::Tau,
            values: vec![0.25],
            trials_per_point: 2,
            metric: Metric::MinError,
            per_interferer_power: false,
            couple_noise: false,
        };
        assert_eq!(sweep_tau.point_config(&base, 0.25).tau_fixed, Some(0.25));
    }

    #[test]
    fn single_point_sweep_reduces_to_run_point() {
        let base = tiny_config();
        let sweep = SweepSpec {
            axis: SweepAxis::Sir,
            values: vec![6.0],
            trials_per_point: 4,
            metric: Metric::MinError,
            per_interferer_power: false,
            couple_noise: false,
        };
        let opts = EmOptions::default();
        let summary = run_sweep(&sweep, &base, &[DetectorKind::KmrTr], &opts).unwrap();
        assert_eq!(summary.rows.len(), 1);
        let recs = run_point(&base, &[DetectorKind::KmrTr], 4, &opts).unwrap();
        let h0: Vec<f64> = recs
            .iter()
            .filter(|r| r.hypothesis == Hypothesis::H0)
            .filter_map(|r| r.log_statistic)
            .collect();
        let h1: Vec<f64> = recs
            .iter()
            .filter(|r| r.hypothesis == Hypothesis::H1)
            .filter_map(|r| r.log_statistic)
            .collect();
        let (_, achieved) = calibrate_threshold(&h0, &h1, &Metric::MinError);
        assert_eq!(summary.rows[0].metric_value, Some(achieved));
    }

    #[test]
    fn kmr_em_equals_kmr_tr_when_all_training() {
        // Q = L: no data symbols, so with matched rank-selection gains the
        // EM detector coincides with the training-only baseline per trial.
        let cfg = ScenarioConfig {
            l: 16,
            q: 16,
            ..tiny_config()
        };
        let opts = EmOptions {
            gic_kmr_tr: 10.0,
            ..EmOptions::default()
        };
        let recs = run_point(&cfg, &[DetectorKind::KmrEm, DetectorKind::KmrTr], 4, &opts).unwrap();
        for pair in recs.chunks(2) {
            let em = pair[0].log_statistic.unwrap();
            let tr = pair[1].log_statistic.unwrap();
            assert!(
                (em - tr).abs() < 1e-6 * tr.abs().max(1.0),
                "kmr-em {em} vs kmr-tr {tr}"
            );
        }
    }

    #[test]
    fn all_interference_kinds_run_end_to_end() {
        use crate::sim::InterferenceKind;
        let opts = EmOptions::default();
        for kind in [
            InterferenceKind::Gauss,
            InterferenceKind::QpskUnsync,
            InterferenceKind::Sinusoid,
            InterferenceKind::Spike,
        ] {
            let cfg = ScenarioConfig {
                interference_kind: kind,
                ..tiny_config()
            };
            let recs =
                run_point(&cfg, &[DetectorKind::KmrEm, DetectorKind::McwEm], 2, &opts).unwrap();
            for r in &recs {
                assert!(
                    r.log_statistic.is_some(),
                    "{:?}/{}: {:?}",
                    kind,
                    r.detector,
                    r.error
                );
            }
        }
    }

    #[test]
    fn paired_h0_statistics_match_where_mathematically_forced() {
        // With Q = L (all symbols known) and no interference, kel-tr and
        // kel-em compute the same Kelly statistic from the same columns.
        let cfg = ScenarioConfig {
            l: 12,
            q: 12,
            n_true: 0,
            interference_power: 0.0,
            noise_var: 2.0,
            ..tiny_config()
        };
        let opts = EmOptions::default();
        let recs = run_point(&cfg, &[DetectorKind::KelTr, DetectorKind::KelEm], 4, &opts).unwrap();
        for pair in recs.chunks(2).filter(|p| p[0].hypothesis == Hypothesis::H0) {
            let tr = pair[0].log_statistic.unwrap();
            let em = pair[1].log_statistic.unwrap();
            assert!((tr - em).abs() < 1e-8 * tr.abs().max(1.0), "{tr} vs {em}");
        }
    }
}
