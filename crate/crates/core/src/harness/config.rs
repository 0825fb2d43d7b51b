//! Flat key-value run configuration: `section.key = value` lines with `#`
//! comments. Unknown keys are rejected so typos cannot silently fall back
//! to defaults.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::harness::{DetectorKind, EmOptions, Metric, SweepAxis, SweepSpec};
use crate::priors::{bpsk_alphabet, qpsk_alphabet};
use crate::sim::{InterferenceKind, ScenarioConfig};

/// Everything a harness invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub detectors: Vec<DetectorKind>,
    pub em: EmOptions,
    pub sweep: SweepSpec,
    pub alphabet_name: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioConfig::default(),
            detectors: vec![
                DetectorKind::KmrTr,
                DetectorKind::McwTr,
                DetectorKind::KmrEm,
                DetectorKind::McwEm,
            ],
            em: EmOptions::default(),
            sweep: SweepSpec {
                axis: SweepAxis::Snr,
                values: vec![16.0, 32.0, 64.0],
                trials_per_point: 100,
                metric: Metric::PdAtPfa(0.01),
                per_interferer_power: false,
                couple_noise: true,
            },
            alphabet_name: "qpsk".into(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "key '{key}': expected bool, got '{value}'"
        ))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_num::<f64>(key, v.trim()))
        .collect()
}

pub fn alphabet_by_name(name: &str) -> Result<Vec<C64>> {
    match name {
        "qpsk" => Ok(qpsk_alphabet()),
        "bpsk" => Ok(bpsk_alphabet()),
        _ => Err(Error::Config(format!(
            "unknown alphabet '{name}' (expected qpsk or bpsk)"
        ))),
    }
}

/// Parse the flat config text. Unset keys keep their defaults; unknown keys
/// are an error. A `pfa` given without a metric key applies to the default
/// `pd_at_pfa` metric.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut pfa = 0.01_f64;
    let mut metric_name = String::from("pd_at_pfa");
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "scenario.m" => cfg.scenario.m = parse_num(key, value)?,
            "scenario.l" => cfg.scenario.l = parse_num(key, value)?,
            "scenario.q" => cfg.scenario.q = parse_num(key, value)?,
            "scenario.n_true" => cfg.scenario.n_true = parse_num(key, value)?,
            "scenario.noise_var" => cfg.scenario.noise_var = parse_num(key, value)?,
            "scenario.interference_power" => {
                cfg.scenario.interference_power = parse_num(key, value)?
            }
            "scenario.interference_kind" => {
                cfg.scenario.interference_kind = match value {
                    "gauss" => InterferenceKind::Gauss,
                    "qpsk_unsync" => InterferenceKind::QpskUnsync,
                    "sinusoid" => InterferenceKind::Sinusoid,
                    "spike" => InterferenceKind::Spike,
                    _ => {
                        return Err(Error::Config(format!(
                            "unknown interference kind '{value}'"
                        )))
                    }
                }
            }
            "scenario.alphabet" => {
                cfg.scenario.alphabet = alphabet_by_name(value)?;
                cfg.alphabet_name = value.to_string();
            }
            "scenario.oversample" => cfg.scenario.oversample = parse_num(key, value)?,
            "scenario.rolloff" => cfg.scenario.rolloff = parse_num(key, value)?,
            "scenario.fo_t_min" => cfg.scenario.fo_t_range.0 = parse_num(key, value)?,
            "scenario.fo_t_max" => cfg.scenario.fo_t_range.1 = parse_num(key, value)?,
            "scenario.tau_fixed" => {
                cfg.scenario.tau_fixed = if value.is_empty() {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "scenario.seed" => cfg.scenario.seed = parse_num(key, value)?,
            "detector.list" => {
                cfg.detectors = value
                    .split(',')
                    .map(DetectorKind::parse)
                    .collect::<Result<Vec<_>>>()?;
            }
            "detector.max_iters" => cfg.em.max_iters = parse_num(key, value)?,
            "detector.rel_tol" => cfg.em.rel_tol = parse_num(key, value)?,
            "detector.fast_eig" => cfg.em.fast_eig = parse_bool(key, value)?,
            "detector.n_max" => {
                cfg.em.n_max = if value.is_empty() {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "detector.freeze_rank" => cfg.em.freeze_rank = parse_bool(key, value)?,
            "detector.gic_kmr_em" => cfg.em.gic_kmr_em = parse_num(key, value)?,
            "detector.gic_mcw_em" => cfg.em.gic_mcw_em = parse_num(key, value)?,
            "detector.gic_kmr_tr" => cfg.em.gic_kmr_tr = parse_num(key, value)?,
            "detector.gic_mcw_tr" => cfg.em.gic_mcw_tr = parse_num(key, value)?,
            "detector.alpha_grid" => cfg.em.alpha_grid = parse_list(key, value)?,
            "sweep.axis" => {
                cfg.sweep.axis = match value {
                    "q" => SweepAxis::Q,
                    "snr" => SweepAxis::Snr,
                    "sir" => SweepAxis::Sir,
                    "n" => SweepAxis::NTrue,
                    "tau" => SweepAxis::Tau,
                    _ => return Err(Error::Config(format!("unknown sweep axis '{value}'"))),
                }
            }
            "sweep.values" => cfg.sweep.values = parse_list(key, value)?,
            "sweep.trials" => cfg.sweep.trials_per_point = parse_num(key, value)?,
            "sweep.metric" => metric_name = value.to_string(),
            "sweep.pfa" => pfa = parse_num(key, value)?,
            "sweep.per_interferer_power" => {
                cfg.sweep.per_interferer_power = parse_bool(key, value)?
            }
            "sweep.couple_noise" => cfg.sweep.couple_noise = parse_bool(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
    }
    cfg.sweep.metric = match metric_name.as_str() {
        "pd_at_pfa" => Metric::PdAtPfa(pfa),
        "min_error" => Metric::MinError,
        other => return Err(Error::Config(format!("unknown metric '{other}'"))),
    };
    cfg.sweep.metric.validate()?;
    cfg.scenario.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "
# demo2-style sweep at desk scale
scenario.m = 16
scenario.l = 256
scenario.q = 8
scenario.n_true = 3
scenario.interference_kind = gauss
scenario.seed = 99
detector.list = kmr-em, mcw-em, kmr-tr
detector.fast_eig = true
sweep.axis = snr
sweep.values = 4, 8, 16
sweep.trials = 50
sweep.metric = pd_at_pfa
sweep.pfa = 0.01
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.scenario.m, 16);
        assert_eq!(cfg.scenario.seed, 99);
        assert_eq!(cfg.detectors.len(), 3);
        assert_eq!(cfg.sweep.values, vec![4.0, 8.0, 16.0]);
        assert_eq!(cfg.sweep.metric, Metric::PdAtPfa(0.01));
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = parse_config("scenario.mm = 4").unwrap_err();
        assert!(err.to_string().contains("unknown config key"));
        assert!(parse_config("scenario.m == 4").is_err());
        assert!(parse_config("sweep.metric = auc").is_err());
    }

    #[test]
    fn defaults_are_valid() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.scenario.m, 64);
        assert!(cfg.sweep.validate().is_ok());
    }
}
