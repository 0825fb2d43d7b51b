use thiserror::Error;

/// Crate-wide error type. Variants mirror the failure modes of the detector
/// contracts; the harness records them per trial instead of aborting a batch.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precision xi must be positive and finite, got {0}")]
    InvalidPrecision(f64),
    #[error("signal vector is zero")]
    ZeroSignal,
    #[error("Kelly statistic undefined: {0}")]
    KellyUndefined(String),
    #[error("invalid interference rank {n} for M={m}, L={l}")]
    InvalidRank { n: usize, m: usize, l: usize },
    #[error("noise variance estimate is degenerate ({0})")]
    DegenerateNoise(f64),
    #[error("estimated interference covariance is singular")]
    SingularCovariance,
    #[error("whitened matched-filter precision is not positive ({0})")]
    NonPositivePrecision(f64),
    #[error(
        "posterior second moment equals the squared mean; deterministic-interference EM undefined"
    )]
    DegenerateZeta,
    #[error("eigenvalue spectrum is identically zero")]
    DegenerateSpectrum,
    #[error("training data degenerate: {0}")]
    DegenerateTraining(String),
    #[error("found only {found} sidelobes, need {requested}")]
    InsufficientSidelobes { found: usize, requested: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
