//! Error types for the crate, one enum per subsystem.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("complex dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("sites per axis must be even and at least 4, got {0}")]
    BadSiteCount(usize),
    #[error("side length must be positive and finite, got {0}")]
    BadSideLength(f64),
    #[error("form degree {degree} out of range for operation (max {max})")]
    DegreeOutOfRange { degree: usize, max: usize },
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("rank must be 1 or 2, got {0}")]
    BadRank(usize),
    #[error("nonzero degree is only supported for rank 1 on a complex 1-torus (got rank {rank}, m {m}, degree {degree})")]
    UnsupportedTopology { rank: usize, m: usize, degree: i64 },
    #[error("gauge transform is singular at site {site}")]
    SingularGauge { site: usize },
    #[error("gauge transform must be unitary, or positive real scalar in rank 1")]
    UnsupportedGauge,
    #[error("theta series truncation {truncation} too small: tail estimate {tail:.3e} exceeds 1e-12")]
    TruncationTooSmall { truncation: usize, tail: f64 },
    #[error("theta section requires rank 1, m = 1 and degree >= 1")]
    ThetaUnsupported,
    #[error("band limit {band_limit} exceeds N/4 = {max}")]
    BandLimitTooLarge { band_limit: usize, max: usize },
}

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("tau must be positive, got {0}")]
    TauNotPositive(f64),
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("non-finite values after step in {monitor}")]
    Unstable { monitor: &'static str },
    #[error("time step underflow (dt = {dt:.3e} < {floor:.3e}) at t = {t}; last good state retained")]
    TimeStepUnderflow { dt: f64, floor: f64, t: f64 },
    #[error("state is not holomorphic enough for the vortex-functional gradient: {residual:.3e} > threshold {threshold:.3e}")]
    HolomorphyThreshold { residual: f64, threshold: f64 },
    #[error("metric flow requires rank 1 on a complex 1-torus")]
    MetricFlowUnsupported,
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("finite-difference step must lie in [1e-7, 1e-3], got {0}")]
    BadFdStep(f64),
    #[error("coordinate sample must be nonempty")]
    EmptySample,
    #[error("tau = {tau} is not strictly above the Bradlow threshold {threshold} (compatibility integral cannot vanish)")]
    Infeasible { tau: f64, threshold: f64 },
    #[error("Newton iteration failed to converge in {iterations} iterations; residual history: {history:?}")]
    NoConvergence { iterations: usize, history: Vec<f64> },
    #[error("stationary solver requires rank 1, m = 1 and a nonvanishing Higgs seed")]
    Unsupported,
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: invalid value `{value}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("numerical divergence: {0}")]
    Divergence(String),
    #[error("infeasible tau: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Other(String),
}
