use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time grid needs at least 2 samples, got {0}")]
    GridTooSmall(usize),
    #[error("invalid warp: {0}")]
    InvalidWarp(String),
    #[error("grid mismatch: {left} vs {right} samples")]
    GridMismatch { left: usize, right: usize },
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("space mismatch: {left} vs {right}")]
    SpaceMismatch { left: String, right: String },
    #[error("unsupported space for this operation: {0}")]
    UnsupportedSpace(String),
    #[error("interpolation parameter {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("roughness {0} outside (0, 1)")]
    RoughnessOutOfRange(f64),
    #[error("rotation angle {theta} too close to pi, logarithm is ambiguous")]
    AngleNearPi { theta: f64 },
    #[error("signal has {0} samples, at least 2 required")]
    SignalTooShort(usize),
    #[error("signal has zero total length")]
    DegenerateSignal,
    #[error("delta step {step} too large for signal of length {len}")]
    StepTooLarge { step: usize, len: usize },
    #[error("template set is empty")]
    EmptyTemplateSet,
    #[error("integral of the inverse weight is numerically singular")]
    SingularWeightIntegral,
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("coupling matrix violates the integrability condition (max asymmetry {0:e})")]
    AsymmetricCoupling(f64),
    #[error("boundary mismatch: {0}")]
    BoundaryMismatch(String),
    #[error("ill-conditioned system (condition number {0:e})")]
    IllConditioned(f64),
    #[error("quadratic coefficient c vanishes at sample {0}")]
    ZeroQuadraticCoefficient(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("timestamps not strictly increasing at line {0}")]
    NonMonotoneTime(usize),
    #[error("bad rotation at line {line}: {message}")]
    BadRotation { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
