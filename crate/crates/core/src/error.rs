use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("density matrix invariant violated: {0}")]
    InvalidState(String),

    /// tr[Ω ρ Ω†] vanished, the measurement increment is inconsistent with the state.
    #[error("vanishing Kraus normalization (trace = {trace:e})")]
    VanishingNorm { trace: f64 },

    #[error("state lost positivity (minimum eigenvalue {min_eigenvalue:e})")]
    NegativeEigenvalue { min_eigenvalue: f64 },

    #[error("polar coordinates are degenerate at r = {r:e}")]
    DegenerateRadius { r: f64 },

    #[error("continued fraction denominator vanished at partial quotient {index}")]
    ZeroDenominator { index: usize },

    #[error("continued fraction for S_{m} not converged (|Δ| = {delta:e})")]
    NotConverged { m: usize, delta: f64 },

    #[error("spectral evolution unstable at step {step} (|c| = {magnitude:e})")]
    Unstable { step: usize, magnitude: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_step(step: usize, source: Error) -> Self {
        Error::StepFailed {
            step,
            source: Box::new(source),
        }
    }

    /// Strips any `StepFailed` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::StepFailed { source, .. } => source.root(),
            other => other,
        }
    }
}
