use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{operation} is not supported for the {schedule} schedule")]
    Unsupported {
        operation: &'static str,
        schedule: String,
    },

    /// The tail integral of a non-annealed schedule does not converge.
    #[error("tail integral diverges for the {schedule} schedule")]
    Divergent { schedule: String },

    #[error("quadrature did not converge (estimate {estimate}, error {error_estimate})")]
    QuadratureFailed { estimate: f64, error_estimate: f64 },

    #[error("bracket [{lo}, {hi}] does not straddle a root (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    BracketViolation {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("root finding stopped after {iterations} iterations with bracket [{lo}, {hi}]")]
    RootFailed { lo: f64, hi: f64, iterations: usize },

    #[error("stepsize never drops below 1/(2 beta) before the end of training")]
    NoValidSuffix,

    #[error("stepsize {eta} at step {step} exceeds 1/(2 beta) = {limit}")]
    StepsizeTooLarge { step: usize, eta: f64, limit: f64 },

    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("malformed config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed dataset: {0}")]
    Dataset(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "[0, 1]",
        })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "(0, inf)",
        })
    }
}
