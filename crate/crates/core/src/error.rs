use thiserror::Error;

/// Errors raised by the solver, the kernels and the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid market parameter {name} = {value}: {reason}")]
    InvalidMarket {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("one of mu or theta must be given")]
    MissingSharpe,

    #[error("inconsistent market: theta = {theta} but (mu - r)/sigma = {implied}")]
    InconsistentSharpe { theta: f64, implied: f64 },

    #[error("invalid argument {name} = {value}: {reason}")]
    InvalidArgument {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error_bound:e}")]
    QuadratureNonConvergence { estimate: f64, error_bound: f64 },

    #[error("could not bracket the root after {expansions} expansions; last bracket [{lo:e}, {hi:e}]")]
    Bracket { lo: f64, hi: f64, expansions: usize },

    #[error("root search stalled in bracket [{lo:e}, {hi:e}]")]
    RootNonConvergence { lo: f64, hi: f64 },

    #[error("non-finite value {value} while evaluating at y = {y:e}")]
    NonFinite { y: f64, value: f64 },

    #[error("infinite-horizon integral diverges: lambda({exponent}) = {lambda} is not negative")]
    DivergentHorizon { exponent: f64, lambda: f64 },

    #[error("asymptotic exponent at {end} is not declared")]
    UndeclaredExponent { end: &'static str },

    #[error("{0} is undefined for the zero dual utility")]
    ZeroDual(&'static str),

    #[error("both dual utilities are zero")]
    DegenerateProblem,

    #[error("invalid utility spec {spec:?}: {reason}")]
    UtilitySpec { spec: String, reason: String },

    #[error("|A| = {0} exceeds the overflow guard 20")]
    Overflow(f64),

    #[error("{0}")]
    Undefined(&'static str),

    #[error("unknown table id {0}, expected 1..=5")]
    UnknownTable(u32),

    #[error("line {line}: {message}")]
    Config { line: usize, message: String },
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonConvergence { .. }
                | Error::Bracket { .. }
                | Error::RootNonConvergence { .. }
                | Error::NonFinite { .. }
                | Error::DivergentHorizon { .. }
                | Error::Overflow(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
