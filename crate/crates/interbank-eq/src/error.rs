use thiserror::Error;

use crate::model::Violation;

/// Everything a solver, bound or simulator can refuse to do.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("density level {level} exceeds f(0) = {f0}; no preimage")]
    NoPreimage { level: f64, f0: f64 },

    #[error("r = 0 makes liquidity free, optimal cash reserves are unbounded")]
    InfiniteCash,

    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence {
        what: String,
        iterations: usize,
        /// Last iterate, when there is a meaningful one.
        last: Option<Vec<f64>>,
    },

    #[error("bank {bank}: gamma = {gamma} unsupported here (logarithmic utility required)")]
    UnsupportedUtility { bank: usize, gamma: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("bound not active: {0}")]
    BoundNotActive(String),

    #[error("welfare ratio ill-defined: denominator {denominator} <= 0")]
    IllDefinedRatio { denominator: f64 },

    #[error("no sign change on [{a}, {b}]: f(a) = {fa}, f(b) = {fb}")]
    NoBracket { a: f64, b: f64, fa: f64, fb: f64 },

    #[error("invariant breached: {0}")]
    InvariantBreach(String),

    #[error("bank {bank}: replication requirement degenerates to eta = 1")]
    DegenerateRequirement { bank: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("invalid system: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
