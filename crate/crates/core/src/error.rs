use thiserror::Error;

use crate::trajectories::Violation;

/// Errors raised by the solvers, quadratures and spectra.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid cavity configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("root bracketing failed for target {target} on [{lo}, {hi}]")]
    Bracket { target: f64, lo: f64, hi: f64 },

    #[error("argument {arg} lies on a singular light-cone ray at {ray}")]
    SingularRay { arg: f64, ray: f64 },

    #[error("position x = {x} outside the cavity [{left}, {right}] at t = {t}")]
    Domain { x: f64, t: f64, left: f64, right: f64 },

    #[error("backend {backend} cannot serve regime {regime}")]
    RegimeMismatch { backend: &'static str, regime: &'static str },

    #[error("series not converged: |Y| = {ratio}, tail bound {tail:e} at truncation {truncation}")]
    SeriesNotConverged { ratio: f64, tail: f64, truncation: usize },

    #[error("mode index {index} beyond truncation {truncation}")]
    TruncationTooSmall { index: usize, truncation: usize },

    #[error("stop time {stop} is not on the stop grid of the motion family")]
    OffGridStop { stop: f64 },

    #[error("solution has not been extended past the stop time")]
    NotExtended,

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("not implemented for this branch: {0}")]
    Unsupported(&'static str),

    #[error("outside the validity window: {0}")]
    Validity(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
