//! Command-line front end for the cavity solvers: runs one command, writes
//! its CSV files and a `manifest.json` describing them.

pub mod args;
pub mod commands;
pub mod compare;
pub mod error;
pub mod manifest;
pub mod sweep;

pub use error::{CliError, CliResult};

/// Scientific notation with 17 significant digits; `-0` prints as `0`.
pub fn num(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

/// Like [`num`], empty for a missing value.
pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
