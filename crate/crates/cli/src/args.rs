use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cavity", version, about = "Vacuum field in a 1D cavity with oscillating mirrors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TimeGrid {
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    /// End of the window; defaults to `10 lambda`.
    #[arg(long)]
    pub t1: Option<f64>,
    /// Number of intervals; the grid has `steps + 1` points.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
}

impl TimeGrid {
    pub fn points(&self, lambda: f64) -> Vec<f64> {
        let t1 = self.t1.unwrap_or(10.0 * lambda);
        if self.steps == 0 {
            return vec![self.t0];
        }
        (0..=self.steps)
            .map(|i| if i == self.steps { t1 } else { self.t0 + (t1 - self.t0) * i as f64 / self.steps as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Exact,
    Pert,
    /// RG closed form where one exists, the series otherwise.
    Rg,
    Series,
}

impl BackendArg {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendArg::Exact => "exact",
            BackendArg::Pert => "pert",
            BackendArg::Rg => "rg",
            BackendArg::Series => "series",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phase functions on a time grid (`gf.csv`).
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: TimeGrid,
        #[arg(long, value_enum, default_value_t = BackendArg::Exact)]
        backend: BackendArg,
    },
    /// Energy profile at `t1` (`profile.csv`) and total energy over the grid (`energy.csv`).
    Energy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: TimeGrid,
        /// Points in the profile.
        #[arg(long, default_value_t = 512)]
        points: usize,
        #[arg(long, value_enum, default_value_t = BackendArg::Exact)]
        backend: BackendArg,
    },
    /// Photon numbers per mode after the mirrors stop (`spectrum.csv`).
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Overrides `stop_time` from the configuration.
        #[arg(long)]
        stop_time: Option<f64>,
        #[arg(long, default_value_t = 8)]
        m_max: u32,
        /// Final modes summed before the tail estimate.
        #[arg(long, default_value_t = 2000)]
        cutoff: u32,
        #[arg(long, value_enum, default_value_t = BackendArg::Exact)]
        backend: BackendArg,
    },
    /// Exact, perturbative and RG phase functions side by side (`compare.csv`).
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: TimeGrid,
    },
    /// Regime, growth exponent and `N_1` over a parameter grid (`sweep.csv`).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = BackendArg::Exact)]
        backend: BackendArg,
    },
}
