//! Parameter sweeps. A sweep file holds a base configuration, value lists
//! for the swept parameters and the run settings:
//!
//! ```toml
//! [base]
//! lambda = 1.0
//! epsilon = 0.01
//! amp_left = 1.0
//! amp_right = 1.0
//! q = 2
//! phi = 0.0
//!
//! [grid]
//! phi = [0.0, 1.0, 2.0]
//!
//! [run]
//! fit_window = [10.0, 20.0]
//! stop_time = 40.0
//! ```
//!
//! Grid points are the cartesian product in the order epsilon, q, phi,
//! amp_left, amp_right (last one fastest). An axis left out keeps the base
//! value; an empty list gives an empty grid.

use std::fmt::Write as _;
use std::path::Path;

use cavity::energy::{growth_fit, static_density, total_energy, GrowthFit};
use cavity::photons::photon_number;
use cavity::{CavityConfig, FieldSolution, RegimeClass, ResonanceParams};
use serde::{Deserialize, Serialize};

use crate::args::BackendArg;
use crate::commands::build_solution;
use crate::error::{CliError, CliResult};
use crate::{num, opt_num};

pub const HEADER: &str = "index,epsilon,q,phi,amp_left,amp_right,a,b,regime,growth_model,growth_exponent,growth_r2,n1,error";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxes {
    pub epsilon: Option<Vec<f64>>,
    pub q: Option<Vec<u32>>,
    pub phi: Option<Vec<f64>>,
    pub amp_left: Option<Vec<f64>>,
    pub amp_right: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    /// Time window of the total-energy growth fit.
    #[serde(default = "default_fit_window")]
    pub fit_window: [f64; 2],
    #[serde(default = "default_fit_samples")]
    pub fit_samples: usize,
    /// Stop time for `N_1`; no photon number without it.
    pub stop_time: Option<f64>,
    #[serde(default = "default_cutoff")]
    pub cutoff: u32,
}

fn default_fit_window() -> [f64; 2] {
    [10.0, 20.0]
}
fn default_fit_samples() -> usize {
    21
}
fn default_cutoff() -> u32 {
    1000
}

impl Default for RunSettings {
    fn default() -> Self {
        Self { fit_window: default_fit_window(), fit_samples: default_fit_samples(), stop_time: None, cutoff: default_cutoff() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: CavityConfig,
    #[serde(default)]
    pub grid: GridAxes,
    #[serde(default)]
    pub run: RunSettings,
}

impl SweepSpec {
    pub fn from_toml_str(s: &str) -> CliResult<Self> {
        let spec: Self = toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        let [t0, t1] = spec.run.fit_window;
        if !(t0.is_finite() && t1 > t0) || spec.run.fit_samples < 8 {
            return Err(CliError::Config("fit_window must be increasing and fit_samples at least 8".into()));
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Every grid point, in output order.
    pub fn points(&self) -> Vec<GridPoint> {
        let b = &self.base;
        let g = &self.grid;
        let eps = g.epsilon.clone().unwrap_or_else(|| vec![b.epsilon]);
        let qs = g.q.clone().unwrap_or_else(|| vec![b.q]);
        let phis = g.phi.clone().unwrap_or_else(|| vec![b.phi]);
        let lefts = g.amp_left.clone().unwrap_or_else(|| vec![b.amp_left]);
        let rights = g.amp_right.clone().unwrap_or_else(|| vec![b.amp_right]);
        let mut out = Vec::new();
        for &epsilon in &eps {
            for &q in &qs {
                for &phi in &phis {
                    for &amp_left in &lefts {
                        for &amp_right in &rights {
                            let config = CavityConfig { epsilon, q, phi, amp_left, amp_right, ..*b };
                            out.push(GridPoint { index: out.len(), config });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub config: CavityConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: GridPoint,
    pub params: ResonanceParams,
    pub regime: RegimeClass,
    pub growth: Option<GrowthFit>,
    pub n1: Option<f64>,
    pub error: Option<String>,
}

/// Growth fit of the total energy above its static value.
fn fit_growth(sol: &FieldSolution, run: &RunSettings) -> cavity::Result<GrowthFit> {
    let [t0, t1] = run.fit_window;
    let n = run.fit_samples;
    let lam = sol.config().lambda;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
        samples.push((t, total_energy(sol, t)?.value));
    }
    growth_fit(&samples, static_density(lam) * lam)
}

pub fn evaluate(point: &GridPoint, run: &RunSettings, backend: BackendArg, parallel: bool) -> SweepRow {
    let cfg = point.config;
    let mut row = SweepRow {
        point: *point,
        params: cfg.resonance_params(),
        regime: cfg.regime(),
        growth: None,
        n1: None,
        error: None,
    };
    let mut errors = Vec::new();
    match build_solution(&CavityConfig { stop_time: None, ..cfg }, backend) {
        Ok(sol) => {
            // nothing grows without resonance, so there is nothing to fit
            if row.regime != RegimeClass::NoRadiation {
                match fit_growth(&sol, run) {
                    Ok(g) => row.growth = Some(g),
                    Err(e) => errors.push(format!("growth: {e}")),
                }
            }
            if let Some(stop) = run.stop_time {
                match sol.extend_post_stop(stop).and_then(|s| photon_number(&s, 1, run.cutoff, parallel)) {
                    Ok(m) => row.n1 = Some(m.value),
                    Err(e) => errors.push(format!("n1: {e}")),
                }
            }
        }
        Err(e) => errors.push(e.to_string()),
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}

/// Rows sorted by grid index, whatever order they were computed in.
pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.point.index);
    let mut s = String::from(HEADER);
    s.push('\n');
    for r in sorted {
        let c = &r.point.config;
        let (model, rate, r2) = match r.growth {
            Some(g) => (serde_json::to_value(g.model).expect("enum").as_str().unwrap_or_default().to_string(), Some(g.rate), Some(g.r_squared)),
            None => (String::new(), None, None),
        };
        // commas and quotes would break the column layout
        let error = r.error.as_deref().unwrap_or_default().replace([',', '"', '\n'], " ");
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.point.index,
            num(c.epsilon),
            c.q,
            num(c.phi),
            num(c.amp_left),
            num(c.amp_right),
            num(r.params.a),
            num(r.params.b),
            r.regime,
            model,
            opt_num(rate),
            opt_num(r2),
            opt_num(r.n1),
            error,
        )
        .expect("write to string");
    }
    s
}
