//! Side-by-side exact, perturbative and RG phase functions, and the
//! tolerance bands the comparison is held to.
//!
//! Bands, on `G` only:
//! - short window `t <= 0.05 / (q max(|a|, |b|))`: every pair of backends
//!   agrees within `5 eps^2` (plus a `1e-12` rounding floor);
//! - after it: the mean `|G_rg - G_exact|` stays below `0.1 / q`, a tenth of
//!   one staircase step. A mean is used because a jump placed slightly early
//!   or late gives a pointwise gap of a whole step.

use std::fmt::Write as _;

use cavity::exec::par_map;
use cavity::{CavityConfig, FieldSolution};
use serde::Serialize;

use crate::error::CliResult;
use crate::num;

pub const SHORT_WINDOW_QAT: f64 = 0.05;
pub const SHORT_BAND_EPS2: f64 = 5.0;
pub const TRACK_BAND_STEPS: f64 = 0.1;
pub const ROUNDING_FLOOR: f64 = 1e-12;

pub const HEADER: &str = "t,g_exact,f_exact,g_pert,f_pert,g_rg,f_rg,\
dg_pert_exact,df_pert_exact,dg_rg_exact,df_rg_exact,dg_rg_pert,df_rg_pert";

/// `(G, F)` per backend, in the order exact, perturbative, RG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub t: f64,
    pub g: [f64; 3],
    pub f: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandReport {
    /// End of the short window; `None` when nothing grows.
    pub short_window_end: Option<f64>,
    pub short_band: f64,
    pub short_max_deviation: f64,
    pub short_ok: bool,
    pub track_band: f64,
    /// Mean `|G_rg - G_exact|` after the short window.
    pub track_mean_rg: Option<f64>,
    /// Mean `|G_pert - G_exact|` after the short window, for reference.
    pub track_mean_pert: Option<f64>,
    pub track_ok: bool,
}

impl BandReport {
    pub fn ok(&self) -> bool {
        self.short_ok && self.track_ok
    }
}

pub fn short_window_end(cfg: &CavityConfig) -> Option<f64> {
    let p = cfg.resonance_params();
    let rate = cfg.q as f64 * p.a.abs().max(p.b.abs());
    (rate > 0.0).then(|| SHORT_WINDOW_QAT / rate)
}

pub fn compare_rows(sols: &[FieldSolution; 3], times: &[f64], parallel: bool) -> CliResult<Vec<CompareRow>> {
    let rows = par_map(times, parallel, |&t| -> cavity::Result<CompareRow> {
        let mut row = CompareRow { t, g: [0.0; 3], f: [0.0; 3] };
        for (i, s) in sols.iter().enumerate() {
            (row.g[i], row.f[i]) = s.eval_gf(t)?;
        }
        Ok(row)
    });
    Ok(rows.into_iter().collect::<cavity::Result<Vec<_>>>()?)
}

pub fn bands(cfg: &CavityConfig, rows: &[CompareRow]) -> BandReport {
    let end = short_window_end(cfg);
    let short_band = SHORT_BAND_EPS2 * cfg.epsilon * cfg.epsilon + ROUNDING_FLOOR;
    let mut short_max = 0.0f64;
    let (mut rg_sum, mut pert_sum, mut n_long) = (0.0, 0.0, 0usize);
    for r in rows {
        if end.is_none_or(|e| r.t <= e) {
            let [e, p, g] = r.g;
            short_max = short_max.max((p - e).abs()).max((g - e).abs()).max((g - p).abs());
        } else {
            rg_sum += (r.g[2] - r.g[0]).abs();
            pert_sum += (r.g[1] - r.g[0]).abs();
            n_long += 1;
        }
    }
    let track_band = TRACK_BAND_STEPS / cfg.q as f64;
    let track_mean_rg = (n_long > 0).then(|| rg_sum / n_long as f64);
    BandReport {
        short_window_end: end,
        short_band,
        short_max_deviation: short_max,
        short_ok: short_max <= short_band,
        track_band,
        track_mean_rg,
        track_mean_pert: (n_long > 0).then(|| pert_sum / n_long as f64),
        track_ok: track_mean_rg.is_none_or(|m| m <= track_band),
    }
}

pub fn to_csv(rows: &[CompareRow]) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for r in rows {
        let [ge, gp, gr] = r.g;
        let [fe, fp, fr] = r.f;
        let cols = [r.t, ge, fe, gp, fp, gr, fr, gp - ge, fp - fe, gr - ge, fr - fe, gr - gp, fr - fp];
        let line: Vec<String> = cols.iter().map(|&x| num(x)).collect();
        writeln!(s, "{}", line.join(",")).expect("write to string");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sols(cfg: CavityConfig) -> [FieldSolution; 3] {
        [
            FieldSolution::exact(cfg).unwrap(),
            FieldSolution::perturbative(cfg).unwrap(),
            FieldSolution::auto_rg(cfg).unwrap(),
        ]
    }

    #[test]
    fn static_columns_identical() {
        let cfg = CavityConfig::static_cavity(1.0);
        let times: Vec<f64> = (0..50).map(|i| 0.37 * i as f64).collect();
        let rows = compare_rows(&sols(cfg), &times, false).unwrap();
        for r in &rows {
            assert!((r.g[0] - r.g[1]).abs() < 1e-12 && (r.g[2] - r.g[1]).abs() < 1e-12);
            assert!((r.f[0] - r.f[1]).abs() < 1e-12 && (r.f[2] - r.f[1]).abs() < 1e-12);
        }
        let b = bands(&cfg, &rows);
        assert!(b.ok() && b.short_window_end.is_none() && b.track_mean_rg.is_none());
    }

    #[test]
    fn short_window_agrees_and_long_window_tracks() {
        let cfg = CavityConfig::two_mirror(1.0, 0.01, 1.0, 1.0, 3, 0.0);
        let times: Vec<f64> = (0..=800).map(|i| 40.0 * i as f64 / 800.0).collect();
        let rows = compare_rows(&sols(cfg), &times, false).unwrap();
        let b = bands(&cfg, &rows);
        assert!(b.ok(), "{b:?}");
        // first-order theory drifts far beyond the RG deviation
        assert!(b.track_mean_pert.unwrap() > 20.0 * b.track_mean_rg.unwrap(), "{b:?}");
    }

    #[test]
    fn csv_has_one_line_per_time() {
        let cfg = CavityConfig::two_mirror(1.0, 0.01, 1.0, 1.0, 3, 0.0);
        let rows = compare_rows(&sols(cfg), &[0.0, 0.5, 1.5], false).unwrap();
        let csv = to_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 13);
    }
}
