//! Renormalization-group improved phase functions.
//!
//! The renormalized Fourier coefficients of the zeroth-order solution are all
//! generated by one complex ratio
//!
//! ```text
//! Y(t) = tanh(q a t) (1 - i b/a) / (1 + i s (b/a) tanh(q a t)),   s = (-1)^(q+1)
//! ```
//!
//! with `A_qj - i B_qj = 2 Y^j / (pi q j)`. The closed forms for `b = 0` and
//! `a = 0` are the resummed series; the general backend sums it term by term.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jet::{CJet, Jet};
use crate::perturbative::phase_decompose;
use crate::trajectories::{parity_sign, CavityConfig, ResonanceParams};

/// Below this value of `|a| q t` the `a -> 0` limit formulas are used.
pub const SMALL_A_SWITCH: f64 = 1e-8;
/// Series truncation target.
pub const SERIES_TOL: f64 = 1e-12;
/// Beyond this `|Y|` the series is too slow and the closed forms are required.
pub const SERIES_MAX_RATIO: f64 = 0.999;

/// Renormalized coefficients at reference time `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub tau: f64,
    pub q: u32,
    pub c: f64,
    /// Mode-zero bookkeeping entries.
    pub a0: f64,
    pub b0: f64,
    /// `m -> (A_m, B_m)` for `m = q j <= truncation`.
    pub entries: BTreeMap<usize, (f64, f64)>,
    pub truncation: usize,
}

impl CoefficientTable {
    pub fn get(&self, m: usize) -> Result<(f64, f64)> {
        if m > self.truncation {
            return Err(Error::TruncationTooSmall { index: m, truncation: self.truncation });
        }
        Ok(self.entries.get(&m).copied().unwrap_or((0.0, 0.0)))
    }
}

/// `(tanh(q a tau), (b/a) tanh(q a tau))` with the small-`a` limit.
fn tanh_pair(p: &ResonanceParams, q: f64, tau: f64) -> (f64, f64) {
    if (p.a * q * tau).abs() < SMALL_A_SWITCH {
        (q * p.a * tau, q * p.b * tau)
    } else {
        let h = (q * p.a * tau).tanh();
        (h, p.b / p.a * h)
    }
}

fn ratio_y(p: &ResonanceParams, q: u32, tau: f64) -> Complex64 {
    let s = parity_sign(q);
    let (h, rh) = tanh_pair(p, q as f64, tau);
    Complex64::new(h, -rh) / Complex64::new(1.0, s * rh)
}

/// Large-time limit of `Y`; jumps of the staircase sit where `Y e^{-i theta} = 1`.
fn ratio_y_limit(p: &ResonanceParams, q: u32, zero_tol: f64) -> Option<Complex64> {
    let s = parity_sign(q);
    if p.a.abs() < zero_tol {
        if p.b.abs() < zero_tol {
            return None;
        }
        return Some(Complex64::new(-s, 0.0));
    }
    let sg = p.a.signum();
    let r = p.b / p.a;
    Some(sg * Complex64::new(1.0, -r) / Complex64::new(1.0, s * r * sg))
}

pub fn rg_coefficients(cfg: &CavityConfig, tau: f64, truncation: usize) -> CoefficientTable {
    let p = cfg.resonance_params();
    let q = cfg.q;
    let qf = q as f64;
    let s = parity_sign(q);
    let lam = cfg.lambda;
    let (h, rh) = tanh_pair(&p, qf, tau);
    let y = ratio_y(&p, q, tau);
    let ln_cosh = if (p.a * qf * tau).abs() < SMALL_A_SWITCH {
        0.5 * (qf * p.a * tau).powi(2)
    } else {
        (qf * p.a * tau).cosh().ln()
    };
    let _ = h;
    let a0 = (-2.0 * ln_cosh - (1.0 + rh * rh).ln()) / (PI * qf);
    let b0 = -2.0 / (PI * qf) * s * (qf * p.b * tau - rh.atan());
    let mut entries = BTreeMap::new();
    let mut yj = Complex64::new(1.0, 0.0);
    let mut j = 1usize;
    while q as usize * j <= truncation {
        yj *= y;
        let k = 2.0 / (PI * qf * j as f64);
        entries.insert(q as usize * j, (k * yj.re, -k * yj.im));
        j += 1;
    }
    CoefficientTable {
        tau,
        q,
        c: (1.0 / lam + cfg.epsilon / lam * cfg.amp_right / lam * cfg.phi.sin()) * tau,
        a0,
        b0,
        entries,
        truncation,
    }
}

/// `q pi t / lambda` reduced into one period, with unit derivative scale.
pub(crate) fn theta_jet(cfg: &CavityConfig, t: f64) -> Jet {
    let period = 2.0 * cfg.lambda / cfg.q as f64;
    let w = cfg.omega();
    Jet::new(w * t.rem_euclid(period), w, 0.0, 0.0)
}

fn piece_jets(cfg: &CavityConfig, t: f64) -> (Jet, Jet) {
    let dec = phase_decompose(t, cfg.lambda);
    (Jet::new(dec.z, 1.0, 0.0, 0.0), Jet::new(dec.omega, 1.0, 0.0, 0.0))
}

/// Non-periodic corrections `g1 + g2` given the resummed factor
/// `P = 1 + pi sum n [A_n cos - B_n sin]`, and `F - G`.
fn corrections(cfg: &CavityConfig, t: f64, theta: Jet, factor: Jet) -> (Jet, Jet) {
    let lam = cfg.lambda;
    let (z, omega) = piece_jets(cfg, t);
    let sin_theta = theta.sin();
    let g1 = -((z + lam) * sin_theta * factor).scale(cfg.amp_left / (lam * lam));
    let shape = (theta + cfg.phi).sin() * parity_sign(cfg.q) + cfg.phi.sin();
    let g2 = -(omega * shape * factor).scale(cfg.amp_right / (lam * lam));
    let split = (sin_theta * factor).scale(2.0 * cfg.epsilon * cfg.amp_left / lam);
    ((g1 + g2).scale(cfg.epsilon), split)
}

/// Closed form for `b = 0` (translational / breathing modes).
pub fn shaker_jet(cfg: &CavityConfig, t: f64) -> (Jet, Jet) {
    let lam = cfg.lambda;
    let tj = Jet::var(t);
    if t < 0.0 {
        let base = Jet::new(t / lam, 1.0 / lam, 0.0, 0.0);
        return (base, base);
    }
    let p = cfg.resonance_params();
    let qf = cfg.q as f64;
    let theta = theta_jet(cfg, t);
    let half = theta.scale(0.5);
    let (sh, ch) = (half.sin(), half.cos());
    let decay = (tj * (-2.0 * qf * p.a.abs())).exp();
    let denom = decay + 1.0;
    let h_abs = (Jet::constant(1.0) - decay) / denom;
    let one_minus_h = decay.scale(2.0) / denom;
    // 1 - h e^{i theta} with the cancellation near the jumps done analytically
    let (re, im) = if p.a >= 0.0 {
        (one_minus_h + (h_abs * sh * sh).scale(2.0), -(h_abs * theta.sin()))
    } else {
        (one_minus_h + (h_abs * ch * ch).scale(2.0), h_abs * theta.sin())
    };
    let gs = tj.scale(1.0 / lam) - Jet::atan2(im, re).scale(2.0 / (PI * qf));
    let x = tj * (2.0 * qf * p.a);
    let factor = (x.exp() * sh * sh + (-x).exp() * ch * ch).recip();
    let (corr, split) = corrections(cfg, t, theta, factor);
    let g = gs + corr;
    (g, g + split)
}

/// Closed form for `a = 0`: static left mirror dephased by `pi/2`.
pub fn dephased_jet(cfg: &CavityConfig, t: f64) -> (Jet, Jet) {
    let lam = cfg.lambda;
    let tj = Jet::var(t);
    if t < 0.0 {
        let base = Jet::new(t / lam, 1.0 / lam, 0.0, 0.0);
        return (base, base);
    }
    let p = cfg.resonance_params();
    let qf = cfg.q as f64;
    let s = parity_sign(cfg.q);
    let theta = theta_jet(cfg, t);
    let (st, ct) = (theta.sin(), theta.cos());
    let beta = tj * (qf * p.b);
    // (1 - i s beta) - i beta e^{i theta}
    let re = Jet::constant(1.0) + beta * st;
    let im = -(beta * (ct + s));
    let arg = Jet::atan2(im, re) + beta.atan().scale(s);
    let gs = tj.scale(1.0 / cfg.lambda_eff()) - arg.scale(2.0 / (PI * qf));
    let factor = (Jet::constant(1.0) + (beta * st).scale(2.0) + (beta * beta * (ct * s + 1.0)).scale(2.0)).recip();
    let (corr, split) = corrections(cfg, t, theta, factor);
    let g = gs + corr;
    (g, g + split)
}

fn y_jet(cfg: &CavityConfig, p: &ResonanceParams, t: f64) -> CJet {
    let qf = cfg.q as f64;
    let s = parity_sign(cfg.q);
    let tj = Jet::var(t);
    let (h, rh) = if (p.a * qf * t).abs() < SMALL_A_SWITCH {
        (tj * (qf * p.a), tj * (qf * p.b))
    } else {
        let h = (tj * (qf * p.a)).tanh();
        (h, h * (p.b / p.a))
    };
    CJet::new(h, -rh) / CJet::new(Jet::constant(1.0), rh * s)
}

/// Number of terms needed for value and three derivatives.
fn series_terms(ratio: f64, truncation: Option<usize>, q: u32) -> Result<usize> {
    if ratio > SERIES_MAX_RATIO {
        return Err(Error::SeriesNotConverged {
            ratio,
            tail: ratio / (1.0 - ratio),
            truncation: truncation.unwrap_or(0),
        });
    }
    if ratio == 0.0 {
        return Ok(1);
    }
    let tail = |j: usize| (j as f64).powi(3) * ratio.powi(j as i32) / (1.0 - ratio);
    match truncation {
        Some(m) => {
            let j = (m / q as usize).max(1);
            let bound = ratio.powi(j as i32) / (1.0 - ratio);
            if bound > SERIES_TOL {
                return Err(Error::SeriesNotConverged { ratio, tail: bound, truncation: m });
            }
            Ok(j)
        }
        None => {
            let mut j = 1usize;
            while tail(j) > SERIES_TOL * 1e-1 {
                j += 1;
            }
            Ok(j)
        }
    }
}

/// General `(a, b)`: coefficients summed term by term.
pub fn series_jet(cfg: &CavityConfig, t: f64, truncation: Option<usize>) -> Result<(Jet, Jet)> {
    let lam = cfg.lambda;
    let tj = Jet::var(t);
    if t < 0.0 {
        let base = Jet::new(t / lam, 1.0 / lam, 0.0, 0.0);
        return Ok((base, base));
    }
    let p = cfg.resonance_params();
    let qf = cfg.q as f64;
    let theta = theta_jet(cfg, t);
    let y = y_jet(cfg, &p, t);
    let ratio = y.norm_sqr().v.sqrt();
    let terms = series_terms(ratio, truncation, cfg.q)?;
    let z = y * CJet::cis(-theta);
    let mut zj = CJet::one();
    let mut log_sum = CJet::real(Jet::constant(0.0));
    let mut geo_sum = CJet::real(Jet::constant(0.0));
    for j in 1..=terms {
        zj = zj * z;
        geo_sum = geo_sum + zj;
        log_sum = log_sum + zj.scale(Jet::constant(1.0 / j as f64));
    }
    let c = tj.scale(1.0 / lam + cfg.epsilon * cfg.amp_right * cfg.phi.sin() / (lam * lam));
    let g0 = c - log_sum.im.scale(2.0 / (PI * qf));
    let factor = geo_sum.re.scale(2.0) + 1.0;
    let (corr, split) = corrections(cfg, t, theta, factor);
    let g = g0 + corr;
    Ok((g, g + split))
}

/// Staircase jump locations in `[lo, hi]`.
pub fn jump_times(cfg: &CavityConfig, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let p = cfg.resonance_params();
    let tol = crate::trajectories::REGIME_ZERO_TOL / cfg.lambda;
    let y = ratio_y_limit(&p, cfg.q, tol)
        .ok_or(Error::RegimeMismatch { backend: "jump_times", regime: "no_radiation" })?;
    let w = cfg.omega();
    let base = y.arg().rem_euclid(2.0 * PI) / w;
    let period = 2.0 * PI / w;
    let k0 = ((lo - base) / period).ceil() as i64;
    let mut out = Vec::new();
    let mut k = k0;
    loop {
        let t = base + k as f64 * period;
        // snap rounding noise onto the grid so boundary points are kept
        let t = if (t - t.round()).abs() < 1e-12 { t.round() } else { t };
        if t > hi + 1e-12 {
            break;
        }
        if t >= lo - 1e-12 {
            out.push(t);
        }
        k += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbative::eval_pert;

    fn shaker3(eps: f64) -> CavityConfig {
        CavityConfig::two_mirror(1.0, eps, 1.0, 1.0, 3, 0.0)
    }

    #[test]
    fn coefficients_vanish_at_origin() {
        let t = rg_coefficients(&shaker3(0.01), 0.0, 30);
        assert_eq!(t.c, 0.0);
        assert_eq!(t.a0, 0.0);
        assert_eq!(t.b0, 0.0);
        assert!(t.entries.values().all(|&(a, b)| a == 0.0 && b == 0.0));
    }

    #[test]
    fn b_zero_coefficients() {
        let cfg = shaker3(0.01);
        let p = cfg.resonance_params();
        let tau = 7.0;
        let t = rg_coefficients(&cfg, tau, 30);
        let (aq, bq) = t.get(3).unwrap();
        assert!((aq - 2.0 / (3.0 * PI) * (3.0 * p.a * tau).tanh()).abs() < 1e-15);
        assert_eq!(bq, 0.0);
        assert!((t.a0 + 2.0 / (3.0 * PI) * (3.0 * p.a * tau).cosh().ln()).abs() < 1e-15);
        assert_eq!(t.get(4).unwrap(), (0.0, 0.0));
        assert!(matches!(t.get(31), Err(Error::TruncationTooSmall { .. })));
        let h = (3.0 * p.a * tau).tanh();
        for (&m, &(a, b)) in &t.entries {
            let j = (m / 3) as i32;
            assert!(a.abs().max(b.abs()) <= 4.0 * h.abs().powi(j) / (PI * m as f64) + 1e-18);
        }
    }

    #[test]
    fn coefficients_solve_the_flow_equations() {
        // dA/dtau and dB/dtau by central differences against the RG equations
        let cfg = CavityConfig::two_mirror(1.0, 0.02, 0.6, 1.0, 2, 0.9);
        let p = cfg.resonance_params();
        let (a, b) = (p.a, p.b);
        let q = 2usize;
        let s = parity_sign(2);
        let tau = 3.0;
        let h = 1e-4;
        let big = 400;
        let t0 = rg_coefficients(&cfg, tau, big);
        let tp = rg_coefficients(&cfg, tau + h, big);
        let tm = rg_coefficients(&cfg, tau - h, big);
        let coef = |n: usize| t0.get(n).unwrap();
        for n in [2usize, 4, 6] {
            let (ap, bp) = tp.get(n).unwrap();
            let (am, bm) = tm.get(n).unwrap();
            let da = (ap - am) / (2.0 * h);
            let db = (bp - bm) / (2.0 * h);
            let (an, bn) = coef(n);
            let (al, bl) = if n > q { coef(n - q) } else { (0.0, 0.0) };
            let (ah, bh) = coef(n + q);
            let nf = n as f64;
            let kd = if n == q { 1.0 } else { 0.0 };
            let ra = 2.0 / PI * a * kd - 2.0 * s * b * nf * bn + (nf - q as f64) * (a * al - b * bl)
                - (nf + q as f64) * (a * ah + b * bh);
            let rb = 2.0 / PI * b * kd + 2.0 * s * b * nf * an + (nf - q as f64) * (a * bl + b * al)
                + (nf + q as f64) * (-a * bh + b * ah);
            assert!((da - ra).abs() < 1e-8, "A_{n}: {da} vs {ra}");
            assert!((db - rb).abs() < 1e-8, "B_{n}: {db} vs {rb}");
        }
    }

    #[test]
    fn closed_shaker_equals_series() {
        for cfg in [shaker3(0.01), CavityConfig::two_mirror(1.0, 0.01, 0.0, 1.0, 2, 0.0)] {
            for t in [0.3, 2.7, 9.4, 15.1] {
                let (gc, fc) = shaker_jet(&cfg, t);
                let (gs, fs) = series_jet(&cfg, t, None).unwrap();
                assert!((gc.v - gs.v).abs() < 1e-10, "{t}");
                assert!((fc.v - fs.v).abs() < 1e-10);
                assert!((gc.d1 - gs.d1).abs() < 1e-8 * gc.d1.abs().max(1.0));
                assert!((gc.d3 - gs.d3).abs() < 1e-6 * gc.d3.abs().max(1.0));
            }
        }
    }

    #[test]
    fn closed_dephased_matches_series_up_to_length_renormalization() {
        let cfg = CavityConfig::dephased(1.0, 0.01, 1.0, 2);
        for t in [0.4, 3.3, 8.9] {
            let (gc, _) = dephased_jet(&cfg, t);
            let (gs, _) = series_jet(&cfg, t, None).unwrap();
            // t / lambda_eff versus c(t) differ at second order only
            let second = (cfg.epsilon * cfg.amp_right).powi(2) * t;
            assert!((gc.v - gs.v).abs() < 2.0 * second + 1e-10, "{t}: {} {}", gc.v, gs.v);
        }
    }

    #[test]
    fn reduces_to_perturbation_theory_at_short_times() {
        let cfg = shaker3(0.01);
        let eps = cfg.epsilon;
        for t in [0.5, 1.2, 1.5] {
            let (g, f) = shaker_jet(&cfg, t);
            let (gp, fp) = eval_pert(&cfg, t);
            let band = 10.0 * eps * eps * (t * t) + 5.0 * eps * eps;
            assert!((g.v - gp).abs() < band, "{t}: {} vs {gp}", g.v);
            assert!((f.v - fp).abs() < band);
        }
    }

    #[test]
    fn no_radiation_has_no_secular_growth() {
        let cfg = CavityConfig::two_mirror(1.0, 0.01, 1.0, 1.0, 2, 0.0);
        for t in [5.3, 50.7, 300.2] {
            let (g, _) = shaker_jet(&cfg, t);
            assert!((g.v - t).abs() < 3.0 * cfg.epsilon, "{t}");
        }
    }

    #[test]
    fn staircase_plateaus() {
        let cfg = CavityConfig::two_mirror(1.0, 0.03, 1.0, 1.0, 3, 0.0);
        let jumps = jump_times(&cfg, 29.0, 31.0).unwrap();
        for w in jumps.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let g = shaker_jet(&cfg, mid).0.v;
            let frac = g * 3.0 - (g * 3.0).round();
            assert!(frac.abs() < 3e-3, "G({mid}) = {g}");
        }
    }

    #[test]
    fn jump_time_examples() {
        let cfg = shaker3(0.01);
        let j = jump_times(&cfg, 0.0, 2.0).unwrap();
        assert_eq!(j.len(), 4);
        for (x, e) in j.iter().zip([0.0, 2.0 / 3.0, 4.0 / 3.0, 2.0]) {
            assert!((x - e).abs() < 1e-12);
        }
        let deph = CavityConfig::dephased(1.0, 0.01, 1.0, 2);
        let j = jump_times(&deph, 0.0, 2.0).unwrap();
        assert_eq!(j, vec![0.0, 1.0, 2.0]);
        let odd = CavityConfig::dephased(1.0, 0.01, 1.0, 3);
        let j = jump_times(&odd, 0.0, 2.0).unwrap();
        assert_eq!(j.len(), 3);
        assert!((j[0] - 1.0 / 3.0).abs() < 1e-12);
        let q1 = CavityConfig::two_mirror(1.0, 0.01, 1.0, 1.0, 1, 0.0);
        assert_eq!(jump_times(&q1, 0.0, 1.999).unwrap().len(), 1);
        let quiet = CavityConfig::two_mirror(1.0, 0.01, 1.0, 1.0, 2, 0.0);
        assert!(jump_times(&quiet, 0.0, 2.0).is_err());
    }

    #[test]
    fn q_jumps_per_period() {
        for q in 1..7 {
            let cfg = CavityConfig::two_mirror(1.0, 0.01, 1.0, 0.3, q, 0.0);
            let j = jump_times(&cfg, 10.0, 12.0 - 1e-9).unwrap();
            assert_eq!(j.len(), q as usize);
        }
    }

    #[test]
    fn series_rejects_slow_convergence() {
        let cfg = shaker3(0.01);
        assert!(matches!(series_jet(&cfg, 80.0, None), Err(Error::SeriesNotConverged { .. })));
        assert!(matches!(series_jet(&cfg, 5.0, Some(6)), Err(Error::SeriesNotConverged { .. })));
    }
}
