//! Bogoliubov coefficients and photon spectra after the walls stop.
//!
//! For `t` past the stop, with `L` the rest length,
//! `beta_nm = (1/2) sqrt(m/n) int exp(-i pi [n G(L x) + m x]) dx` over
//! `[t/L - 1, t/L + 1]` (`F` on the first half, `G` on the second).
//! `alpha_nm` flips the sign of `m x`, so a static cavity gives `delta_nm`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::quadrature::{integrate_complex, integrate_cvec, QuadOptions};
use crate::solution::{FieldSolution, Phase};
use crate::trajectories::{CavityConfig, MotionFamily, REGIME_ZERO_TOL};

/// Largest `m delta` for which the closed forms are used.
pub const VALIDITY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BogoliubovEntry {
    /// Final (post-stop) mode.
    pub n: u32,
    /// Initial (pre-motion) mode.
    pub m: u32,
    pub beta: Complex64,
    pub alpha: Complex64,
    /// Stop time.
    pub stop: f64,
}

/// Motion families with closed-form spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFamily {
    Shaker,
    Dephased,
}

impl ClosedFamily {
    /// Two-mirror motion with `b = 0`, or the dephased single mirror.
    pub fn of(cfg: &CavityConfig) -> Option<Self> {
        match cfg.motion_family {
            MotionFamily::DephasedRight => Some(Self::Dephased),
            MotionFamily::TwoMirror if cfg.resonance_params().b.abs() <= REGIME_ZERO_TOL / cfg.lambda => {
                Some(Self::Shaker)
            }
            MotionFamily::TwoMirror => None,
        }
    }
}

fn extended_stop(sol: &FieldSolution) -> Result<f64> {
    sol.stop_time().ok_or(Error::NotExtended)
}

/// Default evaluation time: two rest lengths past the stop, where `F = G`
/// over the whole window.
pub fn post_stop_time(sol: &FieldSolution) -> Result<f64> {
    Ok(extended_stop(sol)? + 2.0 * sol.rest_length())
}

fn quad_options(freq: f64) -> QuadOptions {
    // one GK15 panel spans at most 3/4 of a period: >= 20 nodes per period
    QuadOptions { abs_tol: 1e-11, rel_tol: 1e-10, max_panels: 2_000_000, max_panel: 1.5 / freq.max(1.0) }
}

/// Kinks and jumps of the phase functions inside the window, in units of
/// the rest length.
fn window_breaks(sol: &FieldSolution, t: f64) -> Result<Vec<f64>> {
    let l = sol.rest_length();
    let stop = extended_stop(sol)?;
    let mut breaks: Vec<f64> = sol.singular_points(Phase::F, t - l, t).into_iter().map(|p| p / l).collect();
    breaks.extend(sol.singular_points(Phase::G, t, t + l).into_iter().map(|p| p / l));
    breaks.push(t / l);
    // staircase jumps of the moving stretch, repeated with the rest period
    if let Ok(jumps) = sol.jump_times(stop - l, stop + l) {
        let period = 2.0 * l;
        for j in jumps {
            let mut k = ((t - l - j) / period).floor();
            while j + k * period <= t + l {
                let p = j + k * period;
                if p >= t - l && p <= t + l {
                    breaks.push(p / l);
                }
                k += 1.0;
            }
        }
    }
    Ok(breaks)
}

/// Phase `G` (or `F` before `t`) at `x` in rest-length units, reduced mod 2.
fn window_phase(sol: &FieldSolution, t: f64, x: f64) -> Result<f64> {
    let l = sol.rest_length();
    let arg = l * x;
    let which = if arg < t { Phase::F } else { Phase::G };
    Ok(sol.eval(which, arg)?.rem_euclid(2.0))
}

fn check_indices(ns: &[u32], ms: &[u32]) -> Result<()> {
    if ns.iter().chain(ms).any(|&k| k == 0) {
        return Err(Error::Validity("mode indices start at 1".into()));
    }
    Ok(())
}

/// `(alpha, beta)` for every `n` in `ns` and one `m`, sharing the panels.
fn row_for_m(sol: &FieldSolution, ns: &[u32], m: u32, t: f64, with_alpha: bool) -> Result<Vec<(Complex64, Complex64)>> {
    let l = sol.rest_length();
    let n_max = ns.iter().copied().max().unwrap_or(1) as f64;
    let opts = quad_options(n_max + m as f64);
    let breaks = window_breaks(sol, t)?;
    let dim = if with_alpha { 2 * ns.len() } else { ns.len() };
    let mf = m as f64;
    let (v, _) = integrate_cvec(
        |x, out| {
            let base = Complex64::from_polar(1.0, -PI * window_phase(sol, t, x)?);
            let xr = x.rem_euclid(2.0);
            let em = Complex64::from_polar(1.0, -PI * mf * xr);
            let mut pow = Complex64::new(1.0, 0.0);
            let mut k = 0u32;
            for (i, &n) in ns.iter().enumerate() {
                if n >= k {
                    pow *= base.powu(n - k);
                } else {
                    pow = base.powu(n);
                }
                k = n;
                out[i] = pow * em;
                if with_alpha {
                    out[ns.len() + i] = pow / em;
                }
            }
            Ok(())
        },
        dim,
        t / l - 1.0,
        t / l + 1.0,
        &breaks,
        &opts,
    )?;
    Ok(ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let pre = 0.5 * (mf / n as f64).sqrt();
            let alpha = if with_alpha { v[ns.len() + i] * pre } else { Complex64::new(0.0, 0.0) };
            (alpha, v[i] * pre)
        })
        .collect())
}

/// Coefficients for all pairs `ns x ms` at post-stop time `t`, ordered by
/// `m` then `n`. Rows over `m` run concurrently when `parallel` is set.
pub fn bogoliubov_grid(sol: &FieldSolution, ns: &[u32], ms: &[u32], t: f64, parallel: bool) -> Result<Vec<BogoliubovEntry>> {
    check_indices(ns, ms)?;
    let stop = extended_stop(sol)?;
    if t <= stop {
        return Err(Error::Validity(format!("evaluation time {t} is not past the stop {stop}")));
    }
    let rows = par_map(ms, parallel, |&m| row_for_m(sol, ns, m, t, true));
    let mut out = Vec::with_capacity(ns.len() * ms.len());
    for (row, &m) in rows.into_iter().zip(ms) {
        for ((alpha, beta), &n) in row?.into_iter().zip(ns) {
            out.push(BogoliubovEntry { n, m, beta, alpha, stop });
        }
    }
    Ok(out)
}

pub fn bogoliubov_at(sol: &FieldSolution, n: u32, m: u32, t: f64) -> Result<BogoliubovEntry> {
    Ok(bogoliubov_grid(sol, &[n], &[m], t, false)?[0])
}

pub fn beta_quadrature(sol: &FieldSolution, n: u32, m: u32) -> Result<Complex64> {
    Ok(bogoliubov_at(sol, n, m, post_stop_time(sol)?)?.beta)
}

pub fn alpha_quadrature(sol: &FieldSolution, n: u32, m: u32) -> Result<Complex64> {
    Ok(bogoliubov_at(sol, n, m, post_stop_time(sol)?)?.alpha)
}

/// `beta_nm = (psi_n, conj(psi0_m))` from the Klein-Gordon product over the
/// rest cavity at time `t`. The overall sign matches the window integral.
pub fn beta_inner_product_oracle(sol: &FieldSolution, n: u32, m: u32, t: f64) -> Result<Complex64> {
    check_indices(&[n], &[m])?;
    let stop = extended_stop(sol)?;
    if t <= stop {
        return Err(Error::Validity(format!("evaluation time {t} is not past the stop {stop}")));
    }
    let l = sol.rest_length();
    // kinks have measure zero here; take one-sided derivatives on them
    let sol = sol.clone().with_guard(0.0);
    let mut breaks: Vec<f64> = sol.singular_points(Phase::G, t, t + l).into_iter().map(|p| p - t).collect();
    breaks.extend(sol.singular_points(Phase::F, t - l, t).into_iter().map(|p| t - p));
    for b in window_breaks(&sol, t)? {
        breaks.push((b * l - t).abs());
    }
    let k = PI * m as f64 / l;
    let norm = 1.0 / (PI * m as f64).sqrt();
    let opts = quad_options(n.max(m) as f64 * 2.0);
    let (v, _) = integrate_complex(
        |x| {
            let (psi, dpsi) = sol.mode_function(n, t, x)?;
            // conj(psi0_m) = norm e^{i k t} sin(k x)
            let s = norm * (k * x).sin();
            let xi = Complex64::from_polar(s, k * t);
            let dxi = xi * Complex64::new(0.0, k);
            // (psi, xi) = -i int [psi d_t conj(xi) - d_t psi conj(xi)]
            Ok(Complex64::new(0.0, -1.0) * (psi * dxi.conj() - dpsi * xi.conj()))
        },
        0.0,
        l,
        &breaks,
        &opts,
    )?;
    Ok(v)
}

/// Pulse-width parameter of the closed forms.
pub fn pulse_width(cfg: &CavityConfig, stop: f64) -> Result<f64> {
    let q = cfg.q as f64;
    match ClosedFamily::of(cfg) {
        Some(ClosedFamily::Shaker) => {
            let a = cfg.resonance_params().a;
            if a >= 0.0 {
                return Err(Error::Unsupported("pulse width for a >= 0"));
            }
            // 2 sqrt(zeta) / (q pi), zeta = exp(2 q a T)
            Ok(2.0 * (q * a * stop).exp() / (q * PI))
        }
        Some(ClosedFamily::Dephased) => {
            let qbt = q * cfg.resonance_params().b * stop;
            Ok(1.0 / (q * PI * qbt * qbt))
        }
        None => Err(Error::Unsupported("pulse width outside the shaker and dephased families")),
    }
}

/// `(f, f_tilde)` at `x` in `[0, 2/q]`: the periodic part of the
/// post-stop phase and its piecewise-linear model.
pub fn f_profile(cfg: &CavityConfig, stop: f64, x: f64) -> Result<(f64, f64)> {
    let q = cfg.q as f64;
    if !(0.0..=2.0 / q).contains(&x) {
        return Err(Error::Validity(format!("x = {x} outside [0, 2/q]")));
    }
    let delta = pulse_width(cfg, stop)?;
    match ClosedFamily::of(cfg) {
        Some(ClosedFamily::Shaker) => {
            let zeta = (2.0 * q * cfg.resonance_params().a * stop).exp();
            let w = Complex64::new(1.0 + zeta, 0.0) + Complex64::from_polar(1.0 - zeta, q * PI * x);
            let f = -2.0 / (q * PI) * w.arg();
            let slope = 1.0 - q * delta;
            let ft = if x <= 1.0 / q - delta {
                -slope * x
            } else if x <= 1.0 / q + delta {
                slope * slope / (q * delta) * (x - 1.0 / q)
            } else {
                -slope * (x - 2.0 / q)
            };
            Ok((f, ft))
        }
        Some(ClosedFamily::Dephased) => {
            if cfg.q % 2 == 1 {
                return Err(Error::Unsupported("piecewise model for odd q"));
            }
            let le = cfg.lambda_eff();
            let qbx = q * cfg.resonance_params().b * le * x;
            let s = crate::trajectories::parity_sign(cfg.q);
            let num = Complex64::new(0.0, qbx) * Complex64::from_polar(1.0, q * PI * x * le / cfg.lambda);
            let w = Complex64::new(1.0, 0.0) - num / Complex64::new(1.0, -s * qbx);
            let f = -2.0 / (PI * q) * w.arg();
            let ft = if x <= delta {
                (2.0 / (q * delta) - 2.5) * x - 1.0 / q
            } else {
                -(1.0 - 0.75 * q * delta) * (x - 2.0 / q) - 1.0 / q
            };
            Ok((f, ft))
        }
        None => Err(Error::Unsupported("piecewise model outside the shaker and dephased families")),
    }
}

/// Closed-form `|beta_nm|^2` for `q = 2`.
pub fn beta_sq_closed_q2(family: ClosedFamily, n: u32, m: u32, delta: f64) -> Result<f64> {
    check_indices(&[n], &[m])?;
    let (nf, mf) = (n as f64, m as f64);
    if mf * delta > VALIDITY {
        return Err(Error::Validity(format!("m delta = {} exceeds {VALIDITY}", mf * delta)));
    }
    let parity = 1.0 + sign(m + n);
    let sm = sign(m);
    Ok(match family {
        ClosedFamily::Shaker => {
            let c = 2.0 * PI * nf * delta;
            mf / (nf * PI * PI) * parity * (1.0 - sm * c.cos()) / (mf + c).powi(2)
        }
        ClosedFamily::Dephased => {
            let c = 1.5 * PI * nf * delta;
            2.0 * mf / (nf * PI * PI) * parity * (1.0 - sm * c.cos()) / (mf + c).powi(2)
        }
    })
}

fn sign(k: u32) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn check_closed(m: u32, delta: f64) -> Result<()> {
    if m == 0 {
        return Err(Error::Validity("mode indices start at 1".into()));
    }
    if !(delta > 0.0) || m as f64 * delta > VALIDITY {
        return Err(Error::Validity(format!("m delta = {} outside (0, {VALIDITY}]", m as f64 * delta)));
    }
    Ok(())
}

/// Closed-form occupation of mode `m` for `q = 2`.
pub fn photon_number_closed(family: ClosedFamily, m: u32, delta: f64) -> Result<f64> {
    check_closed(m, delta)?;
    let mf = m as f64;
    let sm = sign(m);
    Ok(match family {
        ClosedFamily::Shaker => ((mf / (2.0 * delta)).ln() - sm * (1.0 / (2.0 * PI * delta)).ln()) / (mf * PI * PI),
        ClosedFamily::Dephased => {
            2.0 / (mf * PI * PI) * ((2.0 * mf / (3.0 * delta)).ln() - sm * (2.0 / (3.0 * PI * delta)).ln())
        }
    })
}

/// Late-time `dN_m/dT` for `q = 2`.
pub fn photon_rate_closed(cfg: &CavityConfig, m: u32, stop: f64) -> Result<f64> {
    let family = ClosedFamily::of(cfg).ok_or(Error::Unsupported("rate outside the shaker and dephased families"))?;
    if cfg.q != 2 {
        return Err(Error::Unsupported("closed rates need q = 2"));
    }
    match pulse_width(cfg, stop) {
        Ok(delta) => check_closed(m, delta)?,
        Err(Error::Unsupported(_)) => check_indices(&[m], &[])?,
        Err(e) => return Err(e),
    }
    let odd = 1.0 - sign(m);
    let mf = m as f64;
    Ok(match family {
        // stated for a < 0; the a > 0 branch creates the same amount
        ClosedFamily::Shaker => 2.0 * cfg.resonance_params().a.abs() / (mf * PI * PI) * odd,
        ClosedFamily::Dephased => 4.0 / (mf * PI * PI) * odd / stop,
    })
}

/// Occupations below this many photons are not resolved; a tail that small
/// is dropped rather than fitted.
pub const OCCUPATION_FLOOR: f64 = 1e-8;

/// A truncated sum with its fitted tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSum {
    pub value: f64,
    pub summed: f64,
    pub tail: f64,
    /// Exponent of the fitted power-law decay.
    pub decay: f64,
}

/// Tail of a series from a power-law fit to its last decade. Terms are
/// paired so parity-alternating series fit smoothly.
pub fn tail_estimate(terms: &[f64]) -> Result<(f64, f64)> {
    let n = terms.len();
    if n < 20 {
        return Err(Error::Validity(format!("{n} terms are too few for a tail fit")));
    }
    let lo = (n / 10).max(1);
    let total: f64 = terms.iter().sum();
    let last: f64 = terms[lo..].iter().sum();
    if last <= 1e-12 * total.max(1.0) || last <= OCCUPATION_FLOOR {
        return Ok((0.0, f64::INFINITY));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut i = lo;
    while i + 1 < n {
        let p = terms[i] + terms[i + 1];
        if p > 0.0 {
            // 1-based mid index of the pair
            xs.push((i as f64 + 1.5).ln());
            ys.push(p.ln());
        }
        i += 2;
    }
    if xs.len() < 4 {
        return Ok((0.0, f64::INFINITY));
    }
    let (slope, intercept, _) = crate::energy::linear_fit(&xs, &ys);
    let p = -slope;
    if p <= 1.1 {
        return Err(Error::Validity(format!("tail decays as n^-{p:.3}; raise the cutoff")));
    }
    let c = intercept.exp();
    let edge = n as f64 + 0.5;
    Ok((0.5 * c * edge.powf(1.0 - p) / (p - 1.0), p))
}

fn mode_sum(terms: &[f64]) -> Result<ModeSum> {
    let summed: f64 = terms.iter().sum();
    let (tail, decay) = tail_estimate(terms)?;
    Ok(ModeSum { value: summed + tail, summed, tail, decay })
}

fn validity_delta(sol: &FieldSolution, m: u32) -> Result<()> {
    let stop = extended_stop(sol)?;
    if let Ok(delta) = pulse_width(sol.config(), stop) {
        if m as f64 * delta > VALIDITY {
            return Err(Error::Validity(format!("mode {m} beyond the validity window (m delta = {})", m as f64 * delta)));
        }
    }
    Ok(())
}

/// Smallest and largest FFT sizes tried by the mode sums.
const FFT_MIN: usize = 1 << 14;
const FFT_MAX: usize = 1 << 21;
/// Relative change between FFT doublings accepted as converged; kinks in
/// the phase limit the trapezoid rule to second order.
const FFT_TOL: f64 = 1e-7;
/// Largest jump of the continued phase tolerated by the mode sums.
const GAP_TOL: f64 = 1e-6;

/// Start of the sampled period in rest-length units; every argument in
/// `[x0, x0 + 2]` lies past the stop light cone, where `F = G`.
fn period_start(sol: &FieldSolution) -> Result<f64> {
    Ok(post_stop_time(sol)? / sol.rest_length() - 1.0)
}

/// Jump of the continued phase where the periodic copies meet. A jump
/// makes the occupations diverge logarithmically with the cutoff.
pub fn extension_gap(sol: &FieldSolution) -> Result<f64> {
    let l = sol.rest_length();
    let seam = extended_stop(sol)? + l;
    let h = 1e-9 * l;
    let lo = sol.eval(Phase::G, seam - h)?;
    let hi = sol.eval(Phase::G, seam + h)?;
    let mid = sol.eval(Phase::G, seam + 3.0 * h)?;
    // remove the local slope measured on the right of the seam
    Ok((hi - lo) - (mid - hi))
}

fn check_continuous(sol: &FieldSolution) -> Result<()> {
    let gap = extension_gap(sol)?;
    if gap.abs() > GAP_TOL {
        return Err(Error::Validity(format!("continued phase jumps by {gap:.3e} at the seam; mode sums diverge")));
    }
    Ok(())
}

fn chunked(n: usize, parallel: bool) -> Vec<(usize, usize)> {
    let chunks = if parallel { 64 } else { 1 };
    let per = n.div_ceil(chunks);
    (0..n).step_by(per).map(|lo| (lo, (lo + per).min(n))).collect()
}

fn collect_chunks(parts: Vec<Result<Vec<f64>>>) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// `G(L x_j)` on `len` uniform points of one period.
fn phase_samples(sol: &FieldSolution, x0: f64, len: usize, parallel: bool) -> Result<Vec<f64>> {
    let l = sol.rest_length();
    let h = 2.0 / len as f64;
    let parts = par_map(&chunked(len, parallel), parallel, |&(lo, hi)| {
        (lo..hi).map(|j| sol.eval(Phase::G, l * (x0 + j as f64 * h))).collect::<Result<Vec<_>>>()
    });
    collect_chunks(parts)
}

/// Inverse phase `X(u_j)` with `G(L X) = u_j` on `len` uniform points
/// `u_j = G(L x0) + 2 j / len`, by safeguarded Newton iteration.
fn inverse_phase_samples(sol: &FieldSolution, x0: f64, len: usize, parallel: bool) -> Result<Vec<f64>> {
    let l = sol.rest_length();
    let sol = sol.clone().with_guard(0.0);
    let u0 = sol.eval(Phase::G, l * x0)?;
    let h = 2.0 / len as f64;
    let phase = |x: f64| -> Result<(f64, f64)> {
        let j = sol.eval_jet(Phase::G, l * x)?;
        Ok((j.v, l * j.d1))
    };
    let parts = par_map(&chunked(len, parallel), parallel, |&(lo, hi)| {
        let mut out = Vec::with_capacity(hi - lo);
        let mut prev = x0;
        for j in lo..hi {
            let u = u0 + j as f64 * h;
            let (mut a, mut b) = (prev, x0 + 2.0);
            let mut x = prev;
            for _ in 0..200 {
                let (g, dg) = phase(x)?;
                let r = g - u;
                if r.abs() <= 4.0 * f64::EPSILON * u.abs() {
                    break;
                }
                if r < 0.0 {
                    a = x;
                } else {
                    b = x;
                }
                let newton = x - r / dg;
                let next = if dg > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
                if (next - x).abs() <= 1e-15 * x.abs() {
                    x = next;
                    break;
                }
                x = next;
            }
            out.push(x);
            prev = x;
        }
        Ok(out)
    });
    collect_chunks(parts)
}

fn spectrum_of(samples: impl Iterator<Item = Complex64>) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.collect();
    let mut planner = rustfft::FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// `(0, |beta_nm|^2)` for `n = 1..=cutoff` at fixed `m`, from `len` samples.
/// Integrating by parts in `u = G` turns the row into Fourier coefficients
/// of `exp(-i pi m X(u))`: `beta_nm = -(1/2) sqrt(n/m) int exp(-i pi [n u + m X(u)]) du`.
fn first_index_terms(sol: &FieldSolution, m: u32, cutoff: u32, len: usize, parallel: bool) -> Result<Vec<(f64, f64)>> {
    let x0 = period_start(sol)?;
    let xs = inverse_phase_samples(sol, x0, len, parallel)?;
    let mf = m as f64;
    let s = spectrum_of(xs.iter().map(|&x| Complex64::from_polar(1.0, -PI * mf * (x - x0))));
    let h = 2.0 / len as f64;
    Ok((1..=cutoff as usize).map(|n| (0.0, n as f64 / (4.0 * mf) * (h * s[n].norm()).powi(2))).collect())
}

/// `(|alpha_km|^2, |beta_km|^2)` for `m = 1..=cutoff` at fixed `k`.
fn second_index_terms_fft(sol: &FieldSolution, k: u32, cutoff: u32, len: usize, parallel: bool) -> Result<Vec<(f64, f64)>> {
    let x0 = period_start(sol)?;
    let gs = phase_samples(sol, x0, len, parallel)?;
    let kf = k as f64;
    let s = spectrum_of(gs.iter().map(|&g| Complex64::from_polar(1.0, -PI * kf * g.rem_euclid(2.0))));
    let h = 2.0 / len as f64;
    Ok((1..=cutoff as usize)
        .map(|m| {
            let w = m as f64 / (4.0 * kf) * h * h;
            (w * s[len - m].norm_sqr(), w * s[m].norm_sqr())
        })
        .collect())
}

/// Double the sample count until `reduce` of the terms is stable. Kinks
/// leave a clean `h^2` error, so each term is Richardson-extrapolated from
/// the last two sample counts.
fn converged_terms<F, R>(cutoff: u32, compute: F, reduce: R) -> Result<Vec<(f64, f64)>>
where
    F: Fn(usize) -> Result<Vec<(f64, f64)>>,
    R: Fn(&[(f64, f64)]) -> f64,
{
    let extrapolate = |coarse: &[(f64, f64)], fine: &[(f64, f64)]| -> Vec<(f64, f64)> {
        coarse
            .iter()
            .zip(fine)
            .map(|(c, f)| ((4.0 * f.0 - c.0) / 3.0, (4.0 * f.1 - c.1) / 3.0))
            .collect()
    };
    let mut len = (8 * cutoff as usize).next_power_of_two().max(FFT_MIN);
    let mut coarse = compute(len)?;
    len *= 2;
    let mut fine = compute(len)?;
    let mut best = extrapolate(&coarse, &fine);
    let mut last = reduce(&best);
    let mut change = f64::INFINITY;
    while len < FFT_MAX {
        len *= 2;
        coarse = fine;
        fine = compute(len)?;
        best = extrapolate(&coarse, &fine);
        let now = reduce(&best);
        change = (now - last).abs();
        // occupations are O(1) photons; an absolute floor covers empty modes
        if change <= FFT_TOL * now.abs().max(1e-3) {
            return Ok(best);
        }
        last = now;
    }
    Err(Error::Quadrature { estimate: last, error: change })
}

/// Largest cutoff whose FFT ladder reaches three sizes below `FFT_MAX`.
pub const MAX_CUTOFF: u32 = (FFT_MAX / 32) as u32;

fn check_cutoff(cutoff: u32) -> Result<()> {
    if cutoff > MAX_CUTOFF {
        return Err(Error::Validity(format!("cutoff {cutoff} exceeds {MAX_CUTOFF}")));
    }
    Ok(())
}

/// `N_m = sum_n |beta_nm|^2` over final modes `n <= cutoff`, plus tail.
pub fn photon_number(sol: &FieldSolution, m: u32, cutoff: u32, parallel: bool) -> Result<ModeSum> {
    check_indices(&[m], &[cutoff])?;
    check_cutoff(cutoff)?;
    check_continuous(sol)?;
    validity_delta(sol, m)?;
    let terms = converged_terms(cutoff, |len| first_index_terms(sol, m, cutoff, len, parallel), |t| t.iter().map(|p| p.1).sum())?;
    mode_sum(&terms.into_iter().map(|p| p.1).collect::<Vec<_>>())
}

/// `sum_m |beta_km|^2` over initial modes `m <= cutoff`, plus tail.
pub fn photon_number_second_index(sol: &FieldSolution, k: u32, cutoff: u32, parallel: bool) -> Result<ModeSum> {
    check_indices(&[k], &[cutoff])?;
    check_cutoff(cutoff)?;
    check_continuous(sol)?;
    validity_delta(sol, k)?;
    let terms = converged_terms(
        cutoff,
        |len| second_index_terms_fft(sol, k, cutoff, len, parallel),
        |t| t.iter().map(|p| p.1).sum(),
    )?;
    mode_sum(&terms.into_iter().map(|p| p.1).collect::<Vec<_>>())
}

/// `sum_m (|alpha_km|^2 - |beta_km|^2)`, which equals 1.
pub fn unitarity_sum(sol: &FieldSolution, k: u32, cutoff: u32, parallel: bool) -> Result<ModeSum> {
    check_indices(&[k], &[cutoff])?;
    check_cutoff(cutoff)?;
    check_continuous(sol)?;
    let terms = converged_terms(
        cutoff,
        |len| second_index_terms_fft(sol, k, cutoff, len, parallel),
        |t| t.iter().map(|p| p.0 - p.1).sum(),
    )?;
    let summed: f64 = terms.iter().map(|p| p.0 - p.1).sum();
    // |alpha|^2 and |beta|^2 share the same slow tail; estimate each
    let (ta, pa) = tail_estimate(&terms.iter().map(|t| t.0).collect::<Vec<_>>())?;
    let (tb, _) = tail_estimate(&terms.iter().map(|t| t.1).collect::<Vec<_>>())?;
    Ok(ModeSum { value: summed + ta - tb, summed, tail: ta - tb, decay: pa })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub mode: u32,
    pub quadrature: f64,
    pub closed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub stop: f64,
    pub delta: Option<f64>,
    pub rows: Vec<SpectrumRow>,
}

impl SpectrumTable {
    pub fn occupation(&self, mode: u32) -> Option<f64> {
        self.rows.iter().find(|r| r.mode == mode).map(|r| r.quadrature)
    }

    /// CSV with header `mode,n_quadrature,n_closed,delta,T`; missing closed
    /// values are left empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mode,n_quadrature,n_closed,delta,T\n");
        let delta = self.delta.map(|d| format!("{d:.16e}")).unwrap_or_default();
        for r in &self.rows {
            let closed = r.closed.map(|c| format!("{c:.16e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{:.16e},{},{},{:.16e}", r.mode, r.quadrature, closed, delta, self.stop);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

/// Occupations of modes `1..=m_max`, each summed over final modes up to
/// `cutoff`, with closed forms where they apply.
pub fn spectrum(sol: &FieldSolution, m_max: u32, cutoff: u32, parallel: bool) -> Result<SpectrumTable> {
    let stop = extended_stop(sol)?;
    let cfg = sol.config();
    let delta = pulse_width(cfg, stop).ok();
    let family = ClosedFamily::of(cfg);
    let mut rows = Vec::with_capacity(m_max as usize);
    for m in 1..=m_max {
        let quadrature = photon_number(sol, m, cutoff, parallel)?.value;
        let closed = match (family, delta) {
            (Some(f), Some(d)) if cfg.q == 2 => photon_number_closed(f, m, d).ok(),
            _ => None,
        };
        rows.push(SpectrumRow { mode: m, quadrature, closed });
    }
    Ok(SpectrumTable { stop, delta, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Backend;

    fn single_shaker() -> CavityConfig {
        CavityConfig::two_mirror(1.0, 0.01, 0.0, 1.0, 2, 0.0)
    }

    fn stopped(cfg: CavityConfig, backend: Backend, stop: f64) -> FieldSolution {
        FieldSolution::new(cfg, backend).unwrap().extend_post_stop(stop).unwrap()
    }

    #[test]
    fn static_cavity_does_not_mix_modes() {
        let sol = stopped(CavityConfig::static_cavity(1.0), Backend::Exact, 4.0);
        let ns = [1, 2, 3, 4];
        for e in bogoliubov_grid(&sol, &ns, &ns, 7.3, false).unwrap() {
            assert!(e.beta.norm() < 1e-12, "{e:?}");
            let want = if e.n == e.m { 1.0 } else { 0.0 };
            assert!((e.alpha - want).norm() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn requires_extension_and_post_stop_time() {
        let sol = FieldSolution::auto_rg(single_shaker()).unwrap();
        assert_eq!(beta_quadrature(&sol, 1, 1), Err(Error::NotExtended));
        let sol = sol.extend_post_stop(20.0).unwrap();
        assert!(bogoliubov_at(&sol, 1, 1, 19.0).is_err());
        assert!(bogoliubov_at(&sol, 0, 1, 23.0).is_err());
    }

    #[test]
    fn modulus_does_not_depend_on_evaluation_time() {
        let sol = stopped(single_shaker(), Backend::RgClosedShaker, 60.0);
        let t = post_stop_time(&sol).unwrap();
        for (n, m) in [(1, 1), (3, 1), (2, 5)] {
            let a = bogoliubov_at(&sol, n, m, t).unwrap();
            let b = bogoliubov_at(&sol, n, m, t + 1.37).unwrap();
            assert!((a.beta.norm() - b.beta.norm()).abs() < 1e-8);
            assert!((a.alpha.norm() - b.alpha.norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn inner_product_oracle_agrees() {
        let sol = stopped(single_shaker(), Backend::Exact, 40.0);
        let t = post_stop_time(&sol).unwrap();
        for (n, m) in [(1, 1), (3, 1)] {
            let quad = bogoliubov_at(&sol, n, m, t + 0.4).unwrap().beta;
            let oracle = beta_inner_product_oracle(&sol, n, m, t + 0.4).unwrap();
            assert!((quad - oracle).norm() < 1e-3, "({n},{m}) {quad} {oracle}");
        }
    }

    #[test]
    fn f_profile_anchor_points() {
        let cfg = single_shaker();
        let stop = 300.0;
        let q = 2.0;
        let delta = pulse_width(&cfg, stop).unwrap();
        let (_, ft) = f_profile(&cfg, stop, 0.5).unwrap();
        assert!(ft.abs() < 1e-15);
        let x = 1e-6;
        let (_, ft) = f_profile(&cfg, stop, x).unwrap();
        assert!((ft / x + (1.0 - q * delta)).abs() < 1e-9);
        assert_eq!(f_profile(&cfg, stop, 0.0).unwrap().1, 0.0);
        // continuity at the segment joints
        for edge in [0.5 - delta, 0.5 + delta] {
            let (_, a) = f_profile(&cfg, stop, edge - 1e-12).unwrap();
            let (_, b) = f_profile(&cfg, stop, edge + 1e-12).unwrap();
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn f_tilde_tracks_f_off_the_jump() {
        let cfg = single_shaker();
        let stop = 300.0;
        let delta = pulse_width(&cfg, stop).unwrap();
        for i in 0..=20_000 {
            let x = i as f64 / 20_000.0;
            if (x - 0.5).abs() <= delta {
                continue;
            }
            let (f, ft) = f_profile(&cfg, stop, x).unwrap();
            assert!((f - ft).abs() < 3.0 * delta, "x={x} f={f} ft={ft}");
        }
    }

    #[test]
    fn dephased_f_profile() {
        let cfg = CavityConfig::dephased(1.0, 0.05, 1.0, 2);
        let stop = 40.25;
        let delta = pulse_width(&cfg, stop).unwrap();
        let (_, ft) = f_profile(&cfg, stop, 0.0).unwrap();
        assert!((ft + 0.5).abs() < 1e-15);
        let (_, a) = f_profile(&cfg, stop, delta).unwrap();
        assert!((a - (0.5 - 2.5 * delta)).abs() < 1e-12);
        // the two pieces meet up to a term of order delta^2
        let (_, b) = f_profile(&cfg, stop, delta * (1.0 + 1e-12)).unwrap();
        assert!((a - b).abs() < 2.0 * delta * delta);
        let (f, _) = f_profile(&cfg, stop, 0.7).unwrap();
        assert!(f.is_finite());
    }

    #[test]
    fn unsupported_branches() {
        let antishaker = CavityConfig::two_mirror(1.0, 0.01, 0.0, 1.0, 3, 0.0);
        assert!(antishaker.resonance_params().a > 0.0);
        assert!(matches!(f_profile(&antishaker, 30.0, 0.1), Err(Error::Unsupported(_))));
        let odd = CavityConfig::dephased(1.0, 0.05, 1.0, 3);
        assert!(matches!(f_profile(&odd, 40.5, 0.1), Err(Error::Unsupported(_))));
        let general = CavityConfig::two_mirror(1.0, 0.01, 0.5, 1.0, 2, 0.7);
        assert!(matches!(pulse_width(&general, 30.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn closed_beta_examples() {
        for (n, m) in [(1, 2), (2, 3), (4, 1)] {
            assert_eq!(beta_sq_closed_q2(ClosedFamily::Shaker, n, m, 1e-3).unwrap(), 0.0);
            assert_eq!(beta_sq_closed_q2(ClosedFamily::Dephased, n, m, 1e-3).unwrap(), 0.0);
        }
        for (n, m) in [(1, 1), (3, 5), (7, 1)] {
            let v = beta_sq_closed_q2(ClosedFamily::Shaker, n, m, 1e-12).unwrap();
            let limit = 4.0 / (n as f64 * m as f64 * PI * PI);
            assert!((v / limit - 1.0).abs() < 1e-9);
        }
        let v = beta_sq_closed_q2(ClosedFamily::Shaker, 1, 1, 0.01).unwrap();
        assert!((v - 0.358_428_405_674_5).abs() < 1e-12, "{v}");
        assert!(beta_sq_closed_q2(ClosedFamily::Shaker, 1, 20, 0.01).is_err());
    }

    #[test]
    fn closed_rates() {
        let single = single_shaker();
        assert!((single.resonance_params().a + 0.005 * PI).abs() < 1e-15);
        let r = photon_rate_closed(&single, 1, 100.0).unwrap();
        assert!((r - 0.02 / PI).abs() < 1e-12);
        assert_eq!(photon_rate_closed(&single, 2, 100.0).unwrap(), 0.0);
        // for q = 2 the two-mirror enhancement needs the breathing phase
        let both = CavityConfig::two_mirror(1.0, 0.01, 1.0, 1.0, 2, PI);
        assert!((photon_rate_closed(&both, 1, 100.0).unwrap() - 2.0 * r).abs() < 1e-12);
        let deph = CavityConfig::dephased(1.0, 0.05, 1.0, 2);
        let r50 = photon_rate_closed(&deph, 1, 50.0).unwrap();
        assert!((r50 - 0.016_211).abs() < 1e-6, "{r50}");
        assert!(photon_rate_closed(&deph, 1, 80.0).unwrap() < r50);
        assert_eq!(photon_rate_closed(&deph, 4, 50.0).unwrap(), 0.0);
    }

    #[test]
    fn closed_sums_reproduce_closed_occupations() {
        let delta = 1e-4;
        for family in [ClosedFamily::Shaker, ClosedFamily::Dephased] {
            for m in [1u32, 3, 5] {
                let sum: f64 = (1..4_000_000u32).map(|n| beta_sq_closed_q2(family, n, m, delta).unwrap()).sum();
                let closed = photon_number_closed(family, m, delta).unwrap();
                assert!((sum / closed - 1.0).abs() < 0.1, "{family:?} m={m} {sum} {closed}");
            }
        }
    }

    #[test]
    fn tail_of_a_power_law() {
        let terms: Vec<f64> = (1..=400).map(|n| if n % 2 == 1 { 3.0 / (n as f64).powi(3) } else { 0.0 }).collect();
        let exact: f64 = (401..2_000_000).filter(|n| n % 2 == 1).map(|n| 3.0 / (n as f64).powi(3)).sum();
        let (tail, p) = tail_estimate(&terms).unwrap();
        assert!((p - 3.0).abs() < 0.05);
        assert!((tail / exact - 1.0).abs() < 0.05, "{tail} {exact}");
        let slow: Vec<f64> = (1..=400).map(|n| 1.0 / n as f64).collect();
        assert!(tail_estimate(&slow).is_err());
        let noise: Vec<f64> = (1..=400).map(|_| 1e-13).collect();
        assert_eq!(tail_estimate(&noise).unwrap().0, 0.0);
    }

    #[test]
    fn unitarity_on_a_short_stop() {
        let sol = stopped(single_shaker(), Backend::RgClosedShaker, 60.0);
        for k in 1..=3 {
            let u = unitarity_sum(&sol, k, 1000, false).unwrap();
            assert!((u.value - 1.0).abs() < 0.02, "k={k} {u:?}");
        }
    }

    #[test]
    fn first_index_fft_matches_direct_quadrature() {
        let sol = stopped(single_shaker(), Backend::RgClosedShaker, 60.0);
        let t = post_stop_time(&sol).unwrap();
        let ns: Vec<u32> = (1..=200).collect();
        let direct: f64 = bogoliubov_grid(&sol, &ns, &[1], t, false).unwrap().iter().map(|e| e.beta.norm_sqr()).sum();
        let fft = photon_number(&sol, 1, 200, false).unwrap();
        assert!((fft.summed - direct).abs() < 1e-6 * direct, "{} {direct}", fft.summed);
    }

    #[test]
    fn odd_modes_dominate() {
        let sol = stopped(single_shaker(), Backend::RgClosedShaker, 80.0);
        let odd = photon_number(&sol, 1, 1000, false).unwrap().value;
        let even = photon_number(&sol, 2, 1000, false).unwrap().value;
        assert!(odd > 0.1 && even < 0.05 * odd, "{odd} {even}");
        let second = photon_number_second_index(&sol, 1, 1000, false).unwrap().value;
        assert!((second / odd - 1.0).abs() < 0.01);
    }

    #[test]
    fn seam_gap_is_reported() {
        let cfg = CavityConfig::dephased(1.0, 0.05, 1.0, 2);
        let rg = stopped(cfg, Backend::RgClosedDephased, 20.25);
        assert!(extension_gap(&rg).unwrap().abs() > 1e-3);
        assert!(matches!(photon_number(&rg, 1, 500, false), Err(Error::Validity(_))));
        let exact = stopped(cfg, Backend::Exact, 20.25);
        assert!(extension_gap(&exact).unwrap().abs() < 1e-9);
    }

    #[test]
    fn static_spectrum_is_empty() {
        let sol = stopped(CavityConfig::static_cavity(1.0), Backend::Exact, 4.0);
        let table = spectrum(&sol, 3, 200, false).unwrap();
        assert_eq!(table.delta, None);
        assert!(table.rows.iter().all(|r| r.quadrature.abs() < 1e-20 && r.closed.is_none()));
        let csv = table.to_csv();
        assert!(csv.starts_with("mode,n_quadrature,n_closed,delta,T\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
