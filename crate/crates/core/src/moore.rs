//! Exact evaluation of the phase functions `G` and `F` by tracing light rays
//! backwards through mirror reflections until they reach the region where
//! the field is still in its static vacuum.
//!
//! Each reflection solves `t + M(t) = x` for the reflection time (the map is
//! strictly monotone for subluminal mirrors) and the derivatives are carried
//! through the implicit-function chain rule as a [`Jet`].

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::solution::Phase;
use crate::trajectories::{CavityConfig, MirrorState};

pub const DEFAULT_ROOT_TOL: f64 = 1e-13;
pub const DEFAULT_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    cfg: CavityConfig,
    /// Root tolerance in units of `lambda`.
    pub root_tolerance: f64,
    /// Half-width of the excluded band around singular rays, in units of `lambda`.
    pub guard: f64,
}

/// Solve `f(t) = 0` for an increasing `f` given `(f, f')`, starting from a
/// bracket `[lo, hi]`. Newton steps that leave the bracket fall back to
/// bisection.
pub(crate) fn solve_increasing(
    f: impl Fn(f64) -> (f64, f64),
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::Bracket { target, lo, hi });
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        let floor = 4.0 * f64::EPSILON * x.abs();
        if step <= tol.max(floor) || hi - lo <= tol.max(floor) {
            return Ok(x);
        }
    }
    Ok(x)
}

/// Derivatives of `x -> t - M(t)` where `t` solves `t + M(t) = x`.
fn reflection_map(m: &MirrorState, sign: f64) -> (f64, f64, f64) {
    let (m1, m2, m3) = (sign * m.vel, sign * m.acc, sign * m.jerk);
    let tp = 1.0 / (1.0 + m1);
    let tpp = -m2 * tp * tp * tp;
    let tppp = -m3 * tp.powi(4) + 3.0 * m2 * m2 * tp.powi(5);
    let w1 = 1.0 - m1;
    let v1 = w1 * tp;
    let v2 = -m2 * tp * tp + w1 * tpp;
    let v3 = -m3 * tp.powi(3) - 3.0 * m2 * tp * tpp + w1 * tppp;
    (v1, v2, v3)
}

impl ExactSolution {
    pub fn new(cfg: CavityConfig) -> Result<Self> {
        let cfg = cfg.validated()?;
        Ok(Self { cfg, root_tolerance: DEFAULT_ROOT_TOL, guard: DEFAULT_GUARD })
    }

    pub fn with_guard(mut self, guard: f64) -> Self {
        self.guard = guard;
        self
    }

    pub fn config(&self) -> &CavityConfig {
        &self.cfg
    }

    /// `t` is the distance from a kink in traced coordinates and `scale` its
    /// derivative with respect to the argument, so the band is measured in
    /// argument space.
    fn check_kink(&self, arg: f64, t: f64, scale: f64) -> Result<()> {
        let band = self.guard * self.cfg.lambda * scale.abs();
        if t.abs() < band {
            return Err(Error::SingularRay { arg, ray: arg - t / scale });
        }
        if let Some(stop) = self.cfg.stop_time {
            if (t - stop).abs() < band {
                return Err(Error::SingularRay { arg, ray: arg - (t - stop) / scale });
            }
        }
        Ok(())
    }

    /// Reflection time on the right mirror: `t + R(t) = u`.
    fn right_time(&self, u: f64) -> Result<f64> {
        let (rmin, rmax) = self.cfg.right_range();
        let pad = 1e-12 * self.cfg.lambda;
        let tol = self.root_tolerance * self.cfg.lambda;
        solve_increasing(
            |t| {
                let r = self.cfg.right(t);
                (t + r.pos - u, 1.0 + r.vel)
            },
            u,
            u - rmax - pad,
            u - rmin + pad,
            tol,
        )
    }

    /// Reflection time on the left mirror: `t - L(t) = v`.
    fn left_time(&self, v: f64) -> Result<f64> {
        let (lmin, lmax) = self.cfg.left_range();
        let pad = 1e-12 * self.cfg.lambda;
        let tol = self.root_tolerance * self.cfg.lambda;
        solve_increasing(
            |t| {
                let l = self.cfg.left(t);
                (t - l.pos - v, 1.0 - l.vel)
            },
            v,
            v + lmin - pad,
            v + lmax + pad,
            tol,
        )
    }

    fn trace(&self, which: Phase, arg: f64, derivs: bool) -> Result<Jet> {
        let lam = self.cfg.lambda;
        let mut side = which;
        let mut x = arg;
        let mut offset = 0.0;
        let mut chain = Jet::var(arg);
        loop {
            match side {
                Phase::G => {
                    if x <= lam {
                        if derivs {
                            self.check_kink(arg, x - lam, chain.d1)?;
                        }
                        break;
                    }
                    let t = self.right_time(x)?;
                    let st = self.cfg.right(t);
                    if derivs {
                        self.check_kink(arg, t, chain.d1 / (1.0 + st.vel))?;
                        let (v1, v2, v3) = reflection_map(&st, 1.0);
                        chain = chain.compose(t - st.pos, v1, v2, v3);
                    }
                    x = t - st.pos;
                    offset += 2.0;
                    side = Phase::F;
                }
                Phase::F => {
                    if x <= 0.0 {
                        if derivs {
                            self.check_kink(arg, x, chain.d1)?;
                        }
                        break;
                    }
                    let t = self.left_time(x)?;
                    let st = self.cfg.left(t);
                    if derivs {
                        self.check_kink(arg, t, chain.d1 / (1.0 - st.vel))?;
                        let (v1, v2, v3) = reflection_map(&st, -1.0);
                        chain = chain.compose(t + st.pos, v1, v2, v3);
                    }
                    x = t + st.pos;
                    side = Phase::G;
                }
            }
        }
        if derivs {
            Ok(chain.scale(1.0 / lam).offset(offset))
        } else {
            Ok(Jet::constant(x / lam + offset))
        }
    }

    pub fn eval_g(&self, u: f64) -> Result<f64> {
        Ok(self.trace(Phase::G, u, false)?.v)
    }

    pub fn eval_f(&self, v: f64) -> Result<f64> {
        Ok(self.trace(Phase::F, v, false)?.v)
    }

    pub fn eval(&self, which: Phase, arg: f64) -> Result<f64> {
        Ok(self.trace(which, arg, false)?.v)
    }

    /// Value and first three derivatives; fails on singular rays.
    pub fn eval_jet(&self, which: Phase, arg: f64) -> Result<Jet> {
        self.trace(which, arg, true)
    }

    /// `(d1, d2, d3)` of `G` or `F` at `arg`.
    pub fn eval_derivs(&self, arg: f64, which: Phase) -> Result<(f64, f64, f64)> {
        let j = self.eval_jet(which, arg)?;
        Ok((j.d1, j.d2, j.d3))
    }

    /// Moore residuals at the left and right mirror.
    pub fn residual(&self, t: f64) -> Result<(f64, f64)> {
        let (l, r) = self.cfg.mirror_positions(t);
        let left = self.eval_g(t + l)? - self.eval_f(t - l)?;
        let right = self.eval_g(t + r)? - self.eval_f(t - r)? - 2.0;
        Ok((left, right))
    }

    /// Forward images of the start and stop kinks, i.e. the arguments in
    /// `[lo, hi]` where derivatives of `which` are distributional.
    pub fn singular_points(&self, which: Phase, lo: f64, hi: f64) -> Vec<f64> {
        let mut g_rays = vec![self.cfg.lambda];
        let mut f_rays = vec![0.0];
        if let Some(stop) = self.cfg.stop_time {
            g_rays.push(stop + self.cfg.right(stop).pos);
            f_rays.push(stop - self.cfg.left(stop).pos);
        }
        let mut all_g = Vec::new();
        let mut all_f = Vec::new();
        let mut guard = 0;
        while (!g_rays.is_empty() || !f_rays.is_empty()) && guard < 100_000 {
            guard += 1;
            let mut next_g = Vec::new();
            let mut next_f = Vec::new();
            for u in g_rays.drain(..) {
                if u > hi + 2.0 * self.cfg.lambda {
                    continue;
                }
                all_g.push(u);
                // reflect on the left mirror: t + L(t) = u, v = t - L(t)
                let (lmin, lmax) = self.cfg.left_range();
                let tol = self.root_tolerance * self.cfg.lambda;
                if let Ok(t) = solve_increasing(
                    |t| {
                        let l = self.cfg.left(t);
                        (t + l.pos - u, 1.0 + l.vel)
                    },
                    u,
                    u - lmax - 1e-12,
                    u - lmin + 1e-12,
                    tol,
                ) {
                    next_f.push(t - self.cfg.left(t).pos);
                }
            }
            for v in f_rays.drain(..) {
                if v > hi + 2.0 * self.cfg.lambda {
                    continue;
                }
                all_f.push(v);
                // reflect on the right mirror: t - R(t) = v, u = t + R(t)
                let (rmin, rmax) = self.cfg.right_range();
                let tol = self.root_tolerance * self.cfg.lambda;
                if let Ok(t) = solve_increasing(
                    |t| {
                        let r = self.cfg.right(t);
                        (t - r.pos - v, 1.0 - r.vel)
                    },
                    v,
                    v + rmin - 1e-12,
                    v + rmax + 1e-12,
                    tol,
                ) {
                    next_g.push(t + self.cfg.right(t).pos);
                }
            }
            g_rays = next_g;
            f_rays = next_f;
        }
        let mut pts = match which {
            Phase::G => all_g,
            Phase::F => all_f,
        };
        pts.retain(|&p| p >= lo && p <= hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbative::eval_pert;

    fn shaker() -> ExactSolution {
        ExactSolution::new(CavityConfig::two_mirror(1.0, 0.03, 1.0, 1.0, 3, 0.0)).unwrap()
    }

    #[test]
    fn static_cavity_is_linear() {
        let s = ExactSolution::new(CavityConfig::static_cavity(1.0)).unwrap();
        assert!((s.eval_g(3.7).unwrap() - 3.7).abs() < 1e-12);
        assert!((s.eval_f(-2.0).unwrap() + 2.0).abs() < 1e-15);
        let (d1, d2, d3) = s.eval_derivs(3.7, Phase::G).unwrap();
        assert!((d1 - 1.0).abs() < 1e-14 && d2.abs() < 1e-14 && d3.abs() < 1e-14);
        let (l, r) = s.residual(5.0).unwrap();
        assert!(l.abs() < 1e-14 && r.abs() < 1e-14);
    }

    #[test]
    fn pre_motion_regions() {
        let s = shaker();
        assert_eq!(s.eval_g(0.5).unwrap(), 0.5);
        assert_eq!(s.eval_f(-0.1).unwrap(), -0.1);
        let (d1, d2, d3) = s.eval_derivs(0.4, Phase::G).unwrap();
        assert_eq!((d1, d2, d3), (1.0, 0.0, 0.0));
    }

    #[test]
    fn agrees_with_first_order_theory() {
        // the gap is second order: gap / eps^2 settles as eps shrinks
        let mut ratios = Vec::new();
        for eps in [0.004, 0.002, 0.001] {
            let s = ExactSolution::new(CavityConfig::two_mirror(1.0, eps, 1.0, 1.0, 3, 0.0)).unwrap();
            let (gp, _) = eval_pert(s.config(), 2.3);
            let (_, fp) = eval_pert(s.config(), 1.6);
            let dg = (s.eval_g(2.3).unwrap() - gp) / (eps * eps);
            let df = (s.eval_f(1.6).unwrap() - fp) / (eps * eps);
            assert!(dg.abs() < 10.0 * 2.3 * 2.3 && df.abs() < 10.0 * 1.6 * 1.6 * 2.0);
            ratios.push(dg);
        }
        assert!((ratios[2] - ratios[1]).abs() < 0.7 * (ratios[1] - ratios[0]).abs() + 1e-3);
    }

    fn fd5(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
        let (m2, m1, c, p1, p2) = (f(x - 2.0 * h), f(x - h), f(x), f(x + h), f(x + 2.0 * h));
        (
            (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h),
            (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * h * h),
        )
    }

    #[test]
    fn chain_rule_matches_finite_differences() {
        let s = shaker();
        for (which, x) in [(Phase::G, 2.3), (Phase::F, 1.6), (Phase::G, 7.77), (Phase::F, 11.2)] {
            let (d1, d2, _) = s.eval_derivs(x, which).unwrap();
            let (f1, _) = fd5(|y| s.eval(which, y).unwrap(), x, 1e-4);
            let (_, f2) = fd5(|y| s.eval(which, y).unwrap(), x, 2e-3);
            assert!(((d1 - f1) / d1).abs() < 1e-6, "{which:?} {x}: {d1} vs {f1}");
            assert!(((d2 - f2) / d2.abs().max(1e-2)).abs() < 1e-4, "{which:?} {x}: {d2} vs {f2}");
        }
    }

    #[test]
    fn singular_rays_are_flagged() {
        let s = shaker();
        assert!(matches!(s.eval_derivs(1.0, Phase::G), Err(Error::SingularRay { .. })));
        assert!(matches!(s.eval_derivs(0.0, Phase::F), Err(Error::SingularRay { .. })));
        let rays = s.singular_points(Phase::G, 0.0, 10.0);
        assert!((rays[0] - 1.0).abs() < 1e-12);
        for r in &rays {
            assert!(matches!(s.eval_derivs(*r, Phase::G), Err(Error::SingularRay { .. })), "{r}");
        }
        assert!(rays.len() >= 4);
    }

    #[test]
    fn residuals_vanish() {
        let s = shaker();
        let (l, r) = s.residual(7.3).unwrap();
        assert!(l.abs() < 1e-10 && r.abs() < 1e-10);
        let d = ExactSolution::new(CavityConfig::dephased(1.0, 0.02, 1.0, 2)).unwrap();
        let (l, r) = d.residual(12.1).unwrap();
        assert!(l.abs() < 1e-10 && r.abs() < 1e-10);
    }

    #[test]
    fn stopped_cavity_returns_to_static_slope() {
        let cfg = CavityConfig::two_mirror(1.0, 0.02, 1.0, 0.5, 3, 0.0).with_stop(4.0);
        let s = ExactSolution::new(cfg).unwrap();
        let g = |u: f64| s.eval_g(u).unwrap();
        // after the stop, G(u + 2 lambda) = G(u) + 2
        for u in [9.1, 9.6, 10.3] {
            assert!((g(u + 2.0) - g(u) - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn superluminal_rejected() {
        assert!(ExactSolution::new(CavityConfig::two_mirror(1.0, 0.2, 1.0, 1.0, 2, 0.0)).is_err());
    }
}
