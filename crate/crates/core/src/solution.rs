//! One evaluation interface over every backend.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::moore::{ExactSolution, DEFAULT_GUARD};
use crate::perturbative::eval_pert_jet;
use crate::rg;
use crate::trajectories::{CavityConfig, MotionFamily, ResonanceParams, REGIME_ZERO_TOL};

/// Which phase function: `G` (argument `t + x`) or `F` (argument `t - x`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    G,
    F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exact,
    Perturbative,
    RgClosedShaker,
    RgClosedDephased,
    RgSeries,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Perturbative => "perturbative",
            Backend::RgClosedShaker => "rg_closed_shaker",
            Backend::RgClosedDephased => "rg_closed_dephased",
            Backend::RgSeries => "rg_series",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Extension {
    stop: f64,
    rest: f64,
}

#[derive(Debug, Clone)]
pub struct FieldSolution {
    backend: Backend,
    cfg: CavityConfig,
    params: ResonanceParams,
    truncation: Option<usize>,
    exact: Option<ExactSolution>,
    extension: Option<Extension>,
    guard: f64,
}

impl FieldSolution {
    pub fn new(cfg: CavityConfig, backend: Backend) -> Result<Self> {
        let cfg = cfg.validated()?;
        let params = cfg.resonance_params();
        let tol = REGIME_ZERO_TOL / cfg.lambda;
        match backend {
            Backend::RgClosedShaker if params.b.abs() > tol => {
                return Err(Error::RegimeMismatch { backend: backend.as_str(), regime: cfg.regime().as_str() });
            }
            Backend::RgClosedDephased
                if params.a.abs() > tol || cfg.amp_left != 0.0 || (cfg.phi - FRAC_PI_2).abs() > 1e-12 =>
            {
                return Err(Error::RegimeMismatch { backend: backend.as_str(), regime: cfg.regime().as_str() });
            }
            _ => {}
        }
        // the RG forms describe motion that never stops; a stop is added by extension
        let exact = match backend {
            Backend::Exact => Some(ExactSolution::new(cfg)?),
            _ => None,
        };
        Ok(Self { backend, cfg, params, truncation: None, exact, extension: None, guard: DEFAULT_GUARD })
    }

    pub fn exact(cfg: CavityConfig) -> Result<Self> {
        Self::new(cfg, Backend::Exact)
    }

    pub fn perturbative(cfg: CavityConfig) -> Result<Self> {
        Self::new(cfg, Backend::Perturbative)
    }

    /// Closed form when one is available, the series otherwise.
    pub fn auto_rg(cfg: CavityConfig) -> Result<Self> {
        Self::new(cfg, Backend::RgClosedShaker)
            .or_else(|_| Self::new(cfg, Backend::RgClosedDephased))
            .or_else(|_| Self::new(cfg, Backend::RgSeries))
    }

    pub fn series(cfg: CavityConfig, truncation: Option<usize>) -> Result<Self> {
        let mut s = Self::new(cfg, Backend::RgSeries)?;
        s.truncation = truncation;
        Ok(s)
    }

    pub fn with_guard(mut self, guard: f64) -> Self {
        self.guard = guard;
        if let Some(ex) = self.exact.take() {
            self.exact = Some(ex.with_guard(guard));
        }
        self
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn config(&self) -> &CavityConfig {
        &self.cfg
    }

    pub fn params(&self) -> ResonanceParams {
        self.params
    }

    pub fn truncation(&self) -> Option<usize> {
        self.truncation
    }

    /// Stop time if the solution covers the post-stop static cavity.
    pub fn stop_time(&self) -> Option<f64> {
        match self.backend {
            Backend::Exact => self.cfg.stop_time,
            _ => self.extension.map(|e| e.stop),
        }
    }

    pub fn is_extended(&self) -> bool {
        self.stop_time().is_some()
    }

    /// Cavity length after the stop.
    pub fn rest_length(&self) -> f64 {
        self.cfg.rest_length()
    }

    /// Periodized continuation past the stop time `stop`.
    pub fn extend_post_stop(&self, stop: f64) -> Result<Self> {
        if !(stop >= 0.0) || !self.cfg.on_stop_grid(stop) {
            return Err(Error::OffGridStop { stop });
        }
        let mut out = self.clone();
        out.cfg.stop_time = Some(stop);
        match self.backend {
            Backend::Exact => {
                out.exact = Some(ExactSolution::new(out.cfg)?.with_guard(self.guard));
            }
            _ => {
                out.extension = Some(Extension { stop, rest: out.cfg.rest_length() });
            }
        }
        Ok(out)
    }

    fn raw_jets(&self, t: f64) -> Result<(Jet, Jet)> {
        match self.backend {
            Backend::Perturbative => Ok(eval_pert_jet(&self.cfg, t)),
            Backend::RgClosedShaker => Ok(rg::shaker_jet(&self.cfg, t)),
            Backend::RgClosedDephased => Ok(rg::dephased_jet(&self.cfg, t)),
            Backend::RgSeries => rg::series_jet(&self.cfg, t, self.truncation),
            Backend::Exact => unreachable!("exact backend traces characteristics"),
        }
    }

    /// Kinks of the approximate forms in raw time: the light cone of the
    /// start at multiples of `lambda`, plus the junctions of the extension.
    fn raw_kinks_near(&self, t: f64) -> bool {
        let lam = self.cfg.lambda;
        let band = self.guard * lam;
        let n = (t / lam).round();
        if n >= 0.0 && (t - n * lam).abs() < band {
            return true;
        }
        if let Some(e) = self.extension {
            for k in [e.stop - e.rest, e.stop, e.stop + e.rest] {
                if (t - k).abs() < band {
                    return true;
                }
            }
        }
        false
    }

    /// Map an argument onto the raw backend: `(raw time, use F, offset)`.
    fn fold(&self, which: Phase, arg: f64) -> (f64, Phase, f64) {
        let Some(e) = self.extension else {
            return (arg, which, 0.0);
        };
        let which = if which == Phase::F && arg >= e.stop { Phase::G } else { which };
        if which == Phase::F || arg <= e.stop + e.rest {
            return (arg, which, 0.0);
        }
        let period = 2.0 * e.rest;
        let n = ((arg - e.stop - e.rest) / period).ceil();
        let t = arg - n * period;
        let side = if t < e.stop { Phase::F } else { Phase::G };
        (t, side, 2.0 * n)
    }

    fn approx_jet(&self, which: Phase, arg: f64, check: bool) -> Result<Jet> {
        let (t, side, offset) = self.fold(which, arg);
        if check && self.raw_kinks_near(t) {
            return Err(Error::SingularRay { arg, ray: arg - t + (t / self.cfg.lambda).round() * self.cfg.lambda });
        }
        let (g, f) = self.raw_jets(t)?;
        let j = match side {
            Phase::G => g,
            Phase::F => f,
        };
        Ok(j.offset(offset))
    }

    pub fn eval(&self, which: Phase, arg: f64) -> Result<f64> {
        match &self.exact {
            Some(ex) => ex.eval(which, arg),
            None => Ok(self.approx_jet(which, arg, false)?.v),
        }
    }

    /// Value and three derivatives; fails on singular rays.
    pub fn eval_jet(&self, which: Phase, arg: f64) -> Result<Jet> {
        match &self.exact {
            Some(ex) => ex.eval_jet(which, arg),
            None => self.approx_jet(which, arg, true),
        }
    }

    /// `(G(t), F(t))`.
    pub fn eval_gf(&self, t: f64) -> Result<(f64, f64)> {
        Ok((self.eval(Phase::G, t)?, self.eval(Phase::F, t)?))
    }

    /// Arguments in `[lo, hi]` where derivatives of `which` are not smooth.
    pub fn singular_points(&self, which: Phase, lo: f64, hi: f64) -> Vec<f64> {
        if let Some(ex) = &self.exact {
            return ex.singular_points(which, lo, hi);
        }
        let lam = self.cfg.lambda;
        let mut base = Vec::new();
        let limit = self.extension.map_or(hi, |e| (e.stop + e.rest).min(hi));
        let mut n = (lo / lam).ceil().max(0.0);
        while n * lam <= limit {
            base.push(n * lam);
            n += 1.0;
        }
        if let Some(e) = self.extension {
            let period = 2.0 * e.rest;
            let mut seeds = vec![e.stop - e.rest, e.stop, e.stop + e.rest];
            let mut m = ((e.stop - e.rest) / lam).ceil();
            while m * lam <= e.stop + e.rest {
                seeds.push(m * lam);
                m += 1.0;
            }
            for s in seeds {
                let mut k = ((lo - s) / period).ceil().max(0.0);
                while s + k * period <= hi {
                    base.push(s + k * period);
                    k += 1.0;
                }
            }
        }
        base.retain(|&p| p >= lo && p <= hi);
        base.sort_by(f64::total_cmp);
        base.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * lam);
        base
    }

    /// Staircase jump locations in `[lo, hi]`.
    pub fn jump_times(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        rg::jump_times(&self.cfg, lo, hi)
    }

    /// Mode `psi_n(t, x)` built from the phase functions, together with its
    /// time derivative.
    pub fn mode_function(&self, n: u32, t: f64, x: f64) -> Result<(num_complex::Complex64, num_complex::Complex64)> {
        use num_complex::Complex64;
        use std::f64::consts::PI;
        let g = self.eval_jet(Phase::G, t + x)?;
        let f = self.eval_jet(Phase::F, t - x)?;
        let nf = n as f64;
        let norm = Complex64::new(0.0, 1.0 / (4.0 * PI * nf).sqrt());
        let eg = Complex64::from_polar(1.0, -PI * nf * g.v);
        let ef = Complex64::from_polar(1.0, -PI * nf * f.v);
        let psi = norm * (eg - ef);
        let dt = norm * Complex64::new(0.0, -PI * nf) * (eg * g.d1 - ef * f.d1);
        Ok((psi, dt))
    }

    pub fn motion_family(&self) -> MotionFamily {
        self.cfg.motion_family
    }
}
