//! First-order solution in the mirror amplitude.

use std::f64::consts::PI;

use crate::jet::Jet;
use crate::trajectories::{parity_sign, CavityConfig};

/// `t = (2k+1) lambda + z = 2p lambda + omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDecomposition {
    pub k: u64,
    pub p: u64,
    pub z: f64,
    pub omega: f64,
}

/// Split `t >= 0` into the two interval labelings used by the periodic
/// corrections. Exact multiples of `lambda` take the floor.
pub fn phase_decompose(t: f64, lambda: f64) -> PhaseDecomposition {
    let n = (t / lambda).floor().max(0.0) as u64;
    let (k, p) = if n.is_multiple_of(2) { (n / 2, n / 2) } else { ((n - 1) / 2, n.div_ceil(2)) };
    PhaseDecomposition {
        k,
        p,
        z: t - (2 * k + 1) as f64 * lambda,
        omega: t - (2 * p) as f64 * lambda,
    }
}

/// `(G, F)` to first order in epsilon, with derivatives.
pub fn eval_pert_jet(cfg: &CavityConfig, t: f64) -> (Jet, Jet) {
    let lam = cfg.lambda;
    let tj = Jet::var(t);
    if t < 0.0 {
        let base = Jet::new(t / lam, 1.0 / lam, 0.0, 0.0);
        return (base, base);
    }
    let dec = phase_decompose(t, lam);
    let theta = tj * (cfg.q as f64 * PI / lam);
    let sin_theta = theta.sin();
    let left_secular = (t - dec.z - lam) / lam;
    let right_secular = (t - dec.omega) / lam;
    let right_shape = (theta + cfg.phi).sin() * parity_sign(cfg.q) + cfg.phi.sin();
    let eps = cfg.epsilon;
    let g = tj.scale(1.0 / lam)
        + sin_theta * (eps * cfg.amp_left / lam * left_secular)
        + right_shape * (eps * cfg.amp_right / lam * right_secular);
    let f = g + sin_theta * (2.0 * eps * cfg.amp_left / lam);
    (g, f)
}

pub fn eval_pert(cfg: &CavityConfig, t: f64) -> (f64, f64) {
    let (g, f) = eval_pert_jet(cfg, t);
    (g.v, f.v)
}
