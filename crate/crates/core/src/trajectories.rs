//! Mirror trajectories, resonance parameters and regime classification.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance (times `1/lambda`) used to decide that `a` or
/// `b` vanishes.
pub const REGIME_ZERO_TOL: f64 = 1e-14;

const GRID_TOL: f64 = 1e-9;

/// Which harmonic family the mirrors follow; selects the rest length after
/// the stop time and the admissible stop grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MotionFamily {
    /// Both mirrors oscillate; they come back to `(0, lambda)` at `T = 2k lambda / q`.
    #[default]
    TwoMirror,
    /// Static left mirror, right mirror `lambda - 2 eps A_R sin^2(q pi t / 2 lambda)`;
    /// rests at the time-averaged length for `T = (2k+1) lambda / (2q)`.
    DephasedRight,
}

impl MotionFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            MotionFamily::TwoMirror => "two_mirror",
            MotionFamily::DephasedRight => "dephased_right",
        }
    }
}

/// Physical parameters of the two-mirror motion.
///
/// `amp_left` and `amp_right` are lengths (the mirror displacement is
/// `epsilon * amp`), so `a` and `b` come out as inverse lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub lambda: f64,
    pub epsilon: f64,
    pub amp_left: f64,
    pub amp_right: f64,
    pub q: u32,
    pub phi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_time: Option<f64>,
    #[serde(default)]
    pub motion_family: MotionFamily,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorState {
    pub pos: f64,
    pub vel: f64,
    pub acc: f64,
    pub jerk: f64,
}

impl MirrorState {
    const fn rest(pos: f64) -> Self {
        Self { pos, vel: 0.0, acc: 0.0, jerk: 0.0 }
    }
}

impl CavityConfig {
    /// A cavity whose walls never move.
    pub fn static_cavity(lambda: f64) -> Self {
        Self {
            lambda,
            epsilon: 0.0,
            amp_left: 0.0,
            amp_right: 0.0,
            q: 1,
            phi: 0.0,
            stop_time: None,
            motion_family: MotionFamily::TwoMirror,
        }
    }

    pub fn two_mirror(lambda: f64, epsilon: f64, amp_left: f64, amp_right: f64, q: u32, phi: f64) -> Self {
        Self {
            lambda,
            epsilon,
            amp_left,
            amp_right,
            q,
            phi,
            stop_time: None,
            motion_family: MotionFamily::TwoMirror,
        }
    }

    /// Single right mirror dephased by `pi/2`.
    pub fn dephased(lambda: f64, epsilon: f64, amp_right: f64, q: u32) -> Self {
        Self {
            lambda,
            epsilon,
            amp_left: 0.0,
            amp_right,
            q,
            phi: FRAC_PI_2,
            stop_time: None,
            motion_family: MotionFamily::DephasedRight,
        }
    }

    pub fn with_stop(mut self, stop: f64) -> Self {
        self.stop_time = Some(stop);
        self
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Time-averaged cavity length of the dephased motion.
    pub fn lambda_eff(&self) -> f64 {
        self.lambda - self.epsilon * self.amp_right
    }

    /// Cavity length once the walls have stopped.
    pub fn rest_length(&self) -> f64 {
        match self.motion_family {
            MotionFamily::TwoMirror => self.lambda,
            MotionFamily::DephasedRight => self.lambda_eff(),
        }
    }

    /// Angular factor `q pi / lambda`.
    pub fn omega(&self) -> f64 {
        self.q as f64 * PI / self.lambda
    }

    pub fn max_speed(&self) -> f64 {
        self.epsilon * self.amp_left.max(self.amp_right) * self.omega()
    }

    fn moving(&self, t: f64) -> bool {
        t >= 0.0 && self.stop_time.is_none_or(|stop| t < stop)
    }

    pub fn left(&self, t: f64) -> MirrorState {
        if !self.moving(t) {
            return MirrorState::rest(0.0);
        }
        let w = self.omega();
        let k = self.epsilon * self.amp_left;
        let (s, c) = (w * t).sin_cos();
        MirrorState {
            pos: k * s,
            vel: k * w * c,
            acc: -k * w * w * s,
            jerk: -k * w * w * w * c,
        }
    }

    pub fn right(&self, t: f64) -> MirrorState {
        if t < 0.0 {
            return MirrorState::rest(self.lambda);
        }
        if !self.moving(t) {
            return MirrorState::rest(self.rest_length());
        }
        let w = self.omega();
        let k = self.epsilon * self.amp_right;
        let (s, c) = (w * t + self.phi).sin_cos();
        MirrorState {
            pos: self.lambda - k * self.phi.sin() + k * s,
            vel: k * w * c,
            acc: -k * w * w * s,
            jerk: -k * w * w * w * c,
        }
    }

    /// `(L(t), R(t))`.
    pub fn mirror_positions(&self, t: f64) -> (f64, f64) {
        (self.left(t).pos, self.right(t).pos)
    }

    /// Bounds on `R(t)` over all times.
    pub(crate) fn right_range(&self) -> (f64, f64) {
        let k = self.epsilon * self.amp_right;
        let centre = self.lambda - k * self.phi.sin();
        let rest = self.rest_length();
        (
            (centre - k).min(self.lambda).min(rest),
            (centre + k).max(self.lambda).max(rest),
        )
    }

    pub(crate) fn left_range(&self) -> (f64, f64) {
        let k = self.epsilon * self.amp_left;
        (-k, k)
    }

    pub fn resonance_params(&self) -> ResonanceParams {
        resonance_params(self)
    }

    pub fn regime(&self) -> RegimeClass {
        classify_regime(&self.resonance_params(), REGIME_ZERO_TOL / self.lambda)
    }

    pub fn on_stop_grid(&self, stop: f64) -> bool {
        let units = stop / self.lambda * self.q as f64;
        match self.motion_family {
            MotionFamily::TwoMirror => is_integer(units / 2.0),
            MotionFamily::DephasedRight => {
                let k = 2.0 * units;
                is_integer(k) && (k.round() as i64) % 2 == 1
            }
        }
    }
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < GRID_TOL * x.abs().max(1.0)
}

/// The pair `(a, b)` governing secular growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceParams {
    pub a: f64,
    pub b: f64,
}

/// `(-1)^(q+1)`.
pub fn parity_sign(q: u32) -> f64 {
    if q % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

pub fn resonance_params(cfg: &CavityConfig) -> ResonanceParams {
    let l = cfg.lambda;
    let s = parity_sign(cfg.q);
    let pre = cfg.epsilon / l * FRAC_PI_2;
    ResonanceParams {
        a: pre * (cfg.amp_left / l + cfg.amp_right / l * s * cfg.phi.cos()),
        b: pre * (cfg.amp_right / l) * s * cfg.phi.sin(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RegimeClass {
    NoRadiation,
    ExponentialA,
    PowerLawB,
    ExponentialAB,
}

impl RegimeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeClass::NoRadiation => "no_radiation",
            RegimeClass::ExponentialA => "exponential_a",
            RegimeClass::PowerLawB => "power_law_b",
            RegimeClass::ExponentialAB => "exponential_ab",
        }
    }
}

impl fmt::Display for RegimeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify_regime(p: &ResonanceParams, zero_tol: f64) -> RegimeClass {
    match (p.a.abs() < zero_tol, p.b.abs() < zero_tol) {
        (true, true) => RegimeClass::NoRadiation,
        (false, true) => RegimeClass::ExponentialA,
        (true, false) => RegimeClass::PowerLawB,
        (false, false) => RegimeClass::ExponentialAB,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invariant {
    PositiveLength,
    Amplitude,
    AmplitudeNonNegative,
    Frequency,
    PhaseRange,
    Subluminal,
    StopTimeNegative,
    StopGrid,
    DephasedShape,
}

/// One broken invariant with the value that broke it.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub invariant: Invariant,
    pub value: f64,
    pub detail: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {} (got {})", self.invariant, self.detail, self.value)
    }
}

/// Every violated invariant of `cfg`; empty when the config is usable.
pub fn validate(cfg: &CavityConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |invariant, value, detail| out.push(Violation { invariant, value, detail });
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        push(Invariant::PositiveLength, cfg.lambda, "lambda must be positive and finite");
    }
    if !(0.0..1.0).contains(&cfg.epsilon) {
        push(Invariant::Amplitude, cfg.epsilon, "epsilon must lie in [0, 1)");
    }
    if !(cfg.amp_left >= 0.0) {
        push(Invariant::AmplitudeNonNegative, cfg.amp_left, "amp_left must be >= 0");
    }
    if !(cfg.amp_right >= 0.0) {
        push(Invariant::AmplitudeNonNegative, cfg.amp_right, "amp_right must be >= 0");
    }
    if cfg.q == 0 {
        push(Invariant::Frequency, 0.0, "q must be a positive integer");
    }
    if !(0.0..TAU).contains(&cfg.phi) {
        push(Invariant::PhaseRange, cfg.phi, "phi must lie in [0, 2 pi)");
    }
    let speed = cfg.max_speed();
    if !(speed < 1.0) {
        push(Invariant::Subluminal, speed, "maximum mirror speed must be below 1");
    }
    if cfg.motion_family == MotionFamily::DephasedRight
        && (cfg.amp_left != 0.0 || (cfg.phi - FRAC_PI_2).abs() > 1e-12)
    {
        push(
            Invariant::DephasedShape,
            cfg.phi,
            "dephased_right needs amp_left = 0 and phi = pi/2",
        );
    }
    if let Some(stop) = cfg.stop_time {
        if !(stop >= 0.0) {
            push(Invariant::StopTimeNegative, stop, "stop_time must be >= 0");
        } else if cfg.q > 0 && cfg.lambda > 0.0 && !cfg.on_stop_grid(stop) {
            push(Invariant::StopGrid, stop / cfg.lambda, "stop_time off the family's stop grid");
        }
    }
    out
}

impl CavityConfig {
    pub fn validated(self) -> Result<Self> {
        let v = validate(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidConfig(v))
        }
    }
}
