//! Third-order forward-mode derivatives.
//!
//! A [`Jet`] carries a value together with its first three derivatives with
//! respect to a single scalar variable. Every closed-form phase function in
//! this crate is written once over `Jet`, so values and the derivatives
//! needed by the renormalized stress tensor come from the same expression
//! with no finite differencing.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet {
    pub const fn new(v: f64, d1: f64, d2: f64, d3: f64) -> Self {
        Self { v, d1, d2, d3 }
    }

    pub const fn constant(v: f64) -> Self {
        Self::new(v, 0.0, 0.0, 0.0)
    }

    /// The independent variable itself.
    pub const fn var(v: f64) -> Self {
        Self::new(v, 1.0, 0.0, 0.0)
    }

    /// Chain rule: `f(self)` given `f` and its first three derivatives at `self.v`.
    pub fn compose(self, f0: f64, f1: f64, f2: f64, f3: f64) -> Self {
        let (g1, g2, g3) = (self.d1, self.d2, self.d3);
        Self::new(
            f0,
            f1 * g1,
            f2 * g1 * g1 + f1 * g2,
            f3 * g1 * g1 * g1 + 3.0 * f2 * g1 * g2 + f1 * g3,
        )
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(k * self.v, k * self.d1, k * self.d2, k * self.d3)
    }

    pub fn offset(self, k: f64) -> Self {
        Self::new(self.v + k, self.d1, self.d2, self.d3)
    }

    pub fn recip(self) -> Self {
        let x = self.v;
        let r = 1.0 / x;
        self.compose(r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r)
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.compose(s, c, -s, -c)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.compose(c, -s, -c, s)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e, e)
    }

    pub fn ln(self) -> Self {
        let x = self.v;
        self.compose(x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let x = self.v;
        self.compose(s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x))
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn tanh(self) -> Self {
        let t = self.v.tanh();
        let s = 1.0 - t * t;
        self.compose(t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0))
    }

    pub fn atan(self) -> Self {
        let x = self.v;
        let r = 1.0 / (1.0 + x * x);
        self.compose(
            x.atan(),
            r,
            -2.0 * x * r * r,
            (6.0 * x * x - 2.0) * r * r * r,
        )
    }

    /// Four-quadrant angle of `(x, y)` with the principal value and analytic
    /// derivatives.
    pub fn atan2(y: Jet, x: Jet) -> Jet {
        let value = y.v.atan2(x.v);
        let local = if x.v.abs() >= y.v.abs() {
            (y / x).atan()
        } else {
            -(x / y).atan()
        };
        Jet::new(value, local.d1, local.d2, local.d3)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::new(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2, self.d3 + o.d3)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::new(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2, self.d3 - o.d3)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet::new(-self.v, -self.d1, -self.d2, -self.d3)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet::new(
            self.v * o.v,
            self.d1 * o.v + self.v * o.d1,
            self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
            self.d3 * o.v + 3.0 * self.d2 * o.d1 + 3.0 * self.d1 * o.d2 + self.v * o.d3,
        )
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, k: f64) -> Jet {
        self.offset(k)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, k: f64) -> Jet {
        self.offset(-k)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, k: f64) -> Jet {
        self.scale(k)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j.scale(self)
    }
}

/// Complex number whose parts are jets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CJet {
    pub re: Jet,
    pub im: Jet,
}

impl CJet {
    pub const fn new(re: Jet, im: Jet) -> Self {
        Self { re, im }
    }

    pub const fn real(re: Jet) -> Self {
        Self::new(re, Jet::constant(0.0))
    }

    pub const fn one() -> Self {
        Self::real(Jet::constant(1.0))
    }

    /// `exp(i * phase)`.
    pub fn cis(phase: Jet) -> Self {
        Self::new(phase.cos(), phase.sin())
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    pub fn norm_sqr(self) -> Jet {
        self.re * self.re + self.im * self.im
    }

    pub fn arg(self) -> Jet {
        Jet::atan2(self.im, self.re)
    }

    pub fn scale(self, k: Jet) -> Self {
        Self::new(self.re * k, self.im * k)
    }

    pub fn recip(self) -> Self {
        let n = self.norm_sqr().recip();
        Self::new(self.re * n, -(self.im * n))
    }
}

impl Add for CJet {
    type Output = CJet;
    fn add(self, o: CJet) -> CJet {
        CJet::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for CJet {
    type Output = CJet;
    fn sub(self, o: CJet) -> CJet {
        CJet::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for CJet {
    type Output = CJet;
    fn mul(self, o: CJet) -> CJet {
        CJet::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

impl Div for CJet {
    type Output = CJet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: CJet) -> CJet {
        self * o.recip()
    }
}
