//! Globally adaptive Gauss-Kronrod (7, 15) quadrature.
//!
//! Intervals are split at caller-supplied breakpoints (kinks of the phase
//! functions) and capped at `max_panel` so oscillatory integrands start from
//! panels that resolve their period.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Upper bound on the number of panels.
    pub max_panels: usize,
    /// Initial panels are no longer than this.
    pub max_panel: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-10, max_panels: 20_000, max_panel: f64::INFINITY }
    }
}

/// Node abscissae of one panel, in the order used by the weights.
fn nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [0.0; 15];
    for i in 0..7 {
        x[2 * i] = c - h * XGK[i];
        x[2 * i + 1] = c + h * XGK[i];
    }
    x[14] = c;
    x
}

/// Kronrod and Gauss weights matching [`nodes`].
fn weights() -> ([f64; 15], [f64; 15]) {
    let mut k = [0.0; 15];
    let mut g = [0.0; 15];
    for i in 0..7 {
        k[2 * i] = WGK[i];
        k[2 * i + 1] = WGK[i];
        if i % 2 == 1 {
            g[2 * i] = WG[i / 2];
            g[2 * i + 1] = WG[i / 2];
        }
    }
    k[14] = WGK[7];
    g[14] = WG[3];
    (k, g)
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

fn initial_edges(breaks: &[f64], max_panel: f64) -> Vec<f64> {
    let mut edges = vec![breaks[0]];
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let n = if max_panel.is_finite() { (len / max_panel).ceil().max(1.0) as usize } else { 1 };
        for i in 1..=n {
            edges.push(if i == n { w[1] } else { w[0] + len * i as f64 / n as f64 });
        }
    }
    edges
}

fn sorted_breaks(a: f64, b: f64, interior: &[f64]) -> Vec<f64> {
    let mut v = vec![a];
    v.extend(interior.iter().copied().filter(|&x| x > a && x < b));
    v.push(b);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Vector-valued adaptive integration; `f(x, out)` fills `dim` values.
pub fn integrate_cvec<F>(f: F, dim: usize, a: f64, b: f64, breaks: &[f64], opts: &QuadOptions) -> Result<(Vec<Complex64>, f64)>
where
    F: Fn(f64, &mut [Complex64]) -> Result<()>,
{
    let (wk, wg) = weights();
    let mut buf = vec![Complex64::new(0.0, 0.0); dim];
    let mut rule = |lo: f64, hi: f64| -> Result<(Vec<Complex64>, f64)> {
        let h = 0.5 * (hi - lo);
        let mut k = vec![Complex64::new(0.0, 0.0); dim];
        let mut g = vec![Complex64::new(0.0, 0.0); dim];
        for (i, x) in nodes(lo, hi).into_iter().enumerate() {
            f(x, &mut buf)?;
            for d in 0..dim {
                k[d] += buf[d] * wk[i];
                g[d] += buf[d] * wg[i];
            }
        }
        let mut err = 0.0f64;
        for d in 0..dim {
            k[d] *= h;
            err = err.max(((k[d] - g[d] * h).norm()).abs());
        }
        Ok((k, err))
    };
    let edges = initial_edges(&sorted_breaks(a, b, breaks), opts.max_panel);
    let mut heap = BinaryHeap::new();
    for w in edges.windows(2) {
        let (value, err) = rule(w[0], w[1])?;
        heap.push(Panel { a: w[0], b: w[1], value, err });
    }
    let mut sum = vec![Complex64::new(0.0, 0.0); dim];
    let mut err_sum = 0.0;
    for p in heap.iter() {
        for (acc, v) in sum.iter_mut().zip(&p.value) {
            *acc += v;
        }
        err_sum += p.err;
    }
    loop {
        let scale = sum.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if err_sum <= opts.abs_tol.max(opts.rel_tol * scale) {
            break;
        }
        if heap.len() >= opts.max_panels {
            return Err(Error::Quadrature { estimate: scale, error: err_sum });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = rule(worst.a, mid)?;
        let (v2, e2) = rule(mid, worst.b)?;
        for d in 0..dim {
            sum[d] += v1[d] + v2[d] - worst.value[d];
        }
        err_sum += e1 + e2 - worst.err;
        heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
    }
    // resum to drop the drift of the running totals
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    let mut err = 0.0;
    for p in heap.iter() {
        for (acc, v) in out.iter_mut().zip(&p.value) {
            *acc += v;
        }
        err += p.err;
    }
    Ok((out, err))
}

/// Complex scalar integration.
pub fn integrate_complex<F>(f: F, a: f64, b: f64, breaks: &[f64], opts: &QuadOptions) -> Result<(Complex64, f64)>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let (v, e) = integrate_cvec(
        |x, out| {
            out[0] = f(x)?;
            Ok(())
        },
        1,
        a,
        b,
        breaks,
        opts,
    )?;
    Ok((v[0], e))
}

/// Real scalar integration.
pub fn integrate<F>(f: F, a: f64, b: f64, breaks: &[f64], opts: &QuadOptions) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let (v, e) = integrate_complex(|x| Ok(Complex64::new(f(x)?, 0.0)), a, b, breaks, opts)?;
    Ok((v.re, e))
}
