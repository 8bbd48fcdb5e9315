//! Globally adaptive Gauss–Legendre quadrature on finite intervals.
//!
//! Each panel is estimated twice, once with a single 15-point rule and once
//! with the same rule on both halves. The difference bounds the error of the
//! refined value, and the panel with the largest bound is split next.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const ORDER: usize = 15;

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Relative tolerance on the total.
    pub rtol: f64,
    /// Absolute tolerance on the total.
    pub atol: f64,
    /// Maximum number of panel splits.
    pub max_splits: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-14,
            max_splits: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        Self {
            rtol,
            ..Self::default()
        }
    }
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn nodes() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static CELL: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    CELL.get_or_init(|| gauss_legendre(ORDER))
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
fn gauss_legendre<const N: usize>(n: usize) -> ([f64; N], [f64; N]) {
    let mut x = [0.0; N];
    let mut w = [0.0; N];
    let nf = n as f64;
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn rule<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> f64 {
    let (x, w) = nodes();
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..ORDER {
        s += w[i] * f(c + h * x[i]);
    }
    s * h
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let whole = rule(f, a, b);
    let m = 0.5 * (a + b);
    let halves = rule(f, a, m) + rule(f, m, b);
    Panel {
        a,
        b,
        value: halves,
        error: (whole - halves).abs(),
    }
}

/// Integrate `f` over `[a, b]` (either orientation).
///
/// The integrand must be finite at interior points; endpoints are never
/// sampled, so integrable endpoint behaviour is tolerated but slow.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let first = panel(&mut f, a, b);
    let mut total = first.value;
    let mut err = first.error;
    let mut evals = 3 * ORDER;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut splits = 0;
    while err > opts.atol.max(opts.rtol * total.abs()) {
        if !total.is_finite() {
            return Err(Error::Quadrature {
                estimate: total,
                error: err,
            });
        }
        if splits >= opts.max_splits {
            return Err(Error::Quadrature {
                estimate: total,
                error: err,
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let m = 0.5 * (worst.a + worst.b);
        if m == worst.a || m == worst.b {
            // Panel collapsed to adjacent floats; nothing more to gain.
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            err = heap.iter().map(|p| p.error).sum();
            continue;
        }
        let left = panel(&mut f, worst.a, m);
        let right = panel(&mut f, m, worst.b);
        evals += 6 * ORDER;
        splits += 1;
        total += left.value + right.value - worst.value;
        heap.push(left);
        heap.push(right);
        // Recompute from scratch every so often to shed accumulated rounding.
        if splits % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
        }
        err = heap.iter().map(|p| p.error).sum();
    }
    let value: f64 = heap.iter().map(|p| p.value).sum();
    Ok(QuadResult {
        value,
        error: err,
        evaluations: evals,
    })
}

/// Integrate over `[0, ∞)` after the substitution t = tan ξ.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(mut f: F, opts: QuadOptions) -> Result<QuadResult> {
    integrate(
        |xi| {
            let t = xi.tan();
            let c = xi.cos();
            f(t) / (c * c)
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        opts,
    )
}

/// Sorted positive break points: the given scales plus geometric fill-in
/// so consecutive points differ by at most a factor of 8.
fn refine_scales(scales: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = scales.iter().copied().filter(|x| *x > 0.0 && x.is_finite()).collect();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let mut out = Vec::with_capacity(s.len());
    for w in s.windows(2) {
        let mut x = w[0];
        while x < w[1] / 8.0 {
            out.push(x);
            x *= 8.0;
        }
    }
    if let Some(&last) = s.last() {
        out.push(last);
    }
    out
}

/// Integrate over `[a, b]` split at `breaks` (points outside the interval
/// are ignored). Useful when the integrand has features at known, widely
/// separated scales that a single adaptive pass could miss.
pub fn integrate_piecewise<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|x| *x > lo && *x < hi).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.insert(0, lo);
    pts.push(hi);
    let mut total = QuadResult {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    for w in pts.windows(2) {
        let r = integrate(&mut f, w[0], w[1], opts)?;
        total.value += r.value;
        total.error += r.error;
        total.evaluations += r.evaluations;
    }
    total.value *= sign;
    Ok(total)
}

/// Symmetric break points ±scale (refined) and 0, for [`integrate_piecewise`].
pub fn symmetric_breaks(scales: &[f64]) -> Vec<f64> {
    let r = refine_scales(scales);
    let mut out: Vec<f64> = r.iter().map(|x| -x).collect();
    out.push(0.0);
    out.extend(r);
    out
}

/// Integrate over `[0, ∞)` with panels at the given positive scales and the
/// tail mapped by t = b/(1 − τ), b the largest scale.
pub fn integrate_half_line_scaled<F: FnMut(f64) -> f64>(
    mut f: F,
    scales: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    let breaks = refine_scales(scales);
    let Some(&b) = breaks.last() else {
        return integrate_half_line(f, opts);
    };
    let mut head = integrate_piecewise(&mut f, 0.0, b, &breaks, opts)?;
    let tail = integrate(
        |tau| {
            let s = 1.0 - tau;
            f(b / s) * b / (s * s)
        },
        0.0,
        1.0,
        opts,
    )?;
    head.value += tail.value;
    head.error += tail.error;
    head.evaluations += tail.evaluations;
    Ok(head)
}
