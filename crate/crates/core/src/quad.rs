//! Globally adaptive Gauss-Legendre quadrature.
//!
//! Each subinterval carries the 15-point rule on both of its halves; the
//! difference to the 15-point rule on the whole interval is its error
//! estimate. The interval with the largest estimate is bisected until the
//! summed estimate meets the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const ORDER: usize = 15;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        let n = ORDER as f64;
        for i in 0..ORDER {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                // Legendre recurrence for P_n(x) and P_{n-1}(x).
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=ORDER {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        Rule { nodes, weights }
    })
}

fn gauss<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let r = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for (x, w) in r.nodes.iter().zip(r.weights.iter()) {
        sum += w * f(mid + half * x);
    }
    sum * half
}

/// Result of a numerical integration together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            max_intervals: 4000,
        }
    }

    pub const fn with_max_intervals(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }
}

struct Piece {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    err: f64,
}

impl Piece {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64) -> Self {
        let m = 0.5 * (a + b);
        let left = gauss(f, a, m);
        let right = gauss(f, m, b);
        let err = (whole - left - right).abs();
        Piece {
            a,
            b,
            left,
            right,
            err: if err.is_nan() { f64::INFINITY } else { err },
        }
    }

    fn value(&self) -> f64 {
        self.left + self.right
    }
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrate `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    integrate_breaks(f, &[a, b], tol)
}

/// Integrate `f` over `[breaks[0], breaks[last]]`, starting from the given
/// subdivision. Breakpoints must be nondecreasing; empty pieces are skipped.
pub fn integrate_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: Tolerance) -> Result<Estimate> {
    if breaks.len() < 2 {
        return Ok(Estimate {
            value: 0.0,
            abs_err: 0.0,
        });
    }
    let lower = breaks[0];
    let upper = breaks[breaks.len() - 1];
    let mut heap = BinaryHeap::new();
    // Pieces that cannot be split further are parked here with their error.
    let mut settled: Vec<Piece> = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let whole = gauss(&f, w[0], w[1]);
            heap.push(Piece::new(&f, w[0], w[1], whole));
        }
    }
    let total = |heap: &BinaryHeap<Piece>, settled: &[Piece]| {
        let mut v = 0.0;
        let mut e = 0.0;
        for p in heap.iter().chain(settled.iter()) {
            v += p.value();
            e += p.err;
        }
        (v, e)
    };
    let (mut value, mut err) = total(&heap, &settled);
    let mut count = heap.len();
    let mut since_resum = 0;
    loop {
        let target = tol.abs.max(tol.rel * value.abs());
        if err <= target {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) || (worst.b - worst.a) <= 4.0 * f64::EPSILON * m.abs() {
            settled.push(worst);
            continue;
        }
        if count >= tol.max_intervals {
            heap.push(worst);
            let (v, e) = total(&heap, &settled);
            return Err(Error::Quadrature {
                lower,
                upper,
                achieved: e,
                requested: tol.abs.max(tol.rel * v.abs()),
            });
        }
        let l = Piece::new(&f, worst.a, m, worst.left);
        let r = Piece::new(&f, m, worst.b, worst.right);
        value += l.value() + r.value() - worst.value();
        err += l.err + r.err - worst.err;
        heap.push(l);
        heap.push(r);
        count += 1;
        since_resum += 1;
        if since_resum >= 64 {
            (value, err) = total(&heap, &settled);
            since_resum = 0;
        }
    }
    let (value, err) = total(&heap, &settled);
    let target = tol.abs.max(tol.rel * value.abs());
    if !value.is_finite() || err > target {
        return Err(Error::Quadrature {
            lower,
            upper,
            achieved: err,
            requested: target,
        });
    }
    Ok(Estimate { value, abs_err: err })
}

/// Invert a nondecreasing function by bisection: returns `x` with
/// `f(x) ≈ target`, narrowing `[lo, hi]` to width `width`. The bracket is
/// expanded geometrically if it does not contain the target.
pub fn invert_monotone<F: Fn(f64) -> Result<f64>>(
    f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    width: f64,
) -> Result<f64> {
    let fail = |lo, hi| Error::RootFinding {
        level: target,
        lower: lo,
        upper: hi,
    };
    let mut expand = 0;
    while f(lo)? > target {
        lo -= (hi - lo).max(1.0);
        expand += 1;
        if expand > 200 || !lo.is_finite() {
            return Err(fail(lo, hi));
        }
    }
    while f(hi)? < target {
        hi += (hi - lo).max(1.0);
        expand += 1;
        if expand > 200 || !hi.is_finite() {
            return Err(fail(lo, hi));
        }
    }
    for _ in 0..2000 {
        if hi - lo <= width.max(f64::EPSILON * lo.abs().max(hi.abs())) {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(fail(lo, hi))
}
