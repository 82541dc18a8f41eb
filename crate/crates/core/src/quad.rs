//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Globally adaptive: the interval with the largest error estimate is bisected
//! until the summed estimate meets `max(abs_tol, rel_tol * |integral|)`.
//! Nodes never touch the interval endpoints, so integrable endpoint
//! singularities are tolerated, although a smoothing substitution converges
//! much faster.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

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
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (i, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += w * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs();
    (value, error)
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let (value, error) = kronrod(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    // Segments too narrow to split further; their error is accepted as is.
    let mut frozen_err = 0.0;
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::numerical(
                "quadrature",
                format!("non-finite integrand on [{a}, {b}]"),
            ));
        }
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err + frozen_err <= target {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) < 1e-15 * mid.abs().max(1e-300) {
            frozen_err += worst.error;
            total_err -= worst.error;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        if heap.len() + 2 > opts.max_intervals {
            heap.push(worst);
            return Err(Error::numerical(
                "quadrature",
                format!(
                    "no convergence on [{a}, {b}] after {} intervals: estimate {total:e}, error {:e}, target {target:e}",
                    opts.max_intervals,
                    total_err + frozen_err
                ),
            ));
        }
        let (lv, le) = kronrod(&mut f, worst.a, mid);
        let (rv, re) = kronrod(&mut f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    let intervals = heap.len();
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum::<f64>() + frozen_err;
    Ok(QuadResult {
        value,
        error,
        intervals,
    })
}

/// Integrates `f` over `[a, ∞)` through the map `x = a + u / (1 - u)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate(
        |u| {
            let w = 1.0 - u;
            let v = f(a + u / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        opts,
    )
}
