//! Heat kernel `H_{t,x}(r, y)` of the fractional kernel, built from the
//! one-sided α-stable density and the killed Brownian density.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernel::fractional_constant;
use crate::quad::{integrate, integrate_to_infinity, QuadOptions};
use crate::space_walk::{killed_density, survival_probability, SineSeries};

const INNER: f64 = 1e-7;
const OUTER: f64 = 1e-6;

/// One-sided stable law with Laplace transform `e^{-s^α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableParams {
    pub alpha: f64,
}

impl StableParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self { alpha })
        } else {
            Err(Error::domain(format!("stable index α = {alpha} must lie in (0, 1)")))
        }
    }

    fn is_half(&self) -> bool {
        self.alpha == 0.5
    }
}

/// Density `g_α(x)` of `X^α(1)`. Closed form at `α = 1/2`.
pub fn stable_density(params: StableParams, x: f64) -> Result<f64> {
    ln_stable_density(params, x).map(f64::exp)
}

/// `ln g_α(x)`, finite even where `g_α` underflows.
pub fn ln_stable_density(params: StableParams, x: f64) -> Result<f64> {
    if params.is_half() {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::domain(format!("x = {x} must be positive")));
        }
        return Ok(-0.25 / x - 1.5 * x.ln() - (2.0 * PI.sqrt()).ln());
    }
    ln_stable_density_integral(params, x)
}

/// `g_α(x)` from the single integral over `(0, π)`
/// `α/(1-α) x^{-1/(1-α)} π^{-1} ∫ A(θ) exp(-x^{-α/(1-α)} A(θ)) dθ`,
/// for every `α` including `1/2`.
pub fn stable_density_integral(params: StableParams, x: f64) -> Result<f64> {
    ln_stable_density_integral(params, x).map(f64::exp)
}

pub fn ln_stable_density_integral(params: StableParams, x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("x = {x} must be positive")));
    }
    let a = params.alpha;
    let b = 1.0 / (1.0 - a);
    let ln_pref = (a * b).ln() - b * x.ln() - PI.ln();
    let ln_c = -a * b * x.ln();
    let c = ln_c.exp();
    // ln A(θ), increasing from ln A(0+) = (α/(1-α)) ln α + ln(1-α) to +∞.
    let ln_a = |theta: f64| {
        b * ((a * theta).sin() / theta.sin()).ln() + ((1.0 - a) * theta).sin().ln() - (a * theta).sin().ln()
    };
    let ln_a0 = a * b * a.ln() + (1.0 - a).ln();
    // The exponent ln A - c A peaks where A = 1/c.
    let peak = if -ln_c <= ln_a0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, PI);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ln_a(mid) < -ln_c {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let exponent = |theta: f64| {
        let la = ln_a(theta);
        la - c * la.exp()
    };
    let top = if peak == 0.0 {
        ln_a0 - c * ln_a0.exp()
    } else {
        exponent(peak)
    };
    let integrand = |theta: f64| {
        let e = exponent(theta);
        if e.is_finite() {
            (e - top).exp()
        } else {
            0.0
        }
    };
    // Geometric breakpoints toward the peak resolve arbitrarily narrow maxima.
    let mut cuts = vec![peak];
    for edge in [0.0, PI] {
        let span = edge - peak;
        let mut w = 1.0;
        while span.abs() * w > 1e-13 {
            cuts.push(peak + span * w);
            w *= 0.5;
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // c·A multiplies rounding in ln A, so the noise floor scales with c.
    let noise = 64.0 * f64::EPSILON * c.max(1.0);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let opts = QuadOptions {
            rel_tol: 1e-12,
            abs_tol: noise * (w[1] - w[0]),
            max_intervals: 400,
        };
        total += integrate(integrand, w[0], w[1], opts)
            .map_err(|e| sub_integral(e, "stable density"))?
            .value;
    }
    if !(total > 0.0) {
        return Err(Error::numerical(
            "stable density",
            format!("vanishing integral at x = {x}"),
        ));
    }
    Ok(ln_pref + top + total.ln())
}

/// `∫_0^∞ g_α`, split at 1 with `x = v^{-1/α}` on the heavy tail.
pub fn stable_normalization(params: StableParams) -> Result<f64> {
    let a = params.alpha;
    let opts = QuadOptions {
        rel_tol: 1e-10,
        abs_tol: 1e-14,
        max_intervals: 4000,
    };
    let head = integrate(|x| stable_density(params, x).unwrap_or(0.0), 0.0, 1.0, opts)?.value;
    let tail = integrate(
        |v| {
            if v <= 0.0 {
                return 0.0;
            }
            let x = v.powf(-1.0 / a);
            stable_density(params, x).unwrap_or(0.0) * x / (a * v)
        },
        0.0,
        1.0,
        opts,
    )?
    .value;
    Ok(head + tail)
}

/// `∂_s P[X^α(s) ≥ t] = α^{-1} t s^{-1-1/α} g_α(t s^{-1/α})`.
pub fn subordinator_crossing_density(params: StableParams, t: f64, s: f64) -> Result<f64> {
    if !(t > 0.0 && s > 0.0) {
        return Err(Error::domain(format!("t = {t} and s = {s} must be positive")));
    }
    let a = params.alpha;
    let u = t * s.powf(-1.0 / a);
    if u == 0.0 || !u.is_finite() {
        return Ok(0.0);
    }
    Ok(t / a * s.powf(-1.0 - 1.0 / a) * stable_density(params, u)?)
}

fn sub_integral(e: Error, what: &str) -> Error {
    match e {
        Error::Numerical { detail, .. } => Error::Numerical {
            context: what.to_string(),
            detail,
        },
        other => other,
    }
}

/// `J(y0) = ∫_0^∞ w(s) s^{-1/α} g_α(y0 s^{-1/α}) ds`, i.e. the occupation of
/// the level `y0` by the subordinator weighted by `w`. With `u = y0 s^{-1/α}`
/// it becomes `α y0^{α-1} ∫ w((y0/u)^α) u^{-α} g_α(u) du`; on `u > 1` the
/// tail substitution `u = v^{-1/(2α)}` gives a bounded integrand.
fn occupation<W: Fn(f64) -> f64>(params: StableParams, y0: f64, w: &W) -> Result<f64> {
    let a = params.alpha;
    let f = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let g = stable_density(params, u).unwrap_or(0.0);
        if g == 0.0 {
            return 0.0;
        }
        w((y0 / u).powf(a)) * u.powf(-a) * g
    };
    let opts = QuadOptions {
        rel_tol: INNER,
        abs_tol: 1e-15,
        max_intervals: 2000,
    };
    let head = integrate(&f, 0.0, 1.0, opts)?.value;
    let e = 1.0 / (2.0 * a);
    let tail = integrate(
        |v| {
            if v <= 0.0 {
                return 0.0;
            }
            let u = v.powf(-e);
            f(u) * e * u / v
        },
        0.0,
        1.0,
        opts,
    )?
    .value;
    Ok(a * y0.powf(a - 1.0) * (head + tail))
}

/// `∫_0^t T(z) J(t - z) dz` where `T` carries a `z^{-α}` singularity and
/// `J` a `(t-z)^{α-1}` one; each half gets its own smoothing substitution.
fn outer<T, J>(alpha: f64, t: f64, time: T, occ: J) -> Result<f64>
where
    T: Fn(f64) -> f64,
    J: Fn(f64) -> f64,
{
    let half = 0.5 * t;
    let opts = QuadOptions {
        rel_tol: OUTER,
        abs_tol: 1e-13,
        max_intervals: 1000,
    };
    let p = 1.0 / (1.0 - alpha);
    // z = half·w^p on (0, half)
    let left = integrate(
        |w| {
            if w <= 0.0 {
                return 0.0;
            }
            let z = half * w.powf(p);
            time(z) * occ(t - z) * half * p * w.powf(p - 1.0)
        },
        0.0,
        1.0,
        opts,
    )?
    .value;
    let q = 1.0 / alpha;
    // t - z = half·w^q on (half, t)
    let right = integrate(
        |w| {
            if w <= 0.0 {
                return 0.0;
            }
            let y0 = half * w.powf(q);
            time(t - y0) * occ(y0) * half * q * w.powf(q - 1.0)
        },
        0.0,
        1.0,
        opts,
    )?
    .value;
    Ok(left + right)
}

fn check_point(t: f64, x: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time t = {t} must be positive")));
    }
    if !(x > -1.0 && x < 1.0) {
        return Err(Error::domain(format!("x = {x} must lie in (-1, 1)")));
    }
    Ok(())
}

/// `H_{t,x}(r, y) = ∫_0^t ρ(z - r) ∫_0^∞ p^Ω_s(x, y) p_s(t, z) ds dz`
/// with `ρ(r) = c_α r^{-α-1}`.
pub fn heat_kernel_h(params: StableParams, t: f64, x: f64, r: f64, y: f64) -> Result<f64> {
    check_point(t, x)?;
    if !(r < 0.0) {
        return Err(Error::domain(format!("r = {r} must be negative")));
    }
    if !(y > -1.0 && y < 1.0) {
        return Ok(0.0);
    }
    let a = params.alpha;
    let c = fractional_constant(a);
    let err = std::cell::Cell::new(None);
    let occ = |y0: f64| match occupation(params, y0, &|s: f64| killed_density(x, y, s)) {
        Ok(v) => v,
        Err(e) => {
            err.set(Some(e));
            f64::NAN
        }
    };
    let v = outer(a, t, |z| c * (z - r).powf(-a - 1.0), occ);
    if let Some(e) = err.take() {
        return Err(sub_integral(e, "heat kernel occupation integral"));
    }
    v.map_err(|e| sub_integral(e, "heat kernel outer integral"))
}

/// `∫_{-∞}^0 ∫_Ω φ(r, y) H_{t,x}(r, y) dy dr` for `φ(r, y) = τ(r) ψ(y)`, with
/// `ψ` given by its sine series. `τ` is only read on `r < 0`.
pub fn separable_functional<F>(params: StableParams, t: f64, x: f64, tau: F, psi: &SineSeries) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    check_point(t, x)?;
    functional(params, t, tau, |s| psi.expectation(x, s))
}

/// `P[τ_0(t) < τ_Ω(x)]`: total mass of `H_{t,x}`.
pub fn heat_kernel_mass(params: StableParams, t: f64, x: f64) -> Result<f64> {
    check_point(t, x)?;
    let a = params.alpha;
    let c = fractional_constant(a);
    let err = std::cell::Cell::new(None);
    let occ = |y0: f64| match occupation(params, y0, &|s: f64| survival_probability(x, s)) {
        Ok(v) => v,
        Err(e) => {
            err.set(Some(e));
            f64::NAN
        }
    };
    let v = outer(a, t, |z| c / a * z.powf(-a), occ);
    if let Some(e) = err.take() {
        return Err(sub_integral(e, "heat kernel occupation integral"));
    }
    v.map_err(|e| sub_integral(e, "heat kernel outer integral"))
}

fn functional<F, S>(params: StableParams, t: f64, tau: F, space: S) -> Result<f64>
where
    F: Fn(f64) -> f64,
    S: Fn(f64) -> f64,
{
    let a = params.alpha;
    let c = fractional_constant(a);
    let err = std::cell::Cell::new(None);
    // ∫_{-∞}^0 τ(r) ρ(z - r) dr = (c/α) z^{-α} ∫_0^1 τ(z - z v^{-1/α}) dv
    let time = |z: f64| {
        let opts = QuadOptions {
            rel_tol: INNER,
            abs_tol: 1e-15,
            max_intervals: 2000,
        };
        let inner = integrate(
            |v| {
                if v <= 0.0 {
                    return 0.0;
                }
                let r = z - z * v.powf(-1.0 / a);
                if r.is_finite() {
                    tau(r)
                } else {
                    0.0
                }
            },
            0.0,
            1.0,
            opts,
        );
        match inner {
            Ok(i) => c / a * z.powf(-a) * i.value,
            Err(e) => {
                err.set(Some(sub_integral(e, "heat kernel time factor")));
                f64::NAN
            }
        }
    };
    let occ = |y0: f64| match occupation(params, y0, &space) {
        Ok(v) => v,
        Err(e) => {
            err.set(Some(sub_integral(e, "heat kernel occupation integral")));
            f64::NAN
        }
    };
    let v = outer(a, t, time, occ);
    if let Some(e) = err.take() {
        return Err(e);
    }
    v.map_err(|e| sub_integral(e, "heat kernel outer integral"))
}

/// Plain `∫_0^∞ f(s) ds` helper used to check normalizations in `s`.
pub fn crossing_normalization(params: StableParams, t: f64) -> Result<f64> {
    let opts = QuadOptions {
        rel_tol: 1e-10,
        abs_tol: 1e-14,
        max_intervals: 4000,
    };
    let s0 = t.powf(params.alpha);
    let f = |s: f64| subordinator_crossing_density(params, t, s).unwrap_or(0.0);
    let head = integrate(&f, 0.0, s0, opts)?.value;
    let tail = integrate_to_infinity(&f, s0, opts)?.value;
    Ok(head + tail)
}
