//! Nonlocal time kernels `ρ(t, r)`: the intensity of a backward jump of size
//! `r` made by the time process when it sits at `t`.

use std::fmt;
use std::sync::Arc;

use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};

/// Time-dependent order `t ↦ α(t)` with values in `(0, 1)`.
pub type OrderFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Samples of the order function used to approximate `sup_t`.
const ORDER_SAMPLES: usize = 513;

#[derive(Clone)]
pub enum Kernel {
    /// `c_α r^{-α-1}`.
    Fractional { alpha: f64 },
    /// `(1-α) δ^{α-1} r^{-α-1}` on `(0, δ)`; unit first moment.
    Truncated { alpha: f64, delta: f64 },
    /// `c_α e^{-λ r} r^{-α-1}`.
    Tempered { alpha: f64, lambda: f64 },
    /// `c_{α(t)} r^{-α(t)-1}`. `window` bounds the times over which the order
    /// is sampled when a supremum over `t` is needed.
    VariableOrder { order: OrderFn, window: (f64, f64) },
    /// The measure `λ·Dirac_δ`; has no density.
    Atomic { lambda: f64, delta: f64 },
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Fractional { alpha } => f.debug_struct("Fractional").field("alpha", alpha).finish(),
            Kernel::Truncated { alpha, delta } => f
                .debug_struct("Truncated")
                .field("alpha", alpha)
                .field("delta", delta)
                .finish(),
            Kernel::Tempered { alpha, lambda } => f
                .debug_struct("Tempered")
                .field("alpha", alpha)
                .field("lambda", lambda)
                .finish(),
            Kernel::VariableOrder { window, .. } => f
                .debug_struct("VariableOrder")
                .field("window", window)
                .finish_non_exhaustive(),
            Kernel::Atomic { lambda, delta } => f
                .debug_struct("Atomic")
                .field("lambda", lambda)
                .field("delta", delta)
                .finish(),
        }
    }
}

/// `c_α = -1/Γ(-α) = α/Γ(1-α)`, through log-gamma.
pub fn fractional_constant(alpha: f64) -> f64 {
    (alpha.ln() - ln_gamma(1.0 - alpha)).exp()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("order α = {alpha} must lie in (0, 1)")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {v} must be positive and finite")))
    }
}

/// `Γ(1-α) · Q(1-α, x)`, the upper incomplete gamma at shape `1-α`.
fn upper_gamma_one_minus(alpha: f64, x: f64) -> f64 {
    ln_gamma(1.0 - alpha).exp() * gamma_ur(1.0 - alpha, x)
}

/// `Γ(-α, x)` for `x > 0` from the recurrence `Γ(s+1, x) = sΓ(s, x) + x^s e^{-x}`.
fn upper_gamma_neg(alpha: f64, x: f64) -> f64 {
    (x.powf(-alpha) * (-x).exp() - upper_gamma_one_minus(alpha, x)) / alpha
}

/// Result of the integrability check on `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H0Report {
    /// `∫_0^∞ (1 ∧ r) sup_t ρ(t, r) dr`.
    pub moment_integral: f64,
    /// The large-jump part `∫_1^∞ sup_t ρ(t, r) dr`.
    pub tail_integral: f64,
    /// Whether `ρ` is bounded below by a positive constant near `r = 0`.
    pub lower_bound_ok: bool,
}

impl Kernel {
    pub fn fractional(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Kernel::Fractional { alpha })
    }

    pub fn truncated(alpha: f64, delta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_positive("δ", delta)?;
        Ok(Kernel::Truncated { alpha, delta })
    }

    pub fn tempered(alpha: f64, lambda: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_positive("λ", lambda)?;
        Ok(Kernel::Tempered { alpha, lambda })
    }

    pub fn variable_order(order: OrderFn, window: (f64, f64)) -> Result<Self> {
        if !(window.0 <= window.1) {
            return Err(Error::domain("variable-order window must satisfy lo ≤ hi"));
        }
        let k = Kernel::VariableOrder { order, window };
        for t in k.window_samples() {
            k.order_at(t)?;
        }
        Ok(k)
    }

    pub fn atomic(lambda: f64, delta: f64) -> Result<Self> {
        check_positive("λ", lambda)?;
        check_positive("δ", delta)?;
        Ok(Kernel::Atomic { lambda, delta })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Fractional { .. } => "fractional",
            Kernel::Truncated { .. } => "truncated",
            Kernel::Tempered { .. } => "tempered",
            Kernel::VariableOrder { .. } => "variable-order",
            Kernel::Atomic { .. } => "atomic",
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Kernel::Atomic { .. })
    }

    /// Whether `ρ(t, r)` does not depend on `t`.
    pub fn is_time_homogeneous(&self) -> bool {
        !matches!(self, Kernel::VariableOrder { .. })
    }

    /// Order in effect at time `t`; `None` for the atomic kernel.
    pub fn order_at(&self, t: f64) -> Result<f64> {
        match self {
            Kernel::Fractional { alpha } | Kernel::Truncated { alpha, .. } | Kernel::Tempered { alpha, .. } => {
                Ok(*alpha)
            }
            Kernel::VariableOrder { order, .. } => {
                let a = order(t);
                check_alpha(a).map_err(|_| Error::domain(format!("α({t}) = {a} leaves (0, 1)")))?;
                Ok(a)
            }
            Kernel::Atomic { .. } => Err(Error::Unsupported {
                op: "order_at",
                kernel: "atomic",
            }),
        }
    }

    pub(crate) fn window_samples(&self) -> Vec<f64> {
        match self {
            Kernel::VariableOrder { window: (lo, hi), .. } => (0..ORDER_SAMPLES)
                .map(|i| lo + (hi - lo) * i as f64 / (ORDER_SAMPLES - 1) as f64)
                .collect(),
            _ => vec![0.0],
        }
    }

    /// Density `ρ(t, r)` for `r > 0`.
    pub fn evaluate(&self, t: f64, r: f64) -> Result<f64> {
        if self.is_atomic() {
            return Err(Error::Unsupported {
                op: "evaluate",
                kernel: "atomic",
            });
        }
        if !(r > 0.0) {
            return Err(Error::domain(format!("jump size r = {r} must be positive")));
        }
        Ok(match *self {
            Kernel::Fractional { alpha } => fractional_constant(alpha) * r.powf(-alpha - 1.0),
            Kernel::Truncated { alpha, delta } => {
                if r < delta {
                    (1.0 - alpha) * delta.powf(alpha - 1.0) * r.powf(-alpha - 1.0)
                } else {
                    0.0
                }
            }
            Kernel::Tempered { alpha, lambda } => {
                fractional_constant(alpha) * (-lambda * r).exp() * r.powf(-alpha - 1.0)
            }
            Kernel::VariableOrder { .. } => {
                let a = self.order_at(t)?;
                fractional_constant(a) * r.powf(-a - 1.0)
            }
            Kernel::Atomic { .. } => unreachable!(),
        })
    }

    /// `∫_a^∞ ρ(t, r) dr` for `a > 0`.
    pub fn tail_mass(&self, t: f64, a: f64) -> Result<f64> {
        if !(a > 0.0) {
            return Err(Error::domain(format!("lower limit a = {a} must be positive")));
        }
        Ok(match *self {
            Kernel::Fractional { alpha } => fractional_constant(alpha) * a.powf(-alpha) / alpha,
            Kernel::Truncated { alpha, delta } => {
                if a >= delta {
                    0.0
                } else {
                    (1.0 - alpha) * delta.powf(alpha - 1.0) / alpha * (a.powf(-alpha) - delta.powf(-alpha))
                }
            }
            Kernel::Tempered { alpha, lambda } => {
                fractional_constant(alpha) * lambda.powf(alpha) * upper_gamma_neg(alpha, lambda * a)
            }
            Kernel::VariableOrder { .. } => {
                let al = self.order_at(t)?;
                fractional_constant(al) * a.powf(-al) / al
            }
            Kernel::Atomic { lambda, delta } => {
                if a <= delta {
                    lambda
                } else {
                    0.0
                }
            }
        })
    }

    /// Small-jump moment `∫_0^a r ρ(t, r) dr`.
    pub fn first_moment(&self, t: f64, a: f64) -> Result<f64> {
        if !(a > 0.0) {
            return Err(Error::domain(format!("upper limit a = {a} must be positive")));
        }
        Ok(match *self {
            Kernel::Fractional { alpha } => fractional_constant(alpha) * a.powf(1.0 - alpha) / (1.0 - alpha),
            Kernel::Truncated { alpha, delta } => delta.powf(alpha - 1.0) * a.min(delta).powf(1.0 - alpha),
            Kernel::Tempered { alpha, lambda } => {
                fractional_constant(alpha)
                    * lambda.powf(alpha - 1.0)
                    * ln_gamma(1.0 - alpha).exp()
                    * gamma_lr(1.0 - alpha, lambda * a)
            }
            Kernel::VariableOrder { .. } => {
                let al = self.order_at(t)?;
                fractional_constant(al) * a.powf(1.0 - al) / (1.0 - al)
            }
            Kernel::Atomic { lambda, delta } => {
                if delta <= a {
                    lambda * delta
                } else {
                    0.0
                }
            }
        })
    }

    /// Numerical check of the integrability hypothesis on `ρ`.
    pub fn h0_report(&self) -> Result<H0Report> {
        let (moment_integral, tail_integral) = match self {
            Kernel::VariableOrder { .. } => {
                let samples: Vec<f64> = self
                    .window_samples()
                    .iter()
                    .map(|&t| self.order_at(t))
                    .collect::<Result<_>>()?;
                let sup_rho = |r: f64| {
                    samples
                        .iter()
                        .map(|&a| fractional_constant(a) * r.powf(-a - 1.0))
                        .fold(0.0, f64::max)
                };
                let a_max = samples.iter().copied().fold(0.0, f64::max);
                let a_min = samples.iter().copied().fold(1.0, f64::min);
                // r = w^{1/(1-a_max)} flattens the r^{-a_max} singularity at 0,
                // r = v^{-1/a_min} the r^{-1-a_min} tail.
                let p = 1.0 / (1.0 - a_max);
                let near = integrate(
                    |w| {
                        let r = w.powf(p);
                        r * sup_rho(r) * p * w.powf(p - 1.0)
                    },
                    0.0,
                    1.0,
                    QuadOptions::rel(1e-10),
                )
                .map_err(|e| annotate(e, "h0 near-zero integral"))?;
                let q = 1.0 / a_min;
                let far = integrate(
                    |v| {
                        let r = v.powf(-q);
                        sup_rho(r) * q * v.powf(-q - 1.0)
                    },
                    0.0,
                    1.0,
                    QuadOptions::rel(1e-10),
                )
                .map_err(|e| annotate(e, "h0 tail integral"))?;
                (near.value + far.value, far.value)
            }
            Kernel::Atomic { lambda, delta } => {
                let tail = if *delta >= 1.0 { *lambda } else { 0.0 };
                (lambda * delta.min(1.0), tail)
            }
            _ => {
                let tail = self.tail_mass(0.0, 1.0)?;
                (self.first_moment(0.0, 1.0)? + tail, tail)
            }
        };
        Ok(H0Report {
            moment_integral,
            tail_integral,
            lower_bound_ok: !self.is_atomic(),
        })
    }
}

fn annotate(e: Error, context: &str) -> Error {
    match e {
        Error::Numerical { detail, .. } => Error::numerical(context, detail),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn truncated() -> Kernel {
        Kernel::truncated(0.75, 0.2).unwrap()
    }

    #[test]
    fn fractional_half_at_one() {
        let k = Kernel::fractional(0.5).unwrap();
        let expected = 0.5 / std::f64::consts::PI.sqrt();
        assert_relative_eq!(k.evaluate(0.0, 1.0).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(expected, 0.28209479177387814, max_relative = 1e-14);
    }

    #[test]
    fn truncated_values() {
        let k = truncated();
        assert_eq!(k.evaluate(0.0, 0.3).unwrap(), 0.0);
        let v = k.evaluate(0.0, 0.1).unwrap();
        assert_relative_eq!(v, 0.25 * 0.2f64.powf(-0.25) * 0.1f64.powf(-1.75), max_relative = 1e-14);
        assert!((v - 21.0224).abs() < 1e-4);
    }

    #[test]
    fn evaluate_errors() {
        let atomic = Kernel::atomic(1.0, 0.2).unwrap();
        assert!(matches!(atomic.evaluate(0.0, 0.1), Err(Error::Unsupported { .. })));
        assert!(matches!(truncated().evaluate(0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(truncated().evaluate(0.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn constructor_validation() {
        assert!(Kernel::fractional(1.0).is_err());
        assert!(Kernel::fractional(0.0).is_err());
        assert!(Kernel::truncated(0.5, 0.0).is_err());
        assert!(Kernel::tempered(0.5, -1.0).is_err());
        assert!(Kernel::atomic(0.0, 0.2).is_err());
        let bad: OrderFn = Arc::new(|t| 0.5 + t);
        assert!(Kernel::variable_order(bad, (0.0, 1.0)).is_err());
    }

    #[test]
    fn tail_mass_examples() {
        assert_eq!(truncated().tail_mass(0.0, 0.2).unwrap(), 0.0);
        let atomic = Kernel::atomic(1.0, 0.2).unwrap();
        assert_eq!(atomic.tail_mass(0.0, 0.1).unwrap(), 1.0);
        assert_eq!(atomic.tail_mass(0.0, 0.3).unwrap(), 0.0);
        let v = truncated().tail_mass(0.0, 0.1).unwrap();
        let expected = (0.25 / 0.75) * 0.2f64.powf(-0.25) * (0.1f64.powf(-0.75) - 0.2f64.powf(-0.75));
        assert_relative_eq!(v, expected, max_relative = 1e-14);
        assert!((v - 1.13632).abs() < 1e-5);
        assert!(truncated().tail_mass(0.0, 0.0).is_err());
    }

    fn quad_tail(k: &Kernel, t: f64, a: f64) -> f64 {
        // Independent route: r = a / v^{2} maps (a, ∞) onto (0, 1).
        integrate(
            |v| {
                let r = a / (v * v);
                k.evaluate(t, r).unwrap() * 2.0 * a / (v * v * v)
            },
            0.0,
            1.0,
            QuadOptions::rel(1e-11),
        )
        .unwrap()
        .value
    }

    #[test]
    fn closed_form_tails_match_quadrature() {
        let order: OrderFn = Arc::new(|t: f64| 0.4 + 0.2 * t.sin().powi(2));
        let kernels = [
            Kernel::fractional(0.3).unwrap(),
            Kernel::tempered(0.6, 2.0).unwrap(),
            Kernel::variable_order(order, (0.0, 1.0)).unwrap(),
        ];
        for k in &kernels {
            for &a in &[0.01, 0.3, 2.0] {
                let t = 0.7;
                assert_relative_eq!(k.tail_mass(t, a).unwrap(), quad_tail(k, t, a), max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn first_moment_matches_quadrature() {
        for k in [
            Kernel::tempered(0.4, 3.0).unwrap(),
            Kernel::fractional(0.7).unwrap(),
            truncated(),
        ] {
            let a = 0.15;
            let q = integrate(|r| r * k.evaluate(0.0, r).unwrap(), 0.0, a, QuadOptions::rel(1e-11)).unwrap();
            assert_relative_eq!(k.first_moment(0.0, a).unwrap(), q.value, max_relative = 1e-7);
        }
    }

    #[test]
    fn h0_examples() {
        let r = truncated().h0_report().unwrap();
        assert_relative_eq!(r.moment_integral, 1.0, max_relative = 1e-14);
        assert_eq!(r.tail_integral, 0.0);
        assert!(r.lower_bound_ok);

        let r = Kernel::fractional(0.5).unwrap().h0_report().unwrap();
        assert_relative_eq!(
            r.moment_integral,
            std::f64::consts::FRAC_2_SQRT_PI,
            max_relative = 1e-13
        );

        let r = Kernel::atomic(2.0, 0.2).unwrap().h0_report().unwrap();
        assert!(!r.lower_bound_ok);
        assert_relative_eq!(r.moment_integral, 0.4);
    }

    #[test]
    fn h0_variable_order_constant_matches_fractional() {
        let order: OrderFn = Arc::new(|_| 0.5);
        let vo = Kernel::variable_order(order, (0.0, 1.0)).unwrap().h0_report().unwrap();
        let fr = Kernel::fractional(0.5).unwrap().h0_report().unwrap();
        assert_relative_eq!(vo.moment_integral, fr.moment_integral, max_relative = 1e-8);
        assert_relative_eq!(vo.tail_integral, fr.tail_integral, max_relative = 1e-8);
    }

    #[test]
    fn tempered_reduces_to_fractional_as_lambda_vanishes() {
        let t = Kernel::tempered(0.5, 1e-12).unwrap();
        let f = Kernel::fractional(0.5).unwrap();
        assert_relative_eq!(
            t.tail_mass(0.0, 0.3).unwrap(),
            f.tail_mass(0.0, 0.3).unwrap(),
            max_relative = 1e-5
        );
    }

    proptest! {
        #[test]
        fn truncated_unit_moment(alpha in 0.01f64..0.99, delta in 1e-3f64..50.0) {
            let k = Kernel::truncated(alpha, delta).unwrap();
            let m = k.first_moment(0.0, delta).unwrap();
            prop_assert!((m - 1.0).abs() < 1e-12);
        }

        #[test]
        fn tail_mass_nonincreasing(alpha in 0.05f64..0.95, a in 1e-4f64..3.0, b in 1e-4f64..3.0, t in -1.0f64..1.0) {
            let order: OrderFn = Arc::new(|t: f64| 0.5 + 0.3 * t.cos() * 0.5);
            let kernels = [
                Kernel::fractional(alpha).unwrap(),
                Kernel::truncated(alpha, 0.7).unwrap(),
                Kernel::tempered(alpha, 1.5).unwrap(),
                Kernel::variable_order(order, (-1.0, 1.0)).unwrap(),
                Kernel::atomic(2.0, 0.7).unwrap(),
            ];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for k in &kernels {
                prop_assert!(k.tail_mass(t, lo).unwrap() >= k.tail_mass(t, hi).unwrap());
            }
        }

        #[test]
        fn evaluate_nonnegative_and_time_free(alpha in 0.05f64..0.95, r in 1e-5f64..5.0, t1 in -5.0f64..5.0, t2 in -5.0f64..5.0) {
            for k in [Kernel::fractional(alpha).unwrap(), Kernel::truncated(alpha, 1.3).unwrap()] {
                let v1 = k.evaluate(t1, r).unwrap();
                prop_assert!(v1 >= 0.0);
                prop_assert_eq!(v1, k.evaluate(t2, r).unwrap());
            }
            prop_assert!(Kernel::tempered(alpha, 0.5).unwrap().evaluate(t1, r).unwrap() >= 0.0);
        }
    }
}
