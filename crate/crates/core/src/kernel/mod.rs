//! The azimuthally integrated fractional Green function.
//!
//! For `1/2 < a < 1` the stream function of an axisymmetric relative
//! vorticity `ξ(r, z)` is
//!
//! ```text
//! ψ(r, z) = C ∫_Π G_a(r, z, r̄, z̄) ξ(r̄, z̄) r̄ dr̄ dz̄,
//! G_a     = (r r̄)^(a - 1/2) F_a(s),     s = ((r - r̄)² + (z - z̄)²) / (r r̄),
//! F_a(s)  = ∫_0^π cos θ (2(1 - cos θ) + s)^(-(3 - 2a)/2) dθ.
//! ```
//!
//! Integrating by parts once (`cos θ = d sin θ / dθ`, the boundary terms
//! vanish) gives the cancellation-free forms used here, with `p = (3 - 2a)/2`
//! and `d(θ) = 4 sin²(θ/2) + s`:
//!
//! ```text
//! F_a(s)   =  2p        ∫_0^π sin²θ d^{-(p+1)} dθ  > 0
//! F_a'(s)  = -2p(p+1)   ∫_0^π sin²θ d^{-(p+2)} dθ  < 0
//! F_a''(s) =  2p(p+1)(p+2) ∫_0^π sin²θ d^{-(p+3)} dθ
//! ```
//!
//! For small `s` the integrands concentrate in a peak of width `√s` at
//! `θ = 0`; the integration splits `[0, π]` into an inner panel `[0, √s]`
//! followed by geometrically growing panels.

mod table;

pub use table::{shared_table, KernelTable};

use crate::error::{Error, Result};
use crate::quad::{integrate_adaptive, Tolerance};
use std::f64::consts::PI;

/// Default tolerance for `F_a`.
pub const F_TOLERANCE: Tolerance = Tolerance::new(1e-10, 1e-10);
/// Default tolerance for `F_a'`.
pub const F_PRIME_TOLERANCE: Tolerance = Tolerance::new(1e-9, 1e-9);

const MAX_SEGMENTS: usize = 4000;

/// The fractional exponent `a ∈ (1/2, 1)` and its derived constants.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FractionalOrder {
    a: f64,
    c_a: f64,
}

impl FractionalOrder {
    /// Validates `a` and uses the Riesz-potential constant of `(-Δ)^{-a}`.
    pub fn new(a: f64) -> Result<Self> {
        Self::check(a)?;
        Ok(Self { a, c_a: riesz_constant(a) })
    }

    /// Same as [`FractionalOrder::new`] with an explicit normalisation.
    pub fn with_constant(a: f64, c_a: f64) -> Result<Self> {
        Self::check(a)?;
        if !(c_a > 0.0 && c_a.is_finite()) {
            return Err(Error::domain(format!("normalisation constant must be positive, got {c_a}")));
        }
        Ok(Self { a, c_a })
    }

    fn check(a: f64) -> Result<()> {
        if a > 0.5 && a < 1.0 {
            Ok(())
        } else {
            Err(Error::domain(format!("fractional order a must lie in the open interval (1/2, 1), got {a}")))
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Normalisation constant of the Riesz potential `(-Δ)^{-a}` in ℝ³.
    pub fn c_a(&self) -> f64 {
        self.c_a
    }

    pub fn exponent_tau_low(&self) -> f64 {
        1.0 - self.a
    }

    pub fn exponent_tau_high(&self) -> f64 {
        2.5 - self.a
    }

    /// Factor in front of the half-plane integral for `ψ`. The azimuthal
    /// integral over `[0, 2π]` is folded onto `[0, π]`, hence `2 c_a`.
    pub fn stream_prefactor(&self) -> f64 {
        2.0 * self.c_a
    }

    /// `p = (3 - 2a)/2`, the power in the azimuthal integrand.
    pub fn power(&self) -> f64 {
        1.5 - self.a
    }

    /// Coefficient `K` in `F_a(s) ~ K s^{-(1-a)}` as `s → 0`:
    /// `K = (√π/2) Γ(1-a) / Γ(3/2 - a)`.
    pub fn small_s_coefficient(&self) -> f64 {
        0.5 * PI.sqrt() * libm::tgamma(1.0 - self.a) / libm::tgamma(1.5 - self.a)
    }
}

/// `Γ((3-2a)/2) / (4^a π^{3/2} Γ(a))`.
pub fn riesz_constant(a: f64) -> f64 {
    libm::tgamma(1.5 - a) / (4f64.powf(a) * PI.powf(1.5) * libm::tgamma(a))
}

/// A kernel value with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub value: f64,
    pub abs_error_estimate: f64,
}

/// `s = ((r - r̄)² + (z - z̄)²) / (r r̄)`.
pub fn similarity_variable(r: f64, z: f64, rbar: f64, zbar: f64) -> Result<f64> {
    if !(r > 0.0 && rbar > 0.0) {
        return Err(Error::domain(format!("radii must be positive, got r={r}, rbar={rbar}")));
    }
    let dr = r - rbar;
    let dz = z - zbar;
    Ok((dr * dr + dz * dz) / (r * rbar))
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("similarity variable must be positive and finite, got {s}")))
    }
}

/// Panel breakpoints resolving the `√s` peak at `θ = 0`.
fn breakpoints(s: f64) -> Vec<f64> {
    let width = s.sqrt();
    if width >= 0.5 * PI {
        return vec![0.0, PI];
    }
    let mut b = vec![0.0, width];
    let mut x = width;
    while 2.0 * x < PI {
        x *= 2.0;
        b.push(x);
    }
    b.push(PI);
    b
}

/// `∫_0^π sin²θ (4 sin²(θ/2) + s)^{-(p+k)} dθ`.
fn sin2_moment(p: f64, s: f64, k: f64, tol: Tolerance) -> (f64, f64) {
    let e = -(p + k);
    let f = |t: f64| {
        let st = t.sin();
        let h = (0.5 * t).sin();
        st * st * (4.0 * h * h + s).powf(e)
    };
    let res = integrate_adaptive(f, &breakpoints(s), tol, MAX_SEGMENTS);
    (res.value, res.abs_error)
}

fn scaled(factor: f64, tol: Tolerance) -> Tolerance {
    Tolerance::new(tol.abs / factor.abs(), tol.rel)
}

/// `F_a(s)` at the default tolerance.
#[allow(non_snake_case)]
pub fn eval_F(order: &FractionalOrder, s: f64) -> Result<KernelEval> {
    eval_F_with(order, s, F_TOLERANCE)
}

#[allow(non_snake_case)]
pub fn eval_F_with(order: &FractionalOrder, s: f64, tol: Tolerance) -> Result<KernelEval> {
    check_s(s)?;
    let p = order.power();
    let c = 2.0 * p;
    let (v, e) = sin2_moment(p, s, 1.0, scaled(c, tol));
    Ok(KernelEval { value: c * v, abs_error_estimate: c * e })
}

/// `F_a'(s)` at the default tolerance.
#[allow(non_snake_case)]
pub fn eval_F_prime(order: &FractionalOrder, s: f64) -> Result<KernelEval> {
    eval_F_prime_with(order, s, F_PRIME_TOLERANCE)
}

#[allow(non_snake_case)]
pub fn eval_F_prime_with(order: &FractionalOrder, s: f64, tol: Tolerance) -> Result<KernelEval> {
    check_s(s)?;
    let p = order.power();
    let c = -2.0 * p * (p + 1.0);
    let (v, e) = sin2_moment(p, s, 2.0, scaled(c, tol));
    Ok(KernelEval { value: c * v, abs_error_estimate: (c * e).abs() })
}

/// `F_a''(s)`; used for the slopes of the tabulated derivative.
#[allow(non_snake_case)]
pub(crate) fn eval_F_second_with(order: &FractionalOrder, s: f64, tol: Tolerance) -> Result<KernelEval> {
    check_s(s)?;
    let p = order.power();
    let c = 2.0 * p * (p + 1.0) * (p + 2.0);
    let (v, e) = sin2_moment(p, s, 3.0, scaled(c, tol));
    Ok(KernelEval { value: c * v, abs_error_estimate: c * e })
}

/// `G_a(r, z, r̄, z̄) = (r r̄)^{a-1/2} F_a(s)`.
#[allow(non_snake_case)]
pub fn eval_G(order: &FractionalOrder, r: f64, z: f64, rbar: f64, zbar: f64) -> Result<KernelEval> {
    let s = similarity_variable(r, z, rbar, zbar)?;
    if s == 0.0 {
        return Err(Error::Singular { r, z });
    }
    let pre = (r * rbar).powf(order.a() - 0.5);
    let f = eval_F(order, s)?;
    Ok(KernelEval { value: pre * f.value, abs_error_estimate: pre * f.abs_error_estimate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(a: f64) -> FractionalOrder {
        FractionalOrder::new(a).unwrap()
    }

    #[test]
    fn similarity_variable_examples() {
        assert_eq!(similarity_variable(1.0, 0.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(similarity_variable(2.0, 1.0, 1.0, 1.0).unwrap(), 0.5);
        assert_eq!(similarity_variable(1.0, 3.0, 2.0, -1.0).unwrap(), 8.5);
        assert!(matches!(similarity_variable(0.0, 0.0, 1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(similarity_variable(1.0, 0.0, -1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn order_rejects_closed_endpoints() {
        for a in [0.5, 1.0, 0.2, 1.2, f64::NAN] {
            assert!(FractionalOrder::new(a).is_err(), "a={a}");
        }
        let o = order(0.75);
        assert!(o.c_a() > 0.0);
        assert_eq!(o.exponent_tau_low(), 0.25);
        assert_eq!(o.exponent_tau_high(), 1.75);
        assert!(FractionalOrder::with_constant(0.75, -1.0).is_err());
    }

    #[test]
    fn riesz_constant_reference_value() {
        // Γ(3/4) / (4^{3/4} π^{3/2} Γ(3/4)) = 1 / (2^{3/2} π^{3/2})
        let expected = 1.0 / (2f64.powf(1.5) * PI.powf(1.5));
        assert!((riesz_constant(0.75) - expected).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let o = order(0.75);
        assert!(eval_F(&o, 0.0).is_err());
        assert!(eval_F(&o, -1.0).is_err());
        assert!(eval_F_prime(&o, 0.0).is_err());
        assert!(matches!(eval_G(&o, 1.0, 0.5, 1.0, 0.5), Err(Error::Singular { .. })));
    }

    #[test]
    fn original_form_matches_integrated_by_parts_form() {
        // Direct evaluation of the cos θ form at moderate s.
        let o = order(0.6);
        for s in [0.3, 1.0, 7.0] {
            let p = o.power();
            let direct = integrate_adaptive(
                |t| t.cos() * (2.0 * (1.0 - t.cos()) + s).powf(-p),
                &[0.0, PI],
                Tolerance::new(1e-14, 1e-14),
                2000,
            )
            .value;
            let f = eval_F(&o, s).unwrap().value;
            assert!(((f - direct) / direct).abs() < 1e-10, "s={s}: {f} vs {direct}");
        }
    }

    #[test]
    fn small_s_asymptote() {
        for a in [0.6, 0.75, 0.9] {
            let o = order(a);
            let s = 1e-10;
            let f = eval_F(&o, s).unwrap().value;
            let lead = o.small_s_coefficient() * s.powf(-(1.0 - a));
            // the remainder is bounded, so the relative gap shrinks like s^{1-a}
            assert!(((f - lead) / lead).abs() < 10.0 * s.powf(1.0 - a), "a={a}: {f} vs {lead}");
        }
    }

    #[test]
    fn large_s_asymptote() {
        let o = order(0.75);
        let p = o.power();
        let s = 1e6;
        let f = eval_F(&o, s).unwrap().value;
        let lead = p * PI * (2.0 + s).powf(-p - 1.0);
        assert!(((f - lead) / lead).abs() < 1e-5);
    }

    #[test]
    fn error_estimates_are_within_tolerance() {
        let o = order(0.9);
        for s in [1e-8, 1e-3, 1.0, 1e3, 1e8] {
            let f = eval_F(&o, s).unwrap();
            assert!(f.abs_error_estimate <= F_TOLERANCE.target(f.value), "s={s}");
            let fp = eval_F_prime(&o, s).unwrap();
            assert!(fp.abs_error_estimate <= F_PRIME_TOLERANCE.target(fp.value), "s={s}");
        }
    }
}
