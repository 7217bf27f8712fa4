//! Energy, penalized energy and the admissible class.
//!
//! ```text
//! E[ξ]   = ∫ ψ ξ dx,          ψ = 𝒢_a[ξ]
//! E₂[ξ]  = E[ξ] − ∫ ξ² dx
//! K_μ    = { ξ ≥ 0 : ½∫ r² ξ dx = μ, ∫ ξ dx ≤ 1 }
//! K_μ'   = { ξ ≥ 0 : ½∫ r² ξ dx ≤ μ, ∫ ξ dx ≤ 1 }
//! ```

use crate::biot_savart::{SingularCellRule, StreamOperator};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fields::{impulse, mass, weighted_integral, weighted_integral_with, ScalarField, Weight};
use crate::kernel::FractionalOrder;

/// `E[ξ] = 2π Σ ψ ξ r h_r h_z` with the shared default stream operator.
pub fn energy(order: &FractionalOrder, xi: &ScalarField) -> Result<f64> {
    let op = StreamOperator::shared(order, xi.grid(), SingularCellRule::default());
    energy_with(&op, xi, Exec::default())
}

pub fn energy_with(op: &StreamOperator, xi: &ScalarField, exec: Exec) -> Result<f64> {
    let psi = op.apply_with(xi, exec)?;
    energy_from_stream(&psi, xi, exec)
}

/// `∫ ψ ξ dx` for a stream function already at hand.
pub fn energy_from_stream(psi: &ScalarField, xi: &ScalarField, exec: Exec) -> Result<f64> {
    let prod = psi.zip_with(xi, |p, x| p * x)?;
    Ok(weighted_integral_with(&prod, Weight::One, exec))
}

/// `E₂[ξ] = E[ξ] − ∫ξ²`.
pub fn penalized_energy(order: &FractionalOrder, xi: &ScalarField) -> Result<f64> {
    Ok(energy(order, xi)? - weighted_integral(xi, Weight::SelfProduct))
}

pub fn penalized_energy_with(op: &StreamOperator, xi: &ScalarField, exec: Exec) -> Result<f64> {
    Ok(energy_with(op, xi, exec)? - weighted_integral_with(xi, Weight::SelfProduct, exec))
}

/// Tolerances of the membership tests.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdmissibleTolerance {
    /// Relative tolerance on the impulse (and on the mass bound).
    pub impulse_rel: f64,
    /// Values down to `-nonneg_abs` count as nonnegative.
    pub nonneg_abs: f64,
}

impl Default for AdmissibleTolerance {
    fn default() -> Self {
        Self { impulse_rel: 1e-8, nonneg_abs: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AdmissibleReport {
    pub mu: f64,
    pub impulse_value: f64,
    pub mass_value: f64,
    pub l2_norm: f64,
    pub in_k_mu: bool,
    pub in_k_mu_prime: bool,
}

pub fn check_admissible(xi: &ScalarField, mu: f64, tol: AdmissibleTolerance) -> Result<AdmissibleReport> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::domain(format!("impulse target must be positive, got {mu}")));
    }
    let impulse_value = impulse(xi);
    let mass_value = mass(xi);
    let l2_norm = weighted_integral(xi, Weight::SelfProduct).sqrt();
    let nonneg = xi.min() >= -tol.nonneg_abs;
    let mass_ok = mass_value <= 1.0 + tol.impulse_rel;
    let in_k_mu_prime = nonneg && mass_ok && impulse_value <= mu * (1.0 + tol.impulse_rel);
    let in_k_mu = in_k_mu_prime && (impulse_value - mu).abs() <= tol.impulse_rel * mu;
    Ok(AdmissibleReport { mu, impulse_value, mass_value, l2_norm, in_k_mu, in_k_mu_prime })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::HalfPlaneGrid;
    use crate::fixtures::{ball_indicator, gaussian_torus};
    use std::f64::consts::PI;

    fn o() -> FractionalOrder {
        FractionalOrder::new(0.75).unwrap()
    }

    #[test]
    fn zero_field() {
        let g = HalfPlaneGrid::square(8, 1.0).unwrap();
        let z = ScalarField::zeros(g);
        assert_eq!(energy(&o(), &z).unwrap(), 0.0);
        assert_eq!(penalized_energy(&o(), &z).unwrap(), 0.0);
        let rep = check_admissible(&z, 1.0, AdmissibleTolerance::default()).unwrap();
        assert!(rep.in_k_mu_prime && !rep.in_k_mu);
    }

    #[test]
    fn negative_cell_is_inadmissible() {
        let g = HalfPlaneGrid::square(16, 2.0).unwrap();
        let mut v = ball_indicator(&g, 0.5).into_values();
        v[40] = -1e-6;
        let f = ScalarField::new(g, v).unwrap();
        let mu = impulse(&f);
        let rep = check_admissible(&f, mu, AdmissibleTolerance::default()).unwrap();
        assert!(!rep.in_k_mu && !rep.in_k_mu_prime);
    }

    #[test]
    fn ball_becomes_admissible_under_refinement() {
        // (4/15)πρ⁵ = μ and (4/3)πρ³ ≤ 1
        let rho: f64 = 0.6;
        let mu = 4.0 / 15.0 * PI * rho.powi(5);
        assert!(4.0 / 3.0 * PI * rho.powi(3) <= 1.0);
        let mut defects = vec![];
        for n in [32, 64, 128, 256] {
            let f = ball_indicator(&HalfPlaneGrid::square(n, 1.0).unwrap(), rho);
            let rep = check_admissible(&f, mu, AdmissibleTolerance::default()).unwrap();
            defects.push((rep.impulse_value - mu).abs() / mu);
            // membership at the discretisation tolerance of this grid
            let tol = AdmissibleTolerance { impulse_rel: 4.0 / n as f64, nonneg_abs: 0.0 };
            assert!(check_admissible(&f, mu, tol).unwrap().in_k_mu, "n={n}");
        }
        assert!(defects[3] < defects[0] && defects[3] < 2e-3, "{defects:?}");
    }

    #[test]
    fn energy_positive_and_polarization_symmetric() {
        let g = HalfPlaneGrid::square(24, 2.5).unwrap();
        let a = gaussian_torus(&g, 1.0, 1.0, 0.25);
        let b = ball_indicator(&g, 0.8);
        let ea = energy(&o(), &a).unwrap();
        let eb = energy(&o(), &b).unwrap();
        let eab = energy(&o(), &a.zip_with(&b, |x, y| x + y).unwrap()).unwrap();
        assert!(ea > 0.0 && eb > 0.0);
        let op = StreamOperator::shared(&o(), &g, SingularCellRule::default());
        let pa = op.apply(&a).unwrap();
        let pb = op.apply(&b).unwrap();
        let cross1 = energy_from_stream(&pa, &b, Exec::Serial).unwrap();
        let cross2 = energy_from_stream(&pb, &a, Exec::Serial).unwrap();
        let polar = 0.5 * (eab - ea - eb);
        assert!(((cross1 - cross2) / cross1).abs() < 1e-12);
        assert!(((polar - cross1) / cross1).abs() < 1e-10);
    }

    #[test]
    fn penalized_energy_is_energy_minus_l2() {
        let g = HalfPlaneGrid::square(24, 2.5).unwrap();
        let a = gaussian_torus(&g, 0.3, 1.0, 0.25);
        let e = energy(&o(), &a).unwrap();
        let e2 = penalized_energy(&o(), &a).unwrap();
        let l2 = weighted_integral(&a, Weight::SelfProduct);
        assert!((e - e2 - l2).abs() < 1e-14 * e.abs().max(l2));
    }
}
