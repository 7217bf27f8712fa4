//! Standard test profiles with closed-form moments.

use crate::fields::{HalfPlaneGrid, ScalarField};
use std::f64::consts::PI;

/// `amp · exp(-((r - r0)² + z²) / w²)`.
pub fn gaussian_torus(grid: &HalfPlaneGrid, amp: f64, r0: f64, w: f64) -> ScalarField {
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.n_r() {
        let dr = grid.r(i) - r0;
        for k in 0..grid.n_z() {
            let z = grid.z(k);
            values.push(amp * (-(dr * dr + z * z) / (w * w)).exp());
        }
    }
    ScalarField::from_raw(*grid, values)
}

/// Whole-space mass of [`gaussian_torus`] when `w ≪ r0` (exact up to the
/// `exp(-r0²/w²)` tail that crosses the axis).
pub fn gaussian_torus_mass(amp: f64, r0: f64, w: f64) -> f64 {
    2.0 * PI * amp * PI * w * w * r0
}

/// Whole-space `∫ r² ξ dx` of [`gaussian_torus`], same caveat.
pub fn gaussian_torus_r2_moment(amp: f64, r0: f64, w: f64) -> f64 {
    2.0 * PI * amp * PI * w * w * (r0.powi(3) + 1.5 * r0 * w * w)
}

/// Indicator of the ball `r² + z² < rho²` centred on the axis.
pub fn ball_indicator(grid: &HalfPlaneGrid, rho: f64) -> ScalarField {
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.n_r() {
        let r = grid.r(i);
        for k in 0..grid.n_z() {
            let z = grid.z(k);
            values.push(if r * r + z * z < rho * rho { 1.0 } else { 0.0 });
        }
    }
    ScalarField::from_raw(*grid, values)
}
