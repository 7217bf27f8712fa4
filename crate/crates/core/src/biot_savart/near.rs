//! Cell integrals of singular and near-singular kernels.
//!
//! The self cell is split into eight triangles with a common apex at the
//! cell centre. On each triangle the Duffy map `y = u (Q₁ + v (Q₂ - Q₁))`
//! contributes a Jacobian `u`, and the substitution `u = w^{1/q}` with
//! `q = 2 - γ` cancels a `t^{-γ}` singularity exactly, leaving a bounded
//! integrand for a (radially graded) tensor Gauss rule. Mirrored triangles use mirrored
//! nodes, so odd singular parts cancel to rounding.

use crate::quad::GaussRule;

// Geometric panels in the radial Duffy variable: the substitution removes
// only the leading singularity, and the sub-leading terms leave weak
// `w^α` endpoint behaviour that a single Gauss panel resolves poorly.
const W_PANELS: [f64; 10] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

/// `∫ f` over `[rc-hr, rc+hr] × [zc-hz, zc+hz]` for `f ~ |y - (rc, zc)|^{-γ}`,
/// `0 ≤ γ < 2`.
pub(crate) fn self_cell(f: &impl Fn(f64, f64) -> f64, rc: f64, zc: f64, hr: f64, hz: f64, gamma: f64, rule: &GaussRule) -> f64 {
    let q = 2.0 - gamma;
    let mut total = 0.0;
    for (sr, sz) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
        let e = (sr * hr, 0.0);
        let c = (sr * hr, sz * hz);
        let n = (0.0, sz * hz);
        for (q1, q2) in [(e, c), (c, n)] {
            let det = (q1.0 * (q2.1 - q1.1) - q1.1 * (q2.0 - q1.0)).abs();
            for (w, ww) in W_PANELS.windows(2).flat_map(|p| rule.on(p[0], p[1])) {
                let u = w.powf(1.0 / q);
                // u du = u · w^{1/q - 1} / q dw
                let jac = det * u * w.powf(1.0 / q - 1.0) / q;
                let mut inner = 0.0;
                for (v, wv) in rule.on(0.0, 1.0) {
                    let x = u * (q1.0 + v * (q2.0 - q1.0));
                    let y = u * (q1.1 + v * (q2.1 - q1.1));
                    inner += wv * f(rc + x, zc + y);
                }
                total += ww * jac * inner;
            }
        }
    }
    total
}

/// Tensor Gauss rule on `[r0, r1] × [z0, z1]`.
pub(crate) fn regular_cell(f: &impl Fn(f64, f64) -> f64, r0: f64, r1: f64, z0: f64, z1: f64, rule: &GaussRule) -> f64 {
    let mut total = 0.0;
    for (r, wr) in rule.on(r0, r1) {
        let mut inner = 0.0;
        for (z, wz) in rule.on(z0, z1) {
            inner += wz * f(r, z);
        }
        total += wr * inner;
    }
    total
}

/// `∫ |y|^{-γ}` over `[-hr, hr] × [-hz, hz]`, reduced to one angular integral
/// per triangle: `∫_0^{φ₀} (A / cos φ)^{2-γ} / (2-γ) dφ`.
pub(crate) fn power_over_rectangle(hr: f64, hz: f64, gamma: f64, rule: &GaussRule) -> f64 {
    let q = 2.0 - gamma;
    let tri = |a: f64, b: f64| rule.integrate(0.0, (b / a).atan(), |phi| (a / phi.cos()).powf(q) / q);
    4.0 * (tri(hr, hz) + tri(hz, hr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_integral_matches_polar_closed_form_on_square() {
        // For the square, compare against the self-cell Duffy rule.
        let rule = GaussRule::new(24);
        for gamma in [0.2, 0.5, 0.8, 1.4] {
            let exact = power_over_rectangle(0.3, 0.3, gamma, &rule);
            let duffy = self_cell(&|r: f64, z: f64| (r * r + z * z).powf(-gamma / 2.0), 0.0, 0.0, 0.3, 0.3, gamma, &GaussRule::new(16));
            assert!(((exact - duffy) / exact).abs() < 1e-12, "{gamma}: {exact} {duffy}");
        }
        // γ = 0 is the area
        assert!((power_over_rectangle(0.2, 0.5, 0.0, &rule) - 0.4).abs() < 1e-13);
    }

    #[test]
    fn self_cell_polynomials_and_odd_parts() {
        let rule = GaussRule::new(12);
        let area = self_cell(&|_, _| 1.0, 1.0, 2.0, 0.1, 0.2, 0.0, &rule);
        assert!((area - 0.08).abs() < 1e-14, "{area}");
        // an odd singular integrand cancels
        let odd = self_cell(&|r: f64, z: f64| r * (r * r + z * z).powf(-1.2), 0.0, 0.0, 0.1, 0.2, 1.4, &rule);
        assert!(odd.abs() < 1e-12, "{odd}");
    }

    #[test]
    fn regular_cell_exact_for_polynomials() {
        let rule = GaussRule::new(4);
        let v = regular_cell(&|r: f64, z: f64| r * r * z + r.powi(7), 0.0, 1.0, 0.0, 2.0, &rule);
        assert!((v - (2.0 / 3.0 + 2.0 / 8.0)).abs() < 1e-14);
    }
}
