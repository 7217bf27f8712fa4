//! Grids and fields on the meridian half-plane `Π = {(r, z) : r > 0}`.
//!
//! The grid is cell-centred: `n_r` cells cover `[0, r_max]` and `n_z` cells
//! cover `[-z_max, z_max]`, so no node sits on the axis and the z-nodes are
//! mirror-symmetric about `z = 0`. Values are stored row-major with one row
//! per radius (`index = i * n_z + k`).
//!
//! Integrals are three-dimensional axisymmetric integrals evaluated with the
//! midpoint rule, `∫ f dx = 2π Σ f(r_i, z_k) r_i h_r h_z`; anything outside
//! the box is taken to be zero.

mod io;

pub use io::{load_field, read_field, save_field, write_field, FieldMeta, FIELD_HEADER_LEN, FIELD_MAGIC};

use crate::error::{Error, Result};
use crate::exec::Exec;
use std::f64::consts::PI;

/// Uniform cell-centred discretisation of a truncated half-plane.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HalfPlaneGrid {
    n_r: usize,
    n_z: usize,
    r_max: f64,
    z_max: f64,
    h_r: f64,
    h_z: f64,
}

impl HalfPlaneGrid {
    /// `n_r × n_z` cells over `[0, r_max] × [-z_max, z_max]`. Both counts must
    /// be at least 4 and `n_z` must be even.
    pub fn new(n_r: usize, n_z: usize, r_max: f64, z_max: f64) -> Result<Self> {
        if n_r < 4 || n_z < 4 {
            return Err(Error::domain(format!("grid needs at least 4 cells per direction, got {n_r}x{n_z}")));
        }
        if n_z % 2 != 0 {
            return Err(Error::domain(format!("n_z must be even so the grid is symmetric about z=0, got {n_z}")));
        }
        if !(r_max > 0.0 && r_max.is_finite() && z_max > 0.0 && z_max.is_finite()) {
            return Err(Error::domain(format!("box extents must be positive, got r_max={r_max}, z_max={z_max}")));
        }
        Ok(Self {
            n_r,
            n_z,
            r_max,
            z_max,
            h_r: r_max / n_r as f64,
            h_z: 2.0 * z_max / n_z as f64,
        })
    }

    /// Square cells: `n_z = 2 n_r` over `[0, extent] × [-extent, extent]`.
    pub fn square(n_r: usize, extent: f64) -> Result<Self> {
        Self::new(n_r, 2 * n_r, extent, extent)
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn n_z(&self) -> usize {
        self.n_z
    }
    pub fn len(&self) -> usize {
        self.n_r * self.n_z
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn z_max(&self) -> f64 {
        self.z_max
    }
    pub fn z_min(&self) -> f64 {
        -self.z_max
    }
    /// Radius of the innermost node, `h_r / 2`.
    pub fn r_min(&self) -> f64 {
        0.5 * self.h_r
    }
    pub fn h_r(&self) -> f64 {
        self.h_r
    }
    pub fn h_z(&self) -> f64 {
        self.h_z
    }
    pub fn cell_area(&self) -> f64 {
        self.h_r * self.h_z
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h_r
    }

    #[inline]
    pub fn z(&self, k: usize) -> f64 {
        -self.z_max + (k as f64 + 0.5) * self.h_z
    }

    #[inline]
    pub fn index(&self, i: usize, k: usize) -> usize {
        i * self.n_z + k
    }

    /// Fractional cell coordinates `(x, y)` with node `(i, k)` at `(i, k)`.
    #[inline]
    pub fn to_index_space(&self, r: f64, z: f64) -> (f64, f64) {
        (r / self.h_r - 0.5, (z + self.z_max) / self.h_z - 0.5)
    }

    pub fn check_same(&self, other: &HalfPlaneGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Grid samples of a scalar quantity (ξ, ψ, b^θ, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: HalfPlaneGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: HalfPlaneGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.n_r(),
                grid.n_z(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field"));
        }
        Ok(Self { grid, values })
    }

    /// Like [`ScalarField::new`] but also requires `values ≥ 0`.
    pub fn nonnegative(grid: HalfPlaneGrid, values: Vec<f64>) -> Result<Self> {
        let f = Self::new(grid, values)?;
        if !f.is_nonnegative() {
            return Err(Error::domain("field has negative values"));
        }
        Ok(f)
    }

    pub fn zeros(grid: HalfPlaneGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    /// Samples `f(r, z)` at every node. Non-finite samples are an error.
    pub fn from_fn(grid: HalfPlaneGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_r() {
            let r = grid.r(i);
            for k in 0..grid.n_z() {
                values.push(f(r, grid.z(k)));
            }
        }
        Self::new(grid, values)
    }

    /// Crate-internal constructor for values already known to be finite.
    pub(crate) fn from_raw(grid: HalfPlaneGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &HalfPlaneGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, k)]
    }

    /// The `z`-row at radius index `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n_z();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Self::new(self.grid, self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    /// Discrete L² distance `‖self − other‖` in the r-weighted measure.
    pub fn l2_distance(&self, other: &ScalarField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let g = self.grid;
        let sum: f64 = (0..g.n_r())
            .map(|i| {
                let r = g.r(i);
                let a = self.row(i);
                let b = other.row(i);
                r * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
            })
            .sum();
        Ok((2.0 * PI * g.cell_area() * sum).sqrt())
    }

    /// Smallest distance, in cells, from the support `{|f| > threshold}` to
    /// the outer edges of the box (`r = r_max`, `z = ±z_max`). `None` for an
    /// empty support.
    pub fn support_margin_cells(&self, threshold: f64) -> Option<usize> {
        let g = self.grid;
        let mut margin: Option<usize> = None;
        for i in 0..g.n_r() {
            for (k, &v) in self.row(i).iter().enumerate() {
                if v.abs() > threshold {
                    let m = (g.n_r() - 1 - i).min(k).min(g.n_z() - 1 - k);
                    margin = Some(margin.map_or(m, |x| x.min(m)));
                }
            }
        }
        margin
    }
}

/// Paired samples `(v^r, v^z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    grid: HalfPlaneGrid,
    pub v_r: Vec<f64>,
    pub v_z: Vec<f64>,
}

impl VelocityField {
    pub fn new(grid: HalfPlaneGrid, v_r: Vec<f64>, v_z: Vec<f64>) -> Result<Self> {
        if v_r.len() != grid.len() || v_z.len() != grid.len() {
            return Err(Error::GridMismatch("velocity component length".into()));
        }
        if v_r.iter().chain(&v_z).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("velocity field"));
        }
        Ok(Self { grid, v_r, v_z })
    }

    pub fn zeros(grid: HalfPlaneGrid) -> Self {
        Self { grid, v_r: vec![0.0; grid.len()], v_z: vec![0.0; grid.len()] }
    }

    pub fn grid(&self) -> &HalfPlaneGrid {
        &self.grid
    }

    /// `max(|v^r|/h_r, |v^z|/h_z)`, the CFL rate per unit time.
    pub fn cfl_rate(&self) -> f64 {
        let g = self.grid;
        self.v_r
            .iter()
            .zip(&self.v_z)
            .map(|(vr, vz)| (vr.abs() / g.h_r()).max(vz.abs() / g.h_z()))
            .fold(0.0, f64::max)
    }

    pub fn max_speed(&self) -> f64 {
        self.v_r.iter().zip(&self.v_z).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
    }

    /// Relative L² gap `‖self − other‖ / ‖other‖` (r-weighted measure).
    pub fn relative_l2_gap(&self, other: &VelocityField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let g = self.grid;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..g.n_r() {
            let r = g.r(i);
            for k in 0..g.n_z() {
                let j = g.index(i, k);
                let dr = self.v_r[j] - other.v_r[j];
                let dz = self.v_z[j] - other.v_z[j];
                num += r * (dr * dr + dz * dz);
                den += r * (other.v_r[j].powi(2) + other.v_z[j].powi(2));
            }
        }
        Ok((num / den).sqrt())
    }
}

/// Integrand selector for [`weighted_integral`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// `∫ f dx`
    One,
    /// `∫ r² f dx`
    RSquared,
    /// `∫ f² dx`
    SelfProduct,
    /// `∫ |f|^p dx`
    AbsPower(f64),
}

/// Axisymmetric integral `2π ∫∫ (integrand) r dr dz` by the midpoint rule.
///
/// Each row is summed in sorted order, so the result depends only on the
/// multiset of values in every row: permuting values within rows (as Steiner
/// symmetrization does) leaves every integral bit-identical. Row sums are
/// then added in row order, independent of the execution policy.
pub fn weighted_integral(f: &ScalarField, weight: Weight) -> f64 {
    weighted_integral_with(f, weight, Exec::default())
}

pub fn weighted_integral_with(f: &ScalarField, weight: Weight, exec: Exec) -> f64 {
    let g = *f.grid();
    let rows = exec.map(g.n_r(), |i| {
        let r = g.r(i);
        let mut terms: Vec<f64> = match weight {
            Weight::One | Weight::RSquared => f.row(i).to_vec(),
            Weight::SelfProduct => f.row(i).iter().map(|v| v * v).collect(),
            Weight::AbsPower(p) => f.row(i).iter().map(|v| v.abs().powf(p)).collect(),
        };
        terms.sort_unstable_by(f64::total_cmp);
        let s: f64 = terms.iter().sum();
        match weight {
            Weight::RSquared => r * r * s * r,
            _ => s * r,
        }
    });
    2.0 * PI * g.cell_area() * rows.iter().sum::<f64>()
}

/// `½ ∫ r² ξ dx`.
pub fn impulse(xi: &ScalarField) -> f64 {
    0.5 * weighted_integral(xi, Weight::RSquared)
}

/// `∫ ξ dx`.
pub fn mass(xi: &ScalarField) -> f64 {
    weighted_integral(xi, Weight::One)
}

/// Discrete `L^p` norm in the r-weighted measure; `p = ∞` gives `max |f|`.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::domain(format!("L^p norm needs p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.values().iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let s = if p == 1.0 {
        weighted_integral(f, Weight::AbsPower(1.0))
    } else if p == 2.0 {
        weighted_integral(f, Weight::SelfProduct)
    } else {
        weighted_integral(f, Weight::AbsPower(p))
    };
    Ok(s.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn grid(n: usize) -> HalfPlaneGrid {
        HalfPlaneGrid::square(n, 2.0).unwrap()
    }

    #[test]
    fn grid_invariants() {
        let g = HalfPlaneGrid::new(8, 16, 2.0, 3.0).unwrap();
        assert!(g.r(0) > 0.0);
        assert_eq!(g.r_min(), 0.5 * g.h_r());
        for k in 0..g.n_z() {
            assert!((g.z(k) + g.z(g.n_z() - 1 - k)).abs() < 1e-15);
        }
        assert!(HalfPlaneGrid::new(3, 16, 1.0, 1.0).is_err());
        assert!(HalfPlaneGrid::new(8, 15, 1.0, 1.0).is_err());
        assert!(HalfPlaneGrid::new(8, 16, -1.0, 1.0).is_err());
    }

    #[test]
    fn zero_field_integrals_vanish() {
        let f = ScalarField::zeros(grid(16));
        for w in [Weight::One, Weight::RSquared, Weight::SelfProduct, Weight::AbsPower(3.0)] {
            assert_eq!(weighted_integral(&f, w), 0.0);
        }
        assert_eq!(lp_norm(&f, 1.0).unwrap(), 0.0);
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 0.0);
        assert!(lp_norm(&f, 0.5).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let g = grid(4);
        let mut v = vec![0.0; g.len()];
        v[3] = f64::NAN;
        assert!(matches!(ScalarField::new(g, v), Err(Error::NonFinite(_))));
        assert!(ScalarField::nonnegative(g, vec![-1.0; g.len()]).is_err());
    }

    #[test]
    fn ball_moments_converge() {
        let rho: f64 = 1.0;
        let vol = 4.0 / 3.0 * PI * rho.powi(3);
        let r2 = 8.0 / 15.0 * PI * rho.powi(5);
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for n in [32, 64, 128, 256] {
            let g = grid(n);
            let f = fixtures::ball_indicator(&g, rho);
            let e_vol = (mass(&f) - vol).abs() / vol;
            let e_r2 = (weighted_integral(&f, Weight::RSquared) - r2).abs() / r2;
            let e_l1 = (lp_norm(&f, 1.0).unwrap() - vol).abs() / vol;
            assert_eq!(e_vol, e_l1);
            assert!(e_vol < prev.0 && e_r2 < prev.1, "n={n}: {e_vol} {e_r2}");
            prev = (e_vol, e_r2);
            let imp = impulse(&f);
            assert!((imp - 0.5 * weighted_integral(&f, Weight::RSquared)).abs() < 1e-15);
        }
        assert!(prev.0 < 5e-3 && prev.1 < 5e-3, "{prev:?}");
    }

    #[test]
    fn smooth_torus_moments() {
        let (amp, r0, w) = (1.0, 1.0, 0.25);
        let m = fixtures::gaussian_torus_mass(amp, r0, w);
        let m2 = fixtures::gaussian_torus_r2_moment(amp, r0, w);
        // the midpoint rule is spectrally accurate for the Gaussian; what is
        // left is the exp(-r0²/w²) tail that the closed forms ignore
        for n in [16, 32, 64] {
            let f = fixtures::gaussian_torus(&grid(n), amp, r0, w);
            assert!(((mass(&f) - m) / m).abs() < 1e-6, "n={n}");
            assert!(((weighted_integral(&f, Weight::RSquared) - m2) / m2).abs() < 1e-6, "n={n}");
        }
    }

    #[test]
    fn linear_and_monotone() {
        let g = grid(16);
        let a = fixtures::gaussian_torus(&g, 1.0, 1.0, 0.3);
        let b = fixtures::ball_indicator(&g, 0.7);
        let sum = a.zip_with(&b, |x, y| 2.0 * x + 3.0 * y).unwrap();
        for w in [Weight::One, Weight::RSquared] {
            let lhs = weighted_integral(&sum, w);
            let rhs = 2.0 * weighted_integral(&a, w) + 3.0 * weighted_integral(&b, w);
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs());
            assert!(weighted_integral(&sum, w) >= weighted_integral(&a, w));
        }
    }

    #[test]
    fn serial_and_parallel_integrals_identical() {
        let g = grid(32);
        let f = fixtures::gaussian_torus(&g, 1.0, 1.0, 0.3);
        for w in [Weight::One, Weight::RSquared, Weight::SelfProduct] {
            assert_eq!(weighted_integral_with(&f, w, Exec::Serial), weighted_integral_with(&f, w, Exec::Parallel));
        }
    }

    #[test]
    fn support_margin() {
        let g = grid(16);
        let f = ScalarField::zeros(g);
        assert_eq!(f.support_margin_cells(0.0), None);
        let b = fixtures::ball_indicator(&g, 0.5);
        let m = b.support_margin_cells(0.0).unwrap();
        assert!(m > 0 && m < g.n_r());
    }
}
