//! Stream function and velocity from relative vorticity.
//!
//! ```text
//! ψ(r, z) = 2 c_a ∫_Π G_a(r, z, r̄, z̄) ξ(r̄, z̄) r̄ dr̄ dz̄
//! v^r = -(1/r) ∂_z ψ,    v^z = (1/r) ∂_r ψ
//! ```
//!
//! The discrete operator is the midpoint rule over source cells with the
//! cells around each target (a 5×5 patch) replaced by cell integrals of the
//! kernel, so the only approximation is "ξ is constant on nearby cells".
//! Since `G_a` depends on `z` and `z̄` only through `z - z̄`, every pair of
//! radial rows `(i, j)` couples through a Toeplitz matrix in `z`. These are
//! applied exactly by zero-padded FFTs; the symmetric kernel lines are
//! transformed once per operator and kept, so a stream solve costs
//! `O(n_r² n_z)` instead of the `O(n_r² n_z²)` of a literal double sum while
//! producing the same numbers up to rounding.

mod near;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fields::{HalfPlaneGrid, ScalarField, VelocityField};
use crate::kernel::{shared_table, FractionalOrder, KernelTable};
use crate::quad::GaussRule;
use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use std::sync::{Arc, Mutex, OnceLock};

/// Half-width of the near-field patch (in cells).
pub const NEAR_CELLS: usize = 2;
const PATCH: usize = 2 * NEAR_CELLS + 1;

/// Values below `SUPPORT_EPS · max|ξ|` count as outside the support.
pub const SUPPORT_EPS: f64 = 1e-12;
/// Support closer than this many cells to the box edge is flagged.
pub const MIN_SUPPORT_MARGIN: usize = 4;

/// How the cell containing the target node (and its neighbours) is
/// integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularCellRule {
    /// Self cell: analytic integral of the leading `K r² t^{-(2-2a)}`
    /// singularity plus a 4×4 Gauss rule on the bounded remainder.
    /// Neighbour cells use point values.
    Subtract,
    /// Exact cell integrals (Duffy-regularised for the self cell) on the
    /// whole 5×5 patch.
    #[default]
    CellAverage,
}

impl std::str::FromStr for SingularCellRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subtract" => Ok(Self::Subtract),
            "cell-average" => Ok(Self::CellAverage),
            _ => Err(Error::domain(format!("unknown singular-cell rule {s:?} (expected subtract or cell-average)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StreamSolveReport {
    pub psi: ScalarField,
    pub singular_cell_rule: SingularCellRule,
    /// Estimated absolute quadrature error of `ψ` (sup norm).
    pub est_quadrature_error: f64,
    /// The support of `ξ` lies within [`MIN_SUPPORT_MARGIN`] cells of the
    /// box edge; `ψ` is then missing mass that the truncation dropped.
    pub support_near_boundary: bool,
}

/// The discrete map `ξ ↦ ψ` for one order, grid and singular-cell rule.
pub struct StreamOperator {
    order: FractionalOrder,
    grid: HalfPlaneGrid,
    rule: SingularCellRule,
    fft_len: usize,
    // Real spectra of the symmetric kernel lines, packed upper triangle
    // (i ≤ j), n_z + 1 frequencies per pair.
    spectra: Vec<f64>,
    // Near-field corrections per target row, indexed (dj + 2) * 5 + (dl + 2).
    near: Vec<[f64; PATCH * PATCH]>,
    weight_error: f64,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl std::fmt::Debug for StreamOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StreamOperator")
            .field("order", &self.order)
            .field("grid", &self.grid)
            .field("rule", &self.rule)
            .finish_non_exhaustive()
    }
}

#[inline]
fn patch_index(dj: isize, dl: isize) -> usize {
    ((dj + NEAR_CELLS as isize) * PATCH as isize + dl + NEAR_CELLS as isize) as usize
}

fn offsets() -> impl Iterator<Item = isize> {
    -(NEAR_CELLS as isize)..=NEAR_CELLS as isize
}

impl StreamOperator {
    pub fn build(order: &FractionalOrder, grid: &HalfPlaneGrid, rule: SingularCellRule, exec: Exec) -> Self {
        let table = shared_table(order);
        let grid = *grid;
        let (n_r, n_z) = (grid.n_r(), grid.n_z());
        let m = 2 * n_z;
        let nf = n_z + 1;
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let a = order.a();
        let h_z = grid.h_z();

        let pairs: Vec<(usize, usize)> = (0..n_r).flat_map(|i| (i..n_r).map(move |j| (i, j))).collect();
        let mut spectra = vec![0.0; pairs.len() * nf];
        exec.for_each_chunk_mut(&mut spectra, nf, |p, out| {
            let (i, j) = pairs[p];
            let (ri, rj) = (grid.r(i), grid.r(j));
            let rr = ri * rj;
            let pre = rr.powf(a - 0.5);
            let dr2 = (ri - rj) * (ri - rj);
            let mut buf = forward.make_input_vec();
            let mut spec = forward.make_output_vec();
            let mut scratch = forward.make_scratch_vec();
            for mm in 0..=n_z {
                let v = if i == j && mm == 0 {
                    0.0
                } else {
                    let dz = mm as f64 * h_z;
                    pre * table.f((dr2 + dz * dz) / rr)
                };
                buf[mm] = v;
                if mm > 0 && mm < n_z {
                    buf[m - mm] = v;
                }
            }
            forward.process_with_scratch(&mut buf, &mut spec, &mut scratch).expect("buffer sizes match the plan");
            for (o, c) in out.iter_mut().zip(&spec) {
                *o = c.re;
            }
        });

        let (near, weight_error) = stream_near_field(&table, &grid, rule, exec);
        Self { order: *order, grid, rule, fft_len: m, spectra, near, weight_error, forward, inverse }
    }

    /// A process-wide cached operator; building one at 512×1024 takes
    /// seconds and a gigabyte, so callers that solve repeatedly share it.
    pub fn shared(order: &FractionalOrder, grid: &HalfPlaneGrid, rule: SingularCellRule) -> Arc<StreamOperator> {
        type Key = (u64, u64, usize, usize, u64, u64, SingularCellRule);
        static CACHE: OnceLock<Mutex<Vec<(Key, Arc<StreamOperator>)>>> = OnceLock::new();
        const CACHE_BYTES: usize = 1_600_000_000;
        let key: Key = (
            order.a().to_bits(),
            order.c_a().to_bits(),
            grid.n_r(),
            grid.n_z(),
            grid.r_max().to_bits(),
            grid.z_max().to_bits(),
            rule,
        );
        let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
        {
            let mut c = cache.lock().expect("operator cache poisoned");
            if let Some(pos) = c.iter().position(|(k, _)| *k == key) {
                let entry = c.remove(pos);
                let op = Arc::clone(&entry.1);
                c.push(entry);
                return op;
            }
            // Drop old operators before allocating a new one.
            let need = Self::bytes_for(grid);
            let mut total: usize = c.iter().map(|(_, o)| o.bytes()).sum::<usize>() + need;
            while total > CACHE_BYTES && !c.is_empty() {
                total -= c.remove(0).1.bytes();
            }
        }
        let op = Arc::new(Self::build(order, grid, rule, Exec::default()));
        let mut c = cache.lock().expect("operator cache poisoned");
        c.push((key, Arc::clone(&op)));
        op
    }

    fn bytes_for(grid: &HalfPlaneGrid) -> usize {
        let n_r = grid.n_r();
        n_r * (n_r + 1) / 2 * (grid.n_z() + 1) * 8
    }

    /// Approximate heap size of the stored spectra.
    pub fn bytes(&self) -> usize {
        self.spectra.len() * 8
    }

    pub fn order(&self) -> &FractionalOrder {
        &self.order
    }
    pub fn grid(&self) -> &HalfPlaneGrid {
        &self.grid
    }
    pub fn rule(&self) -> SingularCellRule {
        self.rule
    }

    #[inline]
    fn pair_offset(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let n = self.grid.n_r();
        (i * (2 * n - i + 1) / 2 + (j - i)) * (self.grid.n_z() + 1)
    }

    /// `ψ` for the given `ξ`.
    pub fn apply(&self, xi: &ScalarField) -> Result<ScalarField> {
        self.apply_with(xi, Exec::default())
    }

    pub fn apply_with(&self, xi: &ScalarField, exec: Exec) -> Result<ScalarField> {
        self.grid.check_same(xi.grid())?;
        let g = self.grid;
        let (n_r, n_z) = (g.n_r(), g.n_z());
        let nf = n_z + 1;
        let x_hat = row_spectra(&self.forward, xi, exec);
        let scale = 1.0 / self.fft_len as f64;
        let prefactor = self.order.stream_prefactor();
        let mut out = vec![0.0; g.len()];
        exec.for_each_chunk_mut(&mut out, n_z, |i, row| {
            let mut acc = vec![Complex::new(0.0, 0.0); nf];
            for (j, x) in x_hat.iter().enumerate() {
                let off = self.pair_offset(i, j);
                let p = &self.spectra[off..off + nf];
                for ((a, &pk), xk) in acc.iter_mut().zip(p).zip(x) {
                    a.re += pk * xk.re;
                    a.im += pk * xk.im;
                }
            }
            let mut buf = self.inverse.make_output_vec();
            inverse_into(&self.inverse, &mut acc, &mut buf);
            for (r, b) in row.iter_mut().zip(&buf) {
                *r = b * scale;
            }
            apply_patch(&self.near[i], xi, i, row, n_r);
            for r in row.iter_mut() {
                *r *= prefactor;
            }
        });
        if xi.is_nonnegative() {
            // Every weight is positive; negatives here are FFT rounding.
            for v in &mut out {
                *v = v.max(0.0);
            }
        }
        ScalarField::new(g, out)
    }

    /// `ψ` plus the error estimate and the support check.
    pub fn solve(&self, xi: &ScalarField, exec: Exec) -> Result<StreamSolveReport> {
        let psi = self.apply_with(xi, exec)?;
        let xi_max = xi.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let psi_max = psi.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // table interpolation is good to ~1e-12 relative; allow 1e-11
        let est = self.order.stream_prefactor() * self.weight_error * xi_max + 1e-11 * psi_max;
        Ok(StreamSolveReport {
            psi,
            singular_cell_rule: self.rule,
            est_quadrature_error: est,
            support_near_boundary: support_near_boundary(xi),
        })
    }
}

/// True if `{|ξ| > SUPPORT_EPS·max|ξ|}` comes within [`MIN_SUPPORT_MARGIN`]
/// cells of the outer box edges.
pub fn support_near_boundary(xi: &ScalarField) -> bool {
    let m = xi.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    match xi.support_margin_cells(SUPPORT_EPS * m) {
        Some(margin) => margin < MIN_SUPPORT_MARGIN,
        None => false,
    }
}

fn row_spectra(forward: &Arc<dyn RealToComplex<f64>>, xi: &ScalarField, exec: Exec) -> Vec<Vec<Complex<f64>>> {
    let g = *xi.grid();
    let cell = g.cell_area();
    exec.map(g.n_r(), |j| {
        let w = g.r(j) * cell;
        let mut buf = forward.make_input_vec();
        for (b, &x) in buf.iter_mut().zip(xi.row(j)) {
            *b = x * w;
        }
        let mut spec = forward.make_output_vec();
        let mut scratch = forward.make_scratch_vec();
        forward.process_with_scratch(&mut buf, &mut spec, &mut scratch).expect("buffer sizes match the plan");
        spec
    })
}

fn inverse_into(inverse: &Arc<dyn ComplexToReal<f64>>, spec: &mut [Complex<f64>], out: &mut [f64]) {
    // the first and last bins of a real signal are real; drop rounding
    spec[0].im = 0.0;
    let last = spec.len() - 1;
    spec[last].im = 0.0;
    let mut scratch = inverse.make_scratch_vec();
    inverse.process_with_scratch(spec, out, &mut scratch).expect("buffer sizes match the plan");
}

fn apply_patch(weights: &[f64; PATCH * PATCH], xi: &ScalarField, i: usize, row: &mut [f64], n_r: usize) {
    let n_z = row.len();
    for dj in offsets() {
        let j = i as isize + dj;
        if j < 0 || j >= n_r as isize {
            continue;
        }
        let src = xi.row(j as usize);
        for dl in offsets() {
            let w = weights[patch_index(dj, dl)];
            if w == 0.0 {
                continue;
            }
            let lo = (-dl).max(0) as usize;
            let hi = (n_z as isize - dl.max(0)) as usize;
            for k in lo..hi {
                row[k] += w * src[(k as isize + dl) as usize];
            }
        }
    }
}

/// Near-field corrections `∫_cell G r̄ − (point weight)` for every target
/// row, symmetrised so that `r_i W_{ij} = r_j W_{ji}` holds exactly.
fn stream_near_field(table: &KernelTable, grid: &HalfPlaneGrid, rule: SingularCellRule, exec: Exec) -> (Vec<[f64; PATCH * PATCH]>, f64) {
    let g = *grid;
    let n_r = g.n_r();
    let (h_r, h_z) = (g.h_r(), g.h_z());
    let a = table.a();
    let beta = 2.0 - 2.0 * a;
    let k_small = FractionalOrder::new(a).expect("table order is valid").small_s_coefficient();
    let g16 = GaussRule::new(16);
    let g8 = GaussRule::new(8);
    let g4 = GaussRule::new(4);
    let g2 = GaussRule::new(2);

    let rows = exec.map(n_r, |i| {
        let ri = g.r(i);
        let mut c = [0.0; PATCH * PATCH];
        let mut err: f64 = 0.0;
        let integrand = |rb: f64, zb: f64| table.g(ri, 0.0, rb, zb) * rb;
        for dj in offsets() {
            let j = i as isize + dj;
            if j < 0 || j >= n_r as isize {
                continue;
            }
            let rj = g.r(j as usize);
            for dl in offsets() {
                let zc = dl as f64 * h_z;
                let is_self = dj == 0 && dl == 0;
                let point = if is_self { 0.0 } else { table.g(ri, 0.0, rj, zc) * rj * h_r * h_z };
                let cell = match (rule, is_self) {
                    (SingularCellRule::CellAverage, true) => {
                        let fine = near::self_cell(&integrand, ri, 0.0, 0.5 * h_r, 0.5 * h_z, beta, &g16);
                        let coarse = near::self_cell(&integrand, ri, 0.0, 0.5 * h_r, 0.5 * h_z, beta, &g8);
                        err = err.max((fine - coarse).abs());
                        fine
                    }
                    (SingularCellRule::CellAverage, false) => {
                        near::regular_cell(&integrand, rj - 0.5 * h_r, rj + 0.5 * h_r, zc - 0.5 * h_z, zc + 0.5 * h_z, &g8)
                    }
                    (SingularCellRule::Subtract, true) => {
                        let lead = k_small * ri * ri;
                        let singular = lead * near::power_over_rectangle(0.5 * h_r, 0.5 * h_z, beta, &g16);
                        let rem = |rb: f64, zb: f64| {
                            let t2 = (rb - ri) * (rb - ri) + zb * zb;
                            integrand(rb, zb) - lead * t2.powf(-0.5 * beta)
                        };
                        let (r0, r1, z0, z1) = (ri - 0.5 * h_r, ri + 0.5 * h_r, -0.5 * h_z, 0.5 * h_z);
                        let fine = near::regular_cell(&rem, r0, r1, z0, z1, &g4);
                        let coarse = near::regular_cell(&rem, r0, r1, z0, z1, &g2);
                        err = err.max((fine - coarse).abs());
                        singular + fine
                    }
                    (SingularCellRule::Subtract, false) => point,
                };
                c[patch_index(dj, dl)] = cell - point;
            }
        }
        (c, err)
    });

    let mut sym = vec![[0.0; PATCH * PATCH]; n_r];
    for i in 0..n_r {
        for dj in offsets() {
            let j = i as isize + dj;
            if j < 0 || j >= n_r as isize {
                continue;
            }
            let j = j as usize;
            let ratio = g.r(j) / g.r(i);
            for dl in offsets() {
                sym[i][patch_index(dj, dl)] = 0.5 * (rows[i].0[patch_index(dj, dl)] + ratio * rows[j].0[patch_index(-dj, -dl)]);
            }
        }
    }
    let err = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    (sym, err)
}

/// `ψ = 𝒢_a[ξ]` with the default rule and a shared operator.
pub fn compute_stream(order: &FractionalOrder, xi: &ScalarField) -> Result<StreamSolveReport> {
    compute_stream_with(order, xi, SingularCellRule::default(), Exec::default())
}

pub fn compute_stream_with(order: &FractionalOrder, xi: &ScalarField, rule: SingularCellRule, exec: Exec) -> Result<StreamSolveReport> {
    StreamOperator::shared(order, xi.grid(), rule).solve(xi, exec)
}

/// Centred `∂_r` along each column, second-order one-sided in the first
/// and last rows.
pub(crate) fn d_dr(values: &[f64], g: &HalfPlaneGrid) -> Vec<f64> {
    let (n_r, n_z) = (g.n_r(), g.n_z());
    let inv = 1.0 / (2.0 * g.h_r());
    let at = |i: usize, k: usize| values[i * n_z + k];
    let mut out = vec![0.0; values.len()];
    for i in 0..n_r {
        for k in 0..n_z {
            out[i * n_z + k] = inv
                * if i == 0 {
                    -3.0 * at(0, k) + 4.0 * at(1, k) - at(2, k)
                } else if i == n_r - 1 {
                    3.0 * at(i, k) - 4.0 * at(i - 1, k) + at(i - 2, k)
                } else {
                    at(i + 1, k) - at(i - 1, k)
                };
        }
    }
    out
}

/// Centred `∂_z` along each row, second-order one-sided at `±z_max`.
pub(crate) fn d_dz(values: &[f64], g: &HalfPlaneGrid) -> Vec<f64> {
    let n_z = g.n_z();
    let inv = 1.0 / (2.0 * g.h_z());
    let mut out = vec![0.0; values.len()];
    for (src, dst) in values.chunks_exact(n_z).zip(out.chunks_exact_mut(n_z)) {
        dst[0] = inv * (-3.0 * src[0] + 4.0 * src[1] - src[2]);
        for k in 1..n_z - 1 {
            dst[k] = inv * (src[k + 1] - src[k - 1]);
        }
        dst[n_z - 1] = inv * (3.0 * src[n_z - 1] - 4.0 * src[n_z - 2] + src[n_z - 3]);
    }
    out
}

/// `v^r = -∂_z ψ / r`, `v^z = ∂_r ψ / r` by finite differences.
pub fn velocity_from_stream(psi: &ScalarField) -> Result<VelocityField> {
    let g = *psi.grid();
    let mut v_r = d_dz(psi.values(), &g);
    let mut v_z = d_dr(psi.values(), &g);
    for i in 0..g.n_r() {
        let inv_r = 1.0 / g.r(i);
        let span = i * g.n_z()..(i + 1) * g.n_z();
        v_r[span.clone()].iter_mut().for_each(|v| *v *= -inv_r);
        v_z[span].iter_mut().for_each(|v| *v *= inv_r);
    }
    VelocityField::new(g, v_r, v_z)
}

/// Discrete `∂_r(r v^r) + ∂_z(r v^z)` with the stencils of
/// [`velocity_from_stream`].
pub fn divergence(v: &VelocityField) -> Result<ScalarField> {
    let g = *v.grid();
    let mut fr = v.v_r.clone();
    let mut fz = v.v_z.clone();
    for i in 0..g.n_r() {
        let r = g.r(i);
        let span = i * g.n_z()..(i + 1) * g.n_z();
        fr[span.clone()].iter_mut().for_each(|x| *x *= r);
        fz[span].iter_mut().for_each(|x| *x *= r);
    }
    let a = d_dr(&fr, &g);
    let b = d_dz(&fz, &g);
    ScalarField::new(g, a.iter().zip(&b).map(|(x, y)| x + y).collect())
}

/// Fourth-order centred `∂_r(r v^r) + ∂_z(r v^z)` on nodes at least two
/// cells from every edge (zero on the rim).
///
/// With the stencils of [`velocity_from_stream`] the second-order
/// divergence of a stream-derived velocity vanishes identically, because
/// the r- and z-differences commute. This operator does not share that
/// cancellation, so it measures how far the discrete velocity is from being
/// solenoidal in the continuum sense: `O(h²)` for the stream path.
pub fn divergence_high_order(v: &VelocityField) -> Result<ScalarField> {
    let g = *v.grid();
    let (n_r, n_z) = (g.n_r(), g.n_z());
    if n_r < 5 || n_z < 5 {
        return Err(Error::domain("fourth-order divergence needs at least 5 cells per direction"));
    }
    let fr = |i: usize, k: usize| g.r(i) * v.v_r[g.index(i, k)];
    let fz = |i: usize, k: usize| g.r(i) * v.v_z[g.index(i, k)];
    let (cr, cz) = (1.0 / (12.0 * g.h_r()), 1.0 / (12.0 * g.h_z()));
    let mut out = vec![0.0; g.len()];
    for i in 2..n_r - 2 {
        for k in 2..n_z - 2 {
            let dr = -fr(i + 2, k) + 8.0 * fr(i + 1, k) - 8.0 * fr(i - 1, k) + fr(i - 2, k);
            let dz = -fz(i, k + 2) + 8.0 * fz(i, k + 1) - 8.0 * fz(i, k - 1) + fz(i, k - 2);
            out[g.index(i, k)] = cr * dr + cz * dz;
        }
    }
    ScalarField::new(g, out)
}

/// Velocity by direct summation of the kernel derivatives
/// `∂_r G_a`, `∂_z G_a` against `ξ`, with cell-integrated near field.
///
/// The derivative lines are not symmetric in `(i, j)` and are generated on
/// the fly, so this costs `O(n_r² n_z)` kernel evaluations per call. It is
/// the independent check on [`velocity_from_stream`], not the workhorse.
pub fn velocity_direct(order: &FractionalOrder, xi: &ScalarField) -> Result<VelocityField> {
    velocity_direct_with(order, xi, Exec::default())
}

pub fn velocity_direct_with(order: &FractionalOrder, xi: &ScalarField, exec: Exec) -> Result<VelocityField> {
    let table = shared_table(order);
    let g = *xi.grid();
    let (n_r, n_z) = (g.n_r(), g.n_z());
    let m = 2 * n_z;
    let nf = n_z + 1;
    let h_z = g.h_z();
    let mut planner = RealFftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(m);
    let inverse = planner.plan_fft_inverse(m);
    let x_hat = row_spectra(&forward, xi, exec);
    let (near_r, near_z) = velocity_near_field(&table, &g, exec);
    let prefactor = order.stream_prefactor();
    let scale = 1.0 / m as f64;

    let rows = exec.map(n_r, |i| {
        let ri = g.r(i);
        let mut acc_r = vec![Complex::new(0.0, 0.0); nf];
        let mut acc_z = vec![Complex::new(0.0, 0.0); nf];
        let mut line_r = forward.make_input_vec();
        let mut line_z = forward.make_input_vec();
        let mut spec_r = forward.make_output_vec();
        let mut spec_z = forward.make_output_vec();
        let mut scratch = forward.make_scratch_vec();
        for (j, x) in x_hat.iter().enumerate() {
            let rj = g.r(j);
            line_r[n_z] = 0.0;
            line_z[n_z] = 0.0;
            for mm in 0..n_z {
                let (gr, gz) = if i == j && mm == 0 { (0.0, 0.0) } else { table.g_grad(ri, mm as f64 * h_z, rj, 0.0) };
                line_r[mm] = gr;
                line_z[mm] = gz;
                if mm > 0 {
                    line_r[m - mm] = gr;
                    line_z[m - mm] = -gz;
                }
            }
            forward.process_with_scratch(&mut line_r, &mut spec_r, &mut scratch).expect("buffer sizes match the plan");
            forward.process_with_scratch(&mut line_z, &mut spec_z, &mut scratch).expect("buffer sizes match the plan");
            for k in 0..nf {
                acc_r[k] += spec_r[k] * x[k];
                acc_z[k] += spec_z[k] * x[k];
            }
        }
        let mut dr = inverse.make_output_vec();
        let mut dz = inverse.make_output_vec();
        inverse_into(&inverse, &mut acc_r, &mut dr);
        inverse_into(&inverse, &mut acc_z, &mut dz);
        let mut dr: Vec<f64> = dr[..n_z].iter().map(|v| v * scale).collect();
        let mut dz: Vec<f64> = dz[..n_z].iter().map(|v| v * scale).collect();
        apply_patch(&near_r[i], xi, i, &mut dr, n_r);
        apply_patch(&near_z[i], xi, i, &mut dz, n_r);
        let c = prefactor / ri;
        let v_r: Vec<f64> = dz.iter().map(|v| -c * v).collect();
        let v_z: Vec<f64> = dr.iter().map(|v| c * v).collect();
        (v_r, v_z)
    });
    let mut v_r = Vec::with_capacity(g.len());
    let mut v_z = Vec::with_capacity(g.len());
    for (a, b) in rows {
        v_r.extend(a);
        v_z.extend(b);
    }
    VelocityField::new(g, v_r, v_z)
}

type Patch = [f64; PATCH * PATCH];

fn velocity_near_field(table: &KernelTable, g: &HalfPlaneGrid, exec: Exec) -> (Vec<Patch>, Vec<Patch>) {
    let n_r = g.n_r();
    let (h_r, h_z) = (g.h_r(), g.h_z());
    let gamma = 3.0 - 2.0 * table.a();
    let g16 = GaussRule::new(16);
    let g8 = GaussRule::new(8);
    let rows = exec.map(n_r, |i| {
        let ri = g.r(i);
        let mut cr = [0.0; PATCH * PATCH];
        let mut cz = [0.0; PATCH * PATCH];
        let fr = |rb: f64, zb: f64| table.g_grad(ri, 0.0, rb, zb).0 * rb;
        let fz = |rb: f64, zb: f64| table.g_grad(ri, 0.0, rb, zb).1 * rb;
        for dj in offsets() {
            let j = i as isize + dj;
            if j < 0 || j >= n_r as isize {
                continue;
            }
            let rj = g.r(j as usize);
            for dl in offsets() {
                let zc = dl as f64 * h_z;
                let idx = patch_index(dj, dl);
                if dj == 0 && dl == 0 {
                    cr[idx] = near::self_cell(&fr, ri, 0.0, 0.5 * h_r, 0.5 * h_z, gamma, &g16);
                    cz[idx] = near::self_cell(&fz, ri, 0.0, 0.5 * h_r, 0.5 * h_z, gamma, &g16);
                } else {
                    let (pr, pz) = table.g_grad(ri, 0.0, rj, zc);
                    let w = rj * h_r * h_z;
                    let (r0, r1, z0, z1) = (rj - 0.5 * h_r, rj + 0.5 * h_r, zc - 0.5 * h_z, zc + 0.5 * h_z);
                    cr[idx] = near::regular_cell(&fr, r0, r1, z0, z1, &g8) - pr * w;
                    cz[idx] = near::regular_cell(&fz, r0, r1, z0, z1, &g8) - pz * w;
                }
            }
        }
        (cr, cz)
    });
    rows.into_iter().unzip()
}

#[cfg(test)]
mod tests;
