//! Tabulated `F_a` and `F_a'` on a logarithmic grid in `s`.
//!
//! Both are stored as `ln |F|` against `t = ln s`, together with the exact
//! log-log slopes `s F'/F` (and `s F''/F'`), and interpolated by monotone
//! cubic Hermite segments. Outside the table the small-`s` expansion
//! `K s^{-(1-a)} + c₀` and the large-`s` power law take over.

use super::{eval_F_prime_with, eval_F_second_with, eval_F_with, FractionalOrder};
use crate::exec::Exec;
use crate::quad::Tolerance;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

const LN_S_MIN: f64 = -36.841_361_487_904_734; // ln 1e-16
const LN_S_MAX: f64 = 36.841_361_487_904_734; // ln 1e16
const STEPS_PER_UNIT: f64 = 128.0;
const BUILD_TOL: Tolerance = Tolerance::new(1e-300, 1e-13);

/// Read-only lookup table for one fractional order.
#[derive(Debug, Clone)]
pub struct KernelTable {
    a: f64,
    dt: f64,
    inv_dt: f64,
    // (ln F, d ln F / d ln s)
    f: Vec<[f64; 2]>,
    // (ln(-F'), d ln(-F') / d ln s)
    fp: Vec<[f64; 2]>,
    small_coeff: f64,
    small_rem: f64,
}

impl KernelTable {
    pub fn build(order: &FractionalOrder) -> Self {
        Self::build_with(order, Exec::default())
    }

    pub fn build_with(order: &FractionalOrder, exec: Exec) -> Self {
        let n = ((LN_S_MAX - LN_S_MIN) * STEPS_PER_UNIT).round() as usize + 1;
        let dt = (LN_S_MAX - LN_S_MIN) / (n - 1) as f64;
        let nodes = exec.map(n, |k| {
            let s = (LN_S_MIN + k as f64 * dt).exp();
            let f = eval_F_with(order, s, BUILD_TOL).expect("s > 0").value;
            let fp = eval_F_prime_with(order, s, BUILD_TOL).expect("s > 0").value;
            let fpp = eval_F_second_with(order, s, BUILD_TOL).expect("s > 0").value;
            ([f.ln(), s * fp / f], [(-fp).ln(), s * fpp / fp])
        });
        let (mut f, mut fp): (Vec<_>, Vec<_>) = nodes.into_iter().unzip();
        limit_monotone(&mut f, dt);
        limit_monotone(&mut fp, dt);
        let a = order.a();
        let small_coeff = order.small_s_coefficient();
        let s0 = LN_S_MIN.exp();
        let small_rem = f[0][0].exp() - small_coeff * s0.powf(a - 1.0);
        Self { a, dt, inv_dt: 1.0 / dt, f, fp, small_coeff, small_rem }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    #[inline]
    fn locate(&self, t: f64) -> (usize, f64) {
        let x = (t - LN_S_MIN) * self.inv_dt;
        let k = (x as usize).min(self.f.len() - 2);
        (k, x - k as f64)
    }

    #[inline]
    fn hermite(data: &[[f64; 2]], k: usize, x: f64, dt: f64) -> f64 {
        let [y0, m0] = data[k];
        let [y1, m1] = data[k + 1];
        let x2 = x * x;
        let x3 = x2 * x;
        let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
        let h10 = x3 - 2.0 * x2 + x;
        let h01 = -2.0 * x3 + 3.0 * x2;
        let h11 = x3 - x2;
        h00 * y0 + h10 * dt * m0 + h01 * y1 + h11 * dt * m1
    }

    /// Interpolated `F_a(s)` for `s > 0`.
    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        let t = s.ln();
        if t < LN_S_MIN {
            return self.small_coeff * s.powf(self.a - 1.0) + self.small_rem;
        }
        if t >= LN_S_MAX {
            let [y, m] = self.f[self.f.len() - 1];
            return (y + m * (t - LN_S_MAX)).exp();
        }
        let (k, x) = self.locate(t);
        Self::hermite(&self.f, k, x, self.dt).exp()
    }

    /// Interpolated `F_a'(s)` for `s > 0`.
    #[inline]
    pub fn f_prime(&self, s: f64) -> f64 {
        let t = s.ln();
        let data = &self.fp;
        let ln = if t < LN_S_MIN {
            let [y, m] = data[0];
            y + m * (t - LN_S_MIN)
        } else if t >= LN_S_MAX {
            let [y, m] = data[data.len() - 1];
            y + m * (t - LN_S_MAX)
        } else {
            let (k, x) = self.locate(t);
            Self::hermite(data, k, x, self.dt)
        };
        -ln.exp()
    }

    /// `G_a = (r r̄)^{a-1/2} F_a(s)` from the table; `s` must be positive.
    #[inline]
    pub fn g(&self, r: f64, z: f64, rbar: f64, zbar: f64) -> f64 {
        let rr = r * rbar;
        let dr = r - rbar;
        let dz = z - zbar;
        rr.powf(self.a - 0.5) * self.f((dr * dr + dz * dz) / rr)
    }

    /// `(∂_r G_a, ∂_z G_a)` with respect to the target point `(r, z)`.
    #[inline]
    pub fn g_grad(&self, r: f64, z: f64, rbar: f64, zbar: f64) -> (f64, f64) {
        let rr = r * rbar;
        let dr = r - rbar;
        let dz = z - zbar;
        let s = (dr * dr + dz * dz) / rr;
        let pre = rr.powf(self.a - 0.5);
        let f = self.f(s);
        let fp = self.f_prime(s);
        let gr = pre / r * ((self.a - 0.5) * f - s * fp + 2.0 * dr / rbar * fp);
        let gz = pre * fp * 2.0 * dz / rr;
        (gr, gz)
    }
}

/// Fritsch–Carlson limiter on stored slopes (no-op for the smooth data here,
/// but it guarantees a monotone interpolant).
fn limit_monotone(data: &mut [[f64; 2]], dt: f64) {
    for k in 0..data.len() - 1 {
        let delta = (data[k + 1][0] - data[k][0]) / dt;
        if delta == 0.0 {
            data[k][1] = 0.0;
            data[k + 1][1] = 0.0;
            continue;
        }
        let alpha = data[k][1] / delta;
        let beta = data[k + 1][1] / delta;
        if alpha < 0.0 {
            data[k][1] = 0.0;
        }
        if beta < 0.0 {
            data[k + 1][1] = 0.0;
        }
        let r2 = alpha * alpha + beta * beta;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            data[k][1] = tau * alpha * delta;
            data[k + 1][1] = tau * beta * delta;
        }
    }
}

/// Process-wide table cache keyed by the exponent.
pub fn shared_table(order: &FractionalOrder) -> Arc<KernelTable> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<KernelTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = order.a().to_bits();
    if let Some(t) = cache.lock().expect("table cache poisoned").get(&key) {
        return Arc::clone(t);
    }
    // Build outside the lock; a racing duplicate build is harmless.
    let table = Arc::new(KernelTable::build(order));
    let mut guard = cache.lock().expect("table cache poisoned");
    Arc::clone(guard.entry(key).or_insert(table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{eval_F, eval_F_prime};

    #[test]
    fn table_matches_direct_quadrature() {
        for a in [0.6, 0.75, 0.9] {
            let o = FractionalOrder::new(a).unwrap();
            let table = shared_table(&o);
            let mut worst: f64 = 0.0;
            let mut worst_p: f64 = 0.0;
            // off-node samples across the whole range
            for k in 0..400 {
                let t = -30.0 + 60.0 * (k as f64 + 0.37) / 400.0;
                let s = t.exp();
                let f = eval_F(&o, s).unwrap().value;
                let fp = eval_F_prime(&o, s).unwrap().value;
                worst = worst.max(((table.f(s) - f) / f).abs());
                worst_p = worst_p.max(((table.f_prime(s) - fp) / fp).abs());
            }
            assert!(worst < 1e-7, "a={a}: F table error {worst:e}");
            assert!(worst_p < 1e-7, "a={a}: F' table error {worst_p:e}");
        }
    }

    #[test]
    fn extrapolation_is_continuous() {
        let o = FractionalOrder::new(0.75).unwrap();
        let table = shared_table(&o);
        let s0 = LN_S_MIN.exp();
        let below = table.f(s0 * (1.0 - 1e-9));
        let at = table.f(s0 * (1.0 + 1e-9));
        assert!(((below - at) / at).abs() < 1e-6);
        let s1 = LN_S_MAX.exp();
        let above = table.f(s1 * (1.0 + 1e-9));
        let at = table.f(s1 * (1.0 - 1e-9));
        assert!(((above - at) / at).abs() < 1e-6);
    }
}
