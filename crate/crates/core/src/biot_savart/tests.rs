use super::*;
use crate::fields::{lp_norm, weighted_integral, Weight};
use crate::fixtures::gaussian_torus;
use crate::kernel::eval_G;
use crate::quad::{integrate_adaptive, Tolerance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn order(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).unwrap()
}

fn torus(n_r: usize, extent: f64) -> ScalarField {
    gaussian_torus(&HalfPlaneGrid::square(n_r, extent).unwrap(), 1.0, 1.0, 0.25)
}

fn random_field(g: HalfPlaneGrid, rng: &mut ChaCha8Rng) -> ScalarField {
    // sparse nonnegative noise, kept away from the box edges
    let mut v = vec![0.0; g.len()];
    for i in 0..g.n_r() - 4 {
        for k in 4..g.n_z() - 4 {
            if rng.gen_bool(0.3) {
                v[g.index(i, k)] = rng.gen_range(0.0..2.0);
            }
        }
    }
    ScalarField::new(g, v).unwrap()
}

#[test]
fn zero_vorticity_gives_zero_stream() {
    let g = HalfPlaneGrid::square(8, 1.0).unwrap();
    let rep = compute_stream(&order(0.75), &ScalarField::zeros(g)).unwrap();
    assert!(rep.psi.values().iter().all(|&v| v == 0.0));
    let v = velocity_direct(&order(0.75), &ScalarField::zeros(g)).unwrap();
    assert!(v.v_r.iter().chain(&v.v_z).all(|&x| x == 0.0));
}

#[test]
fn single_cell_source_far_field() {
    let o = order(0.75);
    let g = HalfPlaneGrid::square(16, 2.0).unwrap();
    let (js, ls) = (5, 11);
    let mut vals = vec![0.0; g.len()];
    vals[g.index(js, ls)] = 1.0;
    let xi = ScalarField::new(g, vals).unwrap();
    let psi = compute_stream(&o, &xi).unwrap().psi;
    let mass = g.r(js) * g.cell_area();
    for (i, k) in [(0, 0), (15, 31), (12, 4), (2, 25), (9, 11)] {
        let exact = o.stream_prefactor() * eval_G(&o, g.r(i), g.z(k), g.r(js), g.z(ls)).unwrap().value * mass;
        let got = psi.get(i, k);
        assert!(((got - exact) / exact).abs() < 1e-10, "({i},{k}): {got} vs {exact}");
    }
}

/// Literal double sum over source cells with quadrature-evaluated kernel
/// values (no table, no FFT).
fn brute_force_far(o: &FractionalOrder, xi: &ScalarField) -> Vec<f64> {
    let g = *xi.grid();
    let mut out = vec![0.0; g.len()];
    for i in 0..g.n_r() {
        for k in 0..g.n_z() {
            let mut s = 0.0;
            for j in 0..g.n_r() {
                for l in 0..g.n_z() {
                    let x = xi.get(j, l);
                    if x == 0.0 || (i == j && k == l) {
                        continue;
                    }
                    s += eval_G(o, g.r(i), g.z(k), g.r(j), g.z(l)).unwrap().value * x * g.r(j) * g.cell_area();
                }
            }
            out[g.index(i, k)] = o.stream_prefactor() * s;
        }
    }
    out
}

#[test]
fn fft_application_matches_literal_sum() {
    let o = order(0.6);
    let g = HalfPlaneGrid::new(6, 12, 1.5, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let xi = ScalarField::new(g, (0..g.len()).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    let mut op = StreamOperator::build(&o, &g, SingularCellRule::CellAverage, Exec::Serial);
    op.near.iter_mut().for_each(|p| *p = [0.0; PATCH * PATCH]);
    let got = op.apply_with(&xi, Exec::Serial).unwrap();
    let want = brute_force_far(&o, &xi);
    for (a, b) in got.values().iter().zip(&want) {
        assert!(((a - b) / b).abs() < 1e-10, "{a} vs {b}");
    }
}

/// `∫_cell G r̄` in polar coordinates around the target, adaptive in ρ.
fn self_cell_oracle(o: &FractionalOrder, ri: f64, hr: f64, hz: f64) -> f64 {
    use std::f64::consts::PI;
    let outer = GaussRule::new(24);
    let tol = Tolerance::new(1e-14, 1e-11);
    let c0 = (hz / hr).atan();
    let breaks = [0.0, c0, PI - c0, PI + c0, 2.0 * PI - c0, 2.0 * PI];
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += outer.integrate(w[0], w[1], |phi| {
            let (s, c) = phi.sin_cos();
            let rho_max = (hr / c.abs()).min(hz / s.abs());
            let f = |rho: f64| {
                let rb = ri + rho * c;
                if rb <= 0.0 {
                    0.0
                } else {
                    eval_G(o, ri, 0.0, rb, rho * s).unwrap().value * rb * rho
                }
            };
            integrate_adaptive(f, &[0.0, 1e-6 * rho_max, 1e-3 * rho_max, rho_max], tol, 2000).value
        });
    }
    total
}

#[test]
fn self_cell_weights_match_polar_oracle() {
    for a in [0.6, 0.9] {
        let o = order(a);
        let g = HalfPlaneGrid::new(8, 16, 1.0, 1.0).unwrap();
        let (near, _) = stream_near_field(&shared_table(&o), &g, SingularCellRule::CellAverage, Exec::Serial);
        for i in [0, 3] {
            let want = self_cell_oracle(&o, g.r(i), 0.5 * g.h_r(), 0.5 * g.h_z());
            let got = near[i][patch_index(0, 0)];
            assert!(((got - want) / want).abs() < 1e-8, "a={a} i={i}: {got} vs {want}");
        }
    }
}

#[test]
fn subtract_rule_agrees_with_cell_average() {
    let o = order(0.75);
    let xi = torus(32, 2.5);
    let a = compute_stream_with(&o, &xi, SingularCellRule::CellAverage, Exec::Serial).unwrap();
    let b = compute_stream_with(&o, &xi, SingularCellRule::Subtract, Exec::Serial).unwrap();
    assert_eq!(b.singular_cell_rule, SingularCellRule::Subtract);
    let gap = a.psi.l2_distance(&b.psi).unwrap() / lp_norm(&a.psi, 2.0).unwrap();
    assert!(gap < 1e-2, "{gap}");
    assert!(a.est_quadrature_error > 0.0 && a.est_quadrature_error < 1e-4 * a.psi.max(), "{} {}", a.est_quadrature_error, a.psi.max());
}

#[test]
fn stream_is_nonnegative_for_random_nonnegative_vorticity() {
    let o = order(0.6);
    let g = HalfPlaneGrid::square(16, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let xi = random_field(g, &mut rng);
        let psi = compute_stream(&o, &xi).unwrap().psi;
        assert!(psi.values().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn bilinear_form_is_symmetric() {
    let g = HalfPlaneGrid::square(16, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for a in [0.6, 0.9] {
        for rule in [SingularCellRule::CellAverage, SingularCellRule::Subtract] {
            let o = order(a);
            let x1 = random_field(g, &mut rng);
            let x2 = random_field(g, &mut rng);
            let p1 = compute_stream_with(&o, &x1, rule, Exec::Serial).unwrap().psi;
            let p2 = compute_stream_with(&o, &x2, rule, Exec::Serial).unwrap().psi;
            let b12 = weighted_integral(&p1.zip_with(&x2, |p, x| p * x).unwrap(), Weight::One);
            let b21 = weighted_integral(&p2.zip_with(&x1, |p, x| p * x).unwrap(), Weight::One);
            assert!(((b12 - b21) / b12).abs() < 1e-12, "{rule:?}: {b12} {b21}");
        }
    }
}

#[test]
fn serial_and_parallel_bit_identical() {
    let o = order(0.75);
    let xi = torus(16, 2.5);
    let g = *xi.grid();
    let s = StreamOperator::build(&o, &g, SingularCellRule::CellAverage, Exec::Serial);
    let p = StreamOperator::build(&o, &g, SingularCellRule::CellAverage, Exec::Parallel);
    assert_eq!(s.spectra, p.spectra);
    assert_eq!(s.apply_with(&xi, Exec::Serial).unwrap(), p.apply_with(&xi, Exec::Parallel).unwrap());
    assert_eq!(velocity_direct_with(&o, &xi, Exec::Serial).unwrap(), velocity_direct_with(&o, &xi, Exec::Parallel).unwrap());
}

#[test]
fn far_field_decays_faster_than_r_squared() {
    let o = order(0.75);
    let xi = torus(48, 4.0);
    let psi = compute_stream(&o, &xi).unwrap().psi;
    let g = *psi.grid();
    let near_ring = (0..g.n_z()).map(|k| psi.get(g.n_r() / 4, k) / g.r(g.n_r() / 4).powi(2)).fold(0.0, f64::max);
    let edge = (0..g.n_z()).map(|k| psi.get(g.n_r() - 1, k) / g.r(g.n_r() - 1).powi(2)).fold(0.0, f64::max);
    let top = (0..g.n_r()).map(|i| psi.get(i, g.n_z() - 1) / g.r(i).powi(2)).fold(0.0, f64::max);
    assert!(edge < 0.1 * near_ring && top < 0.1 * near_ring, "{near_ring} {edge} {top}");
}

#[test]
fn stream_bounded_by_norm_envelope() {
    // ψ ≤ C (r^{1+a} ‖ξ‖_{3/(1+a)} + r^{2a} ‖ξ‖_{3/2}); C is calibrated here.
    for a in [0.6, 0.75, 0.9] {
        let o = order(a);
        let xi = torus(48, 4.0);
        let psi = compute_stream(&o, &xi).unwrap().psi;
        let g = *psi.grid();
        let n1 = lp_norm(&xi, 3.0 / (1.0 + a)).unwrap();
        let n2 = lp_norm(&xi, 1.5).unwrap();
        let mut c: f64 = 0.0;
        for i in 0..g.n_r() {
            let r = g.r(i);
            let env = r.powf(1.0 + a) * n1 + r.powf(2.0 * a) * n2;
            for k in 0..g.n_z() {
                c = c.max(psi.get(i, k) / env);
            }
        }
        assert!(c.is_finite() && c < 0.5, "a={a}: C={c}");
    }
}

#[test]
fn stream_velocity_exact_cases() {
    let g = HalfPlaneGrid::new(10, 20, 2.0, 3.0).unwrap();
    let c = ScalarField::from_fn(g, |_, _| 3.7).unwrap();
    let v = velocity_from_stream(&c).unwrap();
    assert!(v.v_r.iter().chain(&v.v_z).all(|&x| x.abs() < 1e-12));
    let w = 0.8;
    let psi = ScalarField::from_fn(g, |r, _| 0.5 * w * r * r).unwrap();
    let v = velocity_from_stream(&psi).unwrap();
    for j in 0..g.len() {
        assert!(v.v_r[j].abs() < 1e-12);
        assert!((v.v_z[j] - w).abs() < 1e-12, "{}", v.v_z[j]);
    }
}

#[test]
fn stream_velocity_divergence_vanishes_identically() {
    // The difference operators in r and z commute, so the stream-derived
    // velocity is discretely divergence-free to rounding.
    let o = order(0.75);
    let psi = compute_stream(&o, &torus(24, 2.5)).unwrap().psi;
    let v = velocity_from_stream(&psi).unwrap();
    let div = divergence(&v).unwrap();
    let scale = v.max_speed();
    assert!(div.values().iter().all(|d| d.abs() < 1e-10 * scale));
}

#[test]
fn direct_velocity_mirror_symmetry() {
    let o = order(0.75);
    let xi = torus(16, 2.5);
    let g = *xi.grid();
    let v = velocity_direct(&o, &xi).unwrap();
    let scale = v.max_speed();
    for i in 0..g.n_r() {
        for k in 0..g.n_z() {
            let a = g.index(i, k);
            let b = g.index(i, g.n_z() - 1 - k);
            assert!((v.v_z[a] - v.v_z[b]).abs() < 1e-13 * scale);
            assert!((v.v_r[a] + v.v_r[b]).abs() < 1e-13 * scale);
        }
    }
}

#[test]
fn direct_velocity_converges_to_stream_velocity() {
    let o = order(0.75);
    let mut gaps = vec![];
    for n in [24, 48] {
        let xi = torus(n, 2.5);
        let vs = velocity_from_stream(&compute_stream(&o, &xi).unwrap().psi).unwrap();
        let vd = velocity_direct(&o, &xi).unwrap();
        gaps.push(vd.relative_l2_gap(&vs).unwrap());
    }
    assert!(gaps[1] < gaps[0] && gaps[1] < 0.05, "{gaps:?}");
}

#[test]
fn support_flag() {
    let g = HalfPlaneGrid::square(16, 1.0).unwrap();
    let mut v = vec![0.0; g.len()];
    v[g.index(15, 10)] = 1.0;
    let rep = compute_stream(&order(0.75), &ScalarField::new(g, v).unwrap()).unwrap();
    assert!(rep.support_near_boundary);
    let mut v = vec![0.0; g.len()];
    v[g.index(4, 16)] = 1.0;
    assert!(!compute_stream(&order(0.75), &ScalarField::new(g, v).unwrap()).unwrap().support_near_boundary);
}

#[test]
fn rule_parses() {
    assert_eq!("subtract".parse::<SingularCellRule>().unwrap(), SingularCellRule::Subtract);
    assert_eq!("cell-average".parse::<SingularCellRule>().unwrap(), SingularCellRule::CellAverage);
    assert!("sixteen-point".parse::<SingularCellRule>().is_err());
}

#[test]
fn high_order_divergence_second_order_convergence() {
    let o = order(0.75);
    let mut norms = vec![];
    for n in [32, 64] {
        let psi = compute_stream(&o, &torus(n, 2.5)).unwrap().psi;
        let d = divergence_high_order(&velocity_from_stream(&psi).unwrap()).unwrap();
        norms.push(lp_norm(&d, 2.0).unwrap());
    }
    assert!(norms[0] / norms[1] > 3.0, "{norms:?}");
    // exact for a rigid translation
    let g = HalfPlaneGrid::square(16, 1.0).unwrap();
    let psi = ScalarField::from_fn(g, |r, z| 0.5 * r * r + z * r * r).unwrap();
    let d = divergence_high_order(&velocity_from_stream(&psi).unwrap()).unwrap();
    assert!(d.values().iter().all(|v| v.abs() < 1e-10));
}
