//! Serial vs rayon execution of the hot loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ringwave::biot_savart::{velocity_direct_with, SingularCellRule, StreamOperator};
use ringwave::evolve::Evolver;
use ringwave::exec::Exec;
use ringwave::fields::{weighted_integral_with, HalfPlaneGrid, Weight};
use ringwave::fixtures::gaussian_torus;
use ringwave::kernel::{FractionalOrder, KernelTable};
use ringwave::rearrange::{steiner_with, translate_off_axis};
use std::hint::black_box;

const MODES: [(&str, Exec); 2] = [("serial", Exec::Serial), ("parallel", Exec::Parallel)];

fn order() -> FractionalOrder {
    FractionalOrder::new(0.75).unwrap()
}

fn kernel_table(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernel_table_build");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| KernelTable::build_with(black_box(&order()), exec)));
    }
    g.finish();
}

fn operator(c: &mut Criterion) {
    let mut g = c.benchmark_group("stream_operator");
    g.sample_size(10);
    for n in [32, 64] {
        let grid = HalfPlaneGrid::square(n, 2.5).unwrap();
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(format!("build/{name}"), n), &grid, |b, grid| {
                b.iter(|| StreamOperator::build(&order(), grid, SingularCellRule::CellAverage, exec))
            });
        }
    }
    for n in [64, 128] {
        let grid = HalfPlaneGrid::square(n, 2.5).unwrap();
        let op = StreamOperator::build(&order(), &grid, SingularCellRule::CellAverage, Exec::default());
        let xi = gaussian_torus(&grid, 1.0, 1.0, 0.25);
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(format!("apply/{name}"), n), &xi, |b, xi| {
                b.iter(|| op.apply_with(xi, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn velocity(c: &mut Criterion) {
    let mut g = c.benchmark_group("velocity_direct");
    g.sample_size(10);
    let grid = HalfPlaneGrid::square(64, 2.5).unwrap();
    let xi = gaussian_torus(&grid, 1.0, 1.0, 0.25);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| velocity_direct_with(&order(), &xi, exec).unwrap()));
    }
    g.finish();
}

fn fields(c: &mut Criterion) {
    let mut g = c.benchmark_group("fields");
    let grid = HalfPlaneGrid::square(256, 4.0).unwrap();
    let xi = translate_off_axis(&gaussian_torus(&grid, 1.0, 1.0, 0.25), 0.3).unwrap();
    for (name, exec) in MODES {
        g.bench_function(format!("steiner/{name}"), |b| b.iter(|| steiner_with(&xi, exec).unwrap()));
        g.bench_function(format!("integral/{name}"), |b| {
            b.iter(|| weighted_integral_with(&xi, Weight::RSquared, exec))
        });
    }
    g.finish();
}

fn evolve(c: &mut Criterion) {
    let mut g = c.benchmark_group("evolve_step");
    g.sample_size(10);
    let grid = HalfPlaneGrid::square(128, 2.5).unwrap();
    let xi = gaussian_torus(&grid, 1.0, 1.0, 0.25);
    for (name, exec) in MODES {
        let ev = Evolver::new(&order(), &grid).with_exec(exec);
        g.bench_function(name, |b| b.iter(|| ev.step(&xi, 0.01).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, kernel_table, operator, velocity, fields, evolve);
criterion_main!(benches);
