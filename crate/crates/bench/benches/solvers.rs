use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pdp_core::fgr::{gamma, gamma_gradient_from};
use pdp_core::grid::sech_well;
use pdp_core::optimizer::BarrierProblem;
use pdp_core::spectral::{distorted_plane_waves, solve_ground_state, wronskian_at_zero};
use pdp_core::timedomain::propagate_with_state;
use pdp_core::{Complex64, DesignParams, Grid, PotentialField, SimConfig};

fn setup(n: usize) -> (PotentialField, DesignParams) {
    let g = Grid::symmetric(20.0, n).unwrap();
    let v = sech_well(2.0, 2.0, 12.0, g).unwrap();
    let p = DesignParams::with_indicator_beta(12.0, 1e3, 2.0, 1e-4, g, 2.0).unwrap();
    (v, p)
}

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral");
    for n in [1001, 2001, 4001] {
        let (v, _) = setup(n);
        group.bench_with_input(BenchmarkId::new("ground_state", n), &v, |b, v| {
            b.iter(|| solve_ground_state(black_box(v)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("plane_waves", n), &v, |b, v| {
            b.iter(|| distorted_plane_waves(black_box(v), 1.2).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("wronskian", n), &v, |b, v| b.iter(|| wronskian_at_zero(black_box(v))));
    }
    group.finish();
}

fn rate(c: &mut Criterion) {
    let mut group = c.benchmark_group("rate");
    for n in [1001, 2001, 4001] {
        let (v, p) = setup(n);
        group.bench_with_input(BenchmarkId::new("gamma", n), &v, |b, v| b.iter(|| gamma(black_box(v), &p).unwrap()));
        group.bench_with_input(BenchmarkId::new("gamma_and_gradient", n), &v, |b, v| {
            b.iter(|| {
                let r = gamma(black_box(v), &p).unwrap();
                gamma_gradient_from(v, &p, &r).unwrap()
            })
        });
        let problem = BarrierProblem::new(p.clone(), 1e-4);
        group.bench_with_input(BenchmarkId::new("barrier_with_gradient", n), &v, |b, v| {
            b.iter(|| problem.evaluate(black_box(v), true).unwrap())
        });
    }
    group.finish();
}

fn time_domain(c: &mut Criterion) {
    // 100 Crank-Nicolson steps on the standard simulation grid
    let cfg = SimConfig::standard(0.2, 2.0, 1.0);
    let v = sech_well(2.0, 2.0, 12.0, cfg.grid).unwrap();
    let beta = pdp_core::grid::indicator(cfg.grid, 2.0).unwrap();
    let bs = solve_ground_state(&v).unwrap();
    let phi0: Vec<Complex64> = bs.psi.iter().map(|p| Complex64::new(*p, 0.0)).collect();
    c.bench_function("propagate_100_steps", |b| {
        b.iter(|| propagate_with_state(&v, &beta, black_box(&phi0), &cfg, &bs).unwrap())
    });
}

criterion_group!(benches, spectral, rate, time_domain);
criterion_main!(benches);
