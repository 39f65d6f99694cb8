use pdp_core::grid::{indicator, sech_well};
use pdp_core::spectral::solve_ground_state;
use pdp_core::timedomain::{filter_experiment, propagate, Absorber};
use pdp_core::{Complex64, Grid, SimConfig};
use proptest::prelude::*;

fn cfg(epsilon: f64, mu: f64, absorber: Absorber) -> SimConfig {
    SimConfig {
        grid: Grid::symmetric(30.0, 1201).unwrap(),
        epsilon,
        mu,
        t_final: 8.0,
        dt_max: 0.02,
        absorber,
        record_every: 4,
        snapshot_times: Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn closed_evolution_conserves_the_norm(
        epsilon in -1.0..1.0f64, mu in 0.5..4.0f64, depth in 0.5..2.0f64, start_depth in 0.5..2.0f64,
    ) {
        let c = SimConfig { snapshot_times: vec![0.0, 2.0, 4.0, 6.0, 8.0], ..cfg(epsilon, mu, Absorber::OFF) };
        let v = sech_well(depth, 1.0, 6.0, c.grid).unwrap();
        let beta = indicator(c.grid, 2.0).unwrap();
        // ground state of another well: not stationary for v
        let start = solve_ground_state(&sech_well(start_depth, 1.0, 6.0, c.grid).unwrap()).unwrap();
        let phi0: Vec<Complex64> = start.psi.iter().map(|p| Complex64::new(*p, 0.0)).collect();
        let r = propagate(&v, &beta, &phi0, &c).unwrap();
        // the scheme conserves the plain sum, not the trapezoid norm
        let h = c.grid.h();
        let sums: Vec<f64> = r.snapshots.iter().map(|s| h * s.density.iter().sum::<f64>()).collect();
        prop_assert_eq!(sums.len(), 5);
        let drift = sums.iter().map(|n| (n - sums[0]).abs()).fold(0.0, f64::max);
        prop_assert!(drift < 1e-12, "norm drift {}", drift);
    }

    #[test]
    fn absorbed_evolution_never_gains_norm(
        epsilon in 0.0..1.5f64, mu in 0.5..4.0f64, depth in 0.5..2.0f64,
    ) {
        let c = cfg(epsilon, mu, Absorber { width: 10.0, strength: 2.0 });
        let v = sech_well(depth, 1.0, 6.0, c.grid).unwrap();
        let beta = indicator(c.grid, 2.0).unwrap();
        let bs = solve_ground_state(&v).unwrap();
        let phi0: Vec<Complex64> = bs.psi.iter().map(|p| Complex64::new(*p, 0.0)).collect();
        let r = propagate(&v, &beta, &phi0, &c).unwrap();
        for (p, n) in r.projection_sq.iter().zip(&r.norm) {
            prop_assert!(*n <= r.norm[0] + 1e-10);
            prop_assert!((0.0..=1.0 + 1e-10).contains(p));
        }
    }
}

#[test]
fn unforced_bound_state_is_stationary() {
    let c = cfg(0.0, 2.0, Absorber { width: 10.0, strength: 2.0 });
    let v = sech_well(1.5, 1.0, 6.0, c.grid).unwrap();
    let beta = indicator(c.grid, 2.0).unwrap();
    let bs = solve_ground_state(&v).unwrap();
    let phi0: Vec<Complex64> = bs.psi.iter().map(|p| Complex64::new(*p, 0.0)).collect();
    let r = propagate(&v, &beta, &phi0, &c).unwrap();
    assert!((r.retained() - 1.0).abs() < 1e-9, "retained {}", r.retained());
}

#[test]
fn noisy_start_has_unit_projection_and_is_reproducible() {
    let c = cfg(0.5, 2.0, Absorber { width: 10.0, strength: 2.0 });
    let v = sech_well(1.5, 1.0, 6.0, c.grid).unwrap();
    let beta = indicator(c.grid, 2.0).unwrap();
    let a = filter_experiment(&v, &beta, &c, 0.1, 7).unwrap();
    let b = filter_experiment(&v, &beta, &c, 0.1, 7).unwrap();
    assert!((a.projection_sq[0] - 1.0).abs() < 1e-12);
    assert_eq!(a, b);
}
