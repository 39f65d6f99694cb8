use pdp_core::fgr::{gamma, gamma_gradient, gamma_jost_form, random_direction};
use pdp_core::grid::sech_well;
use pdp_core::{DesignParams, Grid, PotentialField};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid() -> Grid {
    Grid::symmetric(20.0, 1201).unwrap()
}

fn well(seed: u64, a: f64, depth: f64, width: f64, wiggle: f64, symmetric: bool) -> PotentialField {
    let base = sech_well(depth, width, a, grid()).unwrap();
    let d = random_direction(&base, &mut ChaCha8Rng::seed_from_u64(seed), symmetric);
    base.perturbed(&d, wiggle).unwrap()
}

fn params(a: f64, mu: f64) -> DesignParams {
    DesignParams::with_indicator_beta(a, 1e3, mu, 1e-4, grid(), 2.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rate_is_non_negative_and_both_forms_agree(
        seed in any::<u64>(), a in 2.0..8.0f64, depth in 0.5..1.8f64, width in 0.8..2.0f64,
        wiggle in -0.2..0.2f64, mu in 2.0..4.0f64,
    ) {
        let v = well(seed, a, depth, width, wiggle, false);
        let p = params(a, mu);
        let r = gamma(&v, &p).unwrap();
        prop_assert!(r.gamma >= 0.0);
        prop_assert!((r.k_res * r.k_res - (r.lambda() + mu)).abs() < 1e-12 * mu);
        let jost = gamma_jost_form(&v, &p).unwrap();
        prop_assert!((jost - r.gamma).abs() <= 1e-8 * r.gamma.max(1e-300), "{} vs {}", jost, r.gamma);
    }

    #[test]
    fn gradient_vanishes_off_support_and_inherits_symmetry(
        seed in any::<u64>(), a in 2.0..8.0f64, depth in 0.5..1.8f64, width in 0.8..2.0f64,
        wiggle in -0.2..0.2f64,
    ) {
        let v = well(seed, a, depth, width, wiggle, true);
        let g = gamma_gradient(&v, &params(a, 2.0)).unwrap();
        for j in 0..v.grid().len() {
            if !v.in_support(j) {
                prop_assert_eq!(g.values[j], 0.0);
            }
        }
        prop_assert!(g.asymmetry() <= 1e-9 * g.max_abs(), "asymmetry {} of {}", g.asymmetry(), g.max_abs());
    }
}
