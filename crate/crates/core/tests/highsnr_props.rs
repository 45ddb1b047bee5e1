use proptest::prelude::*;
use slipt_core::highsnr::{calibrate_multipliers, compare_to_solver, highsnr_pmf};
use slipt_core::measure::{avg_eh, avg_power, MeasureOptions};
use slipt_core::solver::{max_harvested_energy, solve_capacity, SolveOptions};
use slipt_core::{ChannelSpec, ConstraintSet, InputGrid};

/// Mean of the tilted law on `grid` as a function of `λ₁`, by bisection on a
/// plain loop; independent of the calibrator.
fn power_root(eps: f64, grid: &InputGrid) -> f64 {
    let xs = grid.points();
    let mean = |l: f64| {
        let top = xs.iter().map(|x| -l * x).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = xs.iter().map(|x| (-l * x - top).exp()).collect();
        let z: f64 = w.iter().sum();
        w.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / z
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while mean(hi) > eps {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn power_only_calibration_matches_scalar_root() {
    let spec = ChannelSpec::reference();
    let grid = InputGrid::new(2.0, 41).unwrap();
    let c = ConstraintSet::new(2.0, 0.5, 0.0).unwrap();
    let hs = calibrate_multipliers(&c, &grid, &spec).unwrap();
    assert_eq!(hs.multipliers.lambda2, 0.0);
    assert!((avg_power(&hs.dist) - 0.5).abs() <= 1e-9);
    let l1 = power_root(0.5, &grid);
    assert!((hs.multipliers.lambda1 - l1).abs() <= 1e-6 * l1, "{} vs {l1}", hs.multipliers.lambda1);
}

#[test]
fn binding_energy_is_met_with_equality() {
    let spec = ChannelSpec::reference();
    let (a, eps) = (4.0, 1.0);
    let grid = InputGrid::new(a, 41).unwrap();
    let e_th = 0.97 * max_harvested_energy(a, eps, &spec);
    let hs = calibrate_multipliers(&ConstraintSet::new(a, eps, e_th).unwrap(), &grid, &spec).unwrap();
    assert!(hs.multipliers.lambda2 < 0.0);
    assert!((avg_eh(&hs.dist, &spec) - e_th).abs() <= 1e-8 * max_harvested_energy(a, a, &spec));
    assert!((avg_power(&hs.dist) - eps).abs() <= 1e-8 * a);
}

#[test]
fn divergence_shrinks_as_noise_vanishes() {
    // A fading-free link, so shrinking noise drives the solver toward the
    // noiseless grid problem.
    let base = ChannelSpec::reference().with_model(slipt_core::ChannelModel::Gaussian);
    let c = ConstraintSet::new(1.0, 0.3, 0.0).unwrap();
    let grid = InputGrid::new(1.0, 11).unwrap();
    let opts = SolveOptions {
        grid_points: 11,
        enforce_kkt: false,
        ..SolveOptions::default()
    };
    let mut tvs = Vec::new();
    for s2 in [1e-8, 1e-9, 1e-10, 1e-11, 1e-12] {
        let spec = base.with_noise_variance(s2).unwrap();
        let hs = calibrate_multipliers(&c, &grid, &spec).unwrap();
        let r = solve_capacity(&c, &grid, &spec, &opts).unwrap();
        tvs.push(compare_to_solver(&hs, &r, &spec, &MeasureOptions::default()).unwrap().total_variation);
    }
    assert!(tvs.windows(2).all(|w| w[1] <= w[0] + 1e-6), "{tvs:?}");
    assert!(tvs[4] < 1e-3, "{tvs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reevaluation_is_bit_exact(l1 in -20.0f64..20.0, l2 in -5e3f64..5e3, n in 2usize..60) {
        let spec = ChannelSpec::reference();
        let grid = InputGrid::new(3.0, n).unwrap();
        let hs = highsnr_pmf(l1, l2, &grid, &spec).unwrap();
        let again = highsnr_pmf(hs.multipliers.lambda1, hs.multipliers.lambda2, &grid, &spec).unwrap();
        prop_assert_eq!(hs.dist.pmf(), again.dist.pmf());
        prop_assert!((hs.dist.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(hs.log_z.is_finite());
    }

    #[test]
    fn pmf_matches_the_formula(l1 in -5.0f64..5.0, l2 in -1e3f64..1e3) {
        let spec = ChannelSpec::reference();
        let grid = InputGrid::new(1.0, 21).unwrap();
        let hs = highsnr_pmf(l1, l2, &grid, &spec).unwrap();
        for (p, x) in hs.dist.pmf().iter().zip(grid.points()) {
            let want = (-l1 * x - l2 * spec.harvested_energy(x) - hs.log_z).exp();
            prop_assert!((p - want).abs() <= 1e-12 * want.max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn non_negative_multipliers_give_log_concave_pmf(l1 in 0.0f64..20.0, l2 in 0.0f64..5e3) {
        let spec = ChannelSpec::reference();
        let grid = InputGrid::new(2.0, 31).unwrap();
        let hs = highsnr_pmf(l1, l2, &grid, &spec).unwrap();
        let lp: Vec<f64> = hs.dist.pmf().iter().map(|p| p.ln()).collect();
        for w in lp.windows(3) {
            let second = w[2] - 2.0 * w[1] + w[0];
            prop_assert!(second <= 1e-9 * (1.0 + w[1].abs()), "{second}");
        }
    }

    #[test]
    fn calibrated_law_meets_both_constraints(a in 0.5f64..8.0, r in 0.05f64..0.95, f in 0.0f64..0.98) {
        let spec = ChannelSpec::reference();
        let eps = r * a;
        let e_th = f * max_harvested_energy(a, eps, &spec);
        let grid = InputGrid::new(a, 51).unwrap();
        let hs = calibrate_multipliers(&ConstraintSet::new(a, eps, e_th).unwrap(), &grid, &spec).unwrap();
        prop_assert!(avg_power(&hs.dist) <= eps + 1e-8 * a);
        prop_assert!(avg_eh(&hs.dist, &spec) >= e_th - 1e-8 * max_harvested_energy(a, a, &spec));
        prop_assert!(hs.multipliers.lambda1 >= 0.0);
        prop_assert!(hs.multipliers.lambda2 <= 0.0);
    }
}
