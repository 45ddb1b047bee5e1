use proptest::prelude::*;
use slipt_core::measure::{avg_eh, avg_power, mixture_information, ChannelTable, InputDistribution, MeasureOptions};
use slipt_core::solver::{self, kkt_verify, max_harvested_energy, solve_capacity, SolveOptions};
use slipt_core::{ChannelSpec, ConstraintSet, Error, InputGrid, MultiplierSet};

/// A moderate-SNR link where coarse grids already resolve the optimum.
fn moderate() -> ChannelSpec {
    ChannelSpec::reference().with_noise_variance(1e-8).unwrap()
}

/// A low-SNR link whose continuous optimum is resolved by a 21-point grid.
fn low() -> ChannelSpec {
    ChannelSpec::reference().with_noise_variance(1e-7).unwrap()
}

/// Grid-problem options; optimality off the grid is checked separately.
fn opts(n: usize) -> SolveOptions {
    SolveOptions {
        grid_points: n,
        enforce_kkt: false,
        ..SolveOptions::default()
    }
}

/// Best information over the simplex of a 3-point grid at step `1/steps`.
fn three_point_search(spec: &ChannelSpec, c: &ConstraintSet, steps: usize) -> f64 {
    let xs = InputGrid::new(c.a, 3).unwrap().points();
    let table = ChannelTable::build(spec, &xs, c.a, &MeasureOptions::default()).unwrap();
    let mut best = f64::NEG_INFINITY;
    for i in 0..=steps {
        for j in 0..=steps - i {
            let p = [i as f64, j as f64, (steps - i - j) as f64].map(|v| v / steps as f64);
            let mean: f64 = p.iter().zip(&xs).map(|(p, x)| p * x).sum();
            let eh: f64 = p.iter().zip(&xs).map(|(p, x)| p * spec.harvested_energy(*x)).sum();
            if mean <= c.epsilon && eh >= c.e_th {
                best = best.max(table.mutual_information(&p).unwrap());
            }
        }
    }
    best
}

#[test]
fn three_point_grid_matches_exhaustive_search() {
    let spec = moderate();
    for (a, eps, frac) in [(1.0, 0.3, 0.0), (1.0, 0.5, 0.9), (0.5, 0.5, 0.0), (2.0, 0.6, 0.5)] {
        let e_th = frac * max_harvested_energy(a, eps, &spec);
        let c = ConstraintSet::new(a, eps, e_th).unwrap();
        let r = solve_capacity(&c, &InputGrid::new(a, 3).unwrap(), &spec, &opts(3)).unwrap();
        let best = three_point_search(&spec, &c, 1000);
        // Every lattice point is feasible, so only the inner stop tolerance
        // separates the solver from above; the lattice step bounds it below.
        assert!(r.capacity_bits >= best - 1e-8, "A={a}: {} < {best}", r.capacity_bits);
        assert!(r.capacity_bits - best < 2e-3, "A={a}: {} vs {best}", r.capacity_bits);
    }
}

#[test]
fn two_separated_levels_give_one_bit() {
    let spec = ChannelSpec::reference().with_noise_variance(1e-14).unwrap();
    let c = ConstraintSet::new(1.0, 1.0, 0.0).unwrap();
    let r = solve_capacity(&c, &InputGrid::new(1.0, 2).unwrap(), &spec, &opts(2)).unwrap();
    assert!((r.capacity_bits - 1.0).abs() < 1e-6, "{}", r.capacity_bits);
    assert!((r.dist.pmf()[0] - 0.5).abs() < 1e-4);
}

#[test]
fn point_mass_violates_optimality() {
    let spec = low();
    let c = ConstraintSet::new(1.0, 1.0, 0.0).unwrap();
    let grid = InputGrid::new(1.0, 21).unwrap();
    let mut r = solve_capacity(&c, &grid, &spec, &SolveOptions::default()).unwrap();
    let ok = kkt_verify(&r, &c, &spec, 4, &opts(21)).unwrap();
    assert!(ok.max_residual <= 1e-3, "{}", ok.max_residual);

    r.dist = InputDistribution::point_mass(grid, 10).unwrap();
    r.multipliers = MultiplierSet::default();
    let bad = kkt_verify(&r, &c, &spec, 4, &opts(21)).unwrap();
    assert!(bad.max_residual > 0.1, "{}", bad.max_residual);
}

#[test]
fn solutions_respect_every_constraint() {
    let spec = low();
    let a = 2.0;
    let top = max_harvested_energy(a, 0.8, &spec);
    for frac in [0.0, 0.5, 0.95] {
        let c = ConstraintSet::new(a, 0.8, frac * top).unwrap();
        let r = solve_capacity(&c, &InputGrid::new(a, 21).unwrap(), &spec, &SolveOptions::default()).unwrap();
        assert!(avg_power(&r.dist) <= c.epsilon + 1e-9);
        assert!(avg_eh(&r.dist, &spec) >= c.e_th * (1.0 - 1e-9));
        assert!(r.dist.points().iter().all(|x| *x <= a));
        assert!(r.multipliers.lambda1 >= 0.0 && r.multipliers.lambda2 >= 0.0);
        assert!(r.kkt_residual <= 1e-3);
    }
}

#[test]
fn zero_is_used_when_energy_is_slack() {
    let spec = moderate();
    let c = ConstraintSet::new(2.0, 0.6, 0.0).unwrap();
    let r = solve_capacity(&c, &InputGrid::new(2.0, 21).unwrap(), &spec, &opts(21)).unwrap();
    assert_eq!(r.multipliers.lambda2, 0.0);
    assert!(r.support[0].location < 0.1 + 1e-12, "{:?}", r.support);
    assert!(r.dist.pmf()[0] > 1e-3);
}

#[test]
fn infeasible_requirement_is_reported() {
    let spec = moderate();
    let c = ConstraintSet::new(1.0, 0.1, 1e-3).unwrap();
    match solve_capacity(&c, &InputGrid::new(1.0, 11).unwrap(), &spec, &opts(11)) {
        Err(Error::Infeasible { .. }) => {}
        other => panic!("expected an infeasibility error, got {other:?}"),
    }
}

#[test]
fn extremal_requirement_gives_the_extremal_law() {
    let spec = moderate();
    let (a, eps) = (1.0, 0.4);
    let c = ConstraintSet::new(a, eps, max_harvested_energy(a, eps, &spec)).unwrap();
    let r = solve_capacity(&c, &InputGrid::new(a, 11).unwrap(), &spec, &opts(11)).unwrap();
    // Only {0, A} with mass ε/A at A reaches the largest harvested energy.
    let mi = mixture_information(&[0.0, a], &[1.0 - eps / a, eps / a], a, &spec, &MeasureOptions::default()).unwrap();
    assert!((r.capacity_bits - mi).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn capacity_is_non_increasing_in_the_energy_requirement(eps in 0.2f64..1.0, f1 in 0.0f64..0.98, f2 in 0.0f64..0.98) {
        let spec = moderate();
        let a = 1.0;
        let top = max_harvested_energy(a, eps, &spec);
        let (lo, hi) = (f1.min(f2) * top, f1.max(f2) * top);
        let base = ConstraintSet::new(a, eps, 0.0).unwrap();
        let pts = solver::sweep_region(&base, &[lo, hi], &InputGrid::new(a, 11).unwrap(), &spec, &opts(11)).unwrap();
        let (c_lo, c_hi) = (pts[0].capacity_bits.unwrap(), pts[1].capacity_bits.unwrap());
        prop_assert!(c_hi <= c_lo + 1e-7, "{c_hi} > {c_lo}");
    }
}
