use std::sync::OnceLock;

use approx::assert_relative_eq;
use proptest::prelude::*;
use slipt_core::measure::{
    avg_eh, avg_power, entropy_decomposition, mixture_information, ChannelTable, InputDistribution, InputGrid,
    MeasureOptions,
};
use slipt_core::ChannelSpec;

const A: f64 = 1.0;
const N: usize = 9;

fn table() -> &'static ChannelTable {
    static TABLE: OnceLock<ChannelTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let grid = InputGrid::new(A, N).unwrap();
        ChannelTable::build(&ChannelSpec::reference(), &grid.points(), A, &MeasureOptions::default()).unwrap()
    })
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, N).prop_filter("non-zero", |w| w.iter().sum::<f64>() > 1e-3)
}

fn dist(w: Vec<f64>) -> InputDistribution {
    InputDistribution::normalized(InputGrid::new(A, N).unwrap(), w).unwrap()
}

#[test]
fn averaged_information_density_is_mutual_information() {
    let t = table();
    let d = dist((1..=N).map(|k| k as f64).collect());
    let i = t.info_densities(d.pmf()).unwrap();
    let avg: f64 = i.iter().zip(d.pmf()).map(|(i, p)| i * p).sum();
    assert_relative_eq!(avg, t.mutual_information(d.pmf()).unwrap(), max_relative = 1e-12);
}

#[test]
fn entropy_difference_matches_table_information() {
    let spec = ChannelSpec::reference();
    let xs = [0.0, 0.3, 1.0];
    let ps = [0.5, 0.2, 0.3];
    let opts = MeasureOptions::default();
    let e = entropy_decomposition(&xs, &ps, A, &spec, &opts, 2).unwrap();
    let mi = mixture_information(&xs, &ps, A, &spec, &opts).unwrap();
    assert!((e.mutual_information() - mi).abs() < 1e-4, "{} vs {mi}", e.mutual_information());
    assert!(e.output_entropy > e.conditional_entropy);
}

#[test]
fn separated_binary_input_carries_one_bit() {
    // Noise std 1e-7 against a 7.8e-4 mean separation.
    let spec = ChannelSpec::reference().with_noise_variance(1e-14).unwrap();
    let mi = mixture_information(&[0.0, 1.0], &[0.5, 0.5], A, &spec, &MeasureOptions::default()).unwrap();
    assert!((mi - 1.0).abs() < 1e-6, "{mi}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn information_is_non_negative_and_bounded(w in weights()) {
        let d = dist(w);
        let mi = table().mutual_information(d.pmf()).unwrap();
        let h: f64 = d.pmf().iter().filter(|p| **p > 0.0).map(|p| -p * p.log2()).sum();
        prop_assert!(mi >= -1e-12);
        prop_assert!(mi <= h + 1e-9);
    }

    #[test]
    fn information_is_concave_in_the_input(w1 in weights(), w2 in weights(), theta in 0.0f64..1.0) {
        let t = table();
        let (a, b) = (dist(w1), dist(w2));
        let m = a.mix(&b, theta).unwrap();
        let lhs = t.mutual_information(m.pmf()).unwrap();
        let rhs = theta * t.mutual_information(a.pmf()).unwrap() + (1.0 - theta) * t.mutual_information(b.pmf()).unwrap();
        prop_assert!(lhs >= rhs - 1e-10, "{lhs} < {rhs}");
    }

    #[test]
    fn moments_are_linear_under_mixing(w1 in weights(), w2 in weights(), theta in 0.0f64..1.0) {
        let spec = ChannelSpec::reference();
        let (a, b) = (dist(w1), dist(w2));
        let m = a.mix(&b, theta).unwrap();
        let p = theta * avg_power(&a) + (1.0 - theta) * avg_power(&b);
        let e = theta * avg_eh(&a, &spec) + (1.0 - theta) * avg_eh(&b, &spec);
        prop_assert!((avg_power(&m) - p).abs() <= 1e-12);
        prop_assert!((avg_eh(&m, &spec) - e).abs() <= 1e-15);
    }

    #[test]
    fn some_information_density_reaches_the_average(w in weights()) {
        // The averaged density equals I, so some density is at least I.
        let t = table();
        let d = dist(w);
        let i = t.info_densities(d.pmf()).unwrap();
        let mi = t.mutual_information(d.pmf()).unwrap();
        let top = i.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(top >= mi - 1e-12);
    }
}
