use approx::assert_relative_eq;
use proptest::prelude::*;
use slipt_core::channel::{
    eh_energy, fading_pdf, fading_sample, gaussian_conditional_pdf, path_loss, ChannelModel, ChannelSpec,
    FadingParams, FadingQuadrature, TransitionKernel,
};

// Frozen values from an independent evaluation of the reference link
// (closed-form geometry, 4e5-point trapezoid over the log-amplitude).
const H1L: f64 = 7.760858670135016e-05;
const H2L: f64 = 0.0007722471611202596;
const B: f64 = 0.00014479634271004867;
const C: f64 = 11583707.416803893;
const E_AT_ONE: f64 = 0.0023551284739343893;
const PDF_POINTS: [(f64, f64, f64); 4] = [
    (0.0007760858670135016, 1.0, 773.1362241364401),
    (0.0003880429335067508, 0.5, 1546.2772614357593),
    (0.0006208686936108013, 1.0, 1015.2877768059213),
    (1e-6, 0.01, 24129.191187000164),
];

#[test]
fn reference_path_losses() {
    let spec = ChannelSpec::reference();
    assert_relative_eq!(spec.h1l(), H1L, max_relative = 1e-12);
    assert_relative_eq!(spec.h2l(), H2L, max_relative = 1e-12);
    assert_relative_eq!(path_loss(spec.geometry_pd()).unwrap(), H1L, max_relative = 1e-12);
}

#[test]
fn reference_harvesting_constants() {
    let spec = ChannelSpec::reference();
    assert_relative_eq!(spec.b(), B, max_relative = 1e-12);
    assert_relative_eq!(spec.c(), C, max_relative = 1e-12);
    assert_relative_eq!(eh_energy(1.0, &spec).unwrap(), E_AT_ONE, max_relative = 1e-12);
    assert_eq!(eh_energy(0.0, &spec).unwrap(), 0.0);
}

#[test]
fn lognormal_pdf_matches_trapezoid_oracle() {
    let spec = ChannelSpec::reference();
    let kernel = TransitionKernel::lognormal(&spec, &FadingQuadrature::default()).unwrap();
    for (y, x, want) in PDF_POINTS {
        assert_relative_eq!(kernel.pdf(y, x), want, max_relative = 1e-6);
    }
}

#[test]
fn zero_drive_is_pure_noise() {
    let spec = ChannelSpec::reference();
    let kernel = TransitionKernel::lognormal(&spec, &FadingQuadrature::default()).unwrap();
    for y in [-2e-6, 0.0, 1e-6, 3e-6] {
        assert_relative_eq!(kernel.pdf(y, 0.0), gaussian_conditional_pdf(y, 0.0, &spec), max_relative = 1e-12);
    }
}

#[test]
fn gauss_hermite_agrees_with_default_quadrature_at_low_snr() {
    let spec = ChannelSpec::reference().with_noise_variance(1e-8).unwrap();
    let a = TransitionKernel::lognormal(&spec, &FadingQuadrature::default()).unwrap();
    let b = TransitionKernel::lognormal(&spec, &FadingQuadrature::gauss_hermite(64)).unwrap();
    let g = spec.signal_gain();
    for k in 0..=20 {
        let y = g * (-0.2 + 1.6 * k as f64 / 20.0);
        assert_relative_eq!(a.pdf(y, 1.0), b.pdf(y, 1.0), max_relative = 1e-8);
    }
}

#[test]
fn monte_carlo_fading_has_unit_mean() {
    let f = FadingParams::normalized(0.1);
    let s = fading_sample(&f, 200_000, 7).unwrap();
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    // Standard error of the mean is about 0.0015 here.
    assert!((mean - 1.0).abs() < 0.01, "{mean}");
    assert_eq!(s, fading_sample(&f, 200_000, 7).unwrap());
    assert_relative_eq!(f.mean_gain(), 1.0, max_relative = 1e-14);
}

#[test]
fn fading_density_integrates_to_one() {
    let f = FadingParams::normalized(0.1);
    // Midpoint rule in log h.
    let n = 20_000;
    let (lo, hi) = (-6.0f64, 4.0f64);
    let dt = (hi - lo) / n as f64;
    let total: f64 = (0..n)
        .map(|i| {
            let h = (lo + (i as f64 + 0.5) * dt).exp();
            fading_pdf(h, &f).unwrap() * h * dt
        })
        .sum();
    assert_relative_eq!(total, 1.0, max_relative = 1e-9);
}

#[test]
fn gaussian_model_uses_noise_only_density() {
    let spec = ChannelSpec::reference().with_model(ChannelModel::Gaussian);
    let k = TransitionKernel::new(&spec, &FadingQuadrature::default()).unwrap();
    let y = spec.signal_gain() * 0.7 + 4e-7;
    assert_relative_eq!(k.pdf(y, 0.7), gaussian_conditional_pdf(y, 0.7, &spec), max_relative = 1e-14);
}

fn integrate_over_y(kernel: &TransitionKernel, x: f64, spec: &ChannelSpec) -> f64 {
    // Trapezoid on a y-grid wide enough to hold both noise and fading tails.
    let g = spec.signal_gain();
    let s = spec.noise_std();
    let (lo, hi) = (-10.0 * s, g * x * 40.0 + 10.0 * s);
    let n = 100_000;
    let dy = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * kernel.pdf(lo + i as f64 * dy, x)
        })
        .sum::<f64>()
        * dy
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pdf_is_a_normalized_density(x in 0.0f64..2.0) {
        let spec = ChannelSpec::reference();
        let kernel = TransitionKernel::lognormal(&spec, &FadingQuadrature::default()).unwrap();
        let total = integrate_over_y(&kernel, x, &spec);
        prop_assert!((total - 1.0).abs() < 1e-5, "x = {x}: {total}");
    }

    #[test]
    fn pdf_is_non_negative(x in 0.0f64..5.0, t in -1.0f64..3.0) {
        let spec = ChannelSpec::reference();
        let kernel = TransitionKernel::lognormal(&spec, &FadingQuadrature::default()).unwrap();
        let y = spec.signal_gain() * x * t + spec.noise_std() * t;
        let v = kernel.pdf(y, x);
        prop_assert!(v >= 0.0 && v.is_finite());
    }

    #[test]
    fn harvested_energy_is_increasing_and_convex(x in 0.0f64..10.0, d in 1e-4f64..1.0) {
        let spec = ChannelSpec::reference();
        let e = |v: f64| spec.harvested_energy(v);
        prop_assert!(e(x + d) > e(x));
        prop_assert!(e(x + d) - e(x) >= e(x) - e((x - d).max(0.0)) - 1e-18);
    }
}
