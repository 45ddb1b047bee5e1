//! Small numerical-integration toolbox shared by the channel and measure modules.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::{GaussHermite, GaussLegendre};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Densities below this value are floored before taking logarithms.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[inline]
pub fn normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    INV_SQRT_2PI / std * (-0.5 * z * z).exp()
}

/// Trapezoid weights for an arbitrary increasing node set.
pub fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = 0.5 * (nodes[i + 1] - nodes[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

fn rule_cache<R: Send + Sync + 'static>(
    cache: &'static OnceLock<Mutex<HashMap<usize, Arc<R>>>>,
    n: usize,
    make: impl FnOnce(NonZeroUsize) -> R,
) -> Arc<R> {
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().expect("quadrature rule cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(make(NonZeroUsize::new(n).expect("rule order must be positive"))))
        .clone()
}

/// Gauss–Hermite rule (weight `e^{-t^2}`) with `n` nodes, memoized per order.
pub fn hermite_rule(n: usize) -> Arc<GaussHermite> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
    rule_cache(&CACHE, n, GaussHermite::new)
}

/// Gauss–Legendre rule with `n` nodes, memoized per order.
pub fn legendre_rule(n: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    rule_cache(&CACHE, n, GaussLegendre::new)
}

/// Adaptive bisection driven by a fixed Gauss–Legendre panel rule.
///
/// A panel is accepted when its estimate agrees with the sum of its two
/// halves to within the panel's share of the tolerance.
pub struct AdaptiveLegendre {
    rule: Arc<GaussLegendre>,
    rel_tol: f64,
    max_depth: u32,
}

impl AdaptiveLegendre {
    pub fn new(order: usize, rel_tol: f64) -> Self {
        Self {
            rule: legendre_rule(order),
            rel_tol,
            max_depth: 40,
        }
    }

    /// Integrates `f` over the consecutive pieces delimited by `breaks`
    /// (sorted, at least two entries).
    pub fn integrate_pieces<F: Fn(f64) -> f64>(&self, f: &F, breaks: &[f64]) -> f64 {
        let coarse: Vec<f64> = breaks
            .windows(2)
            .map(|w| self.rule.integrate(w[0], w[1], f))
            .collect();
        let scale: f64 = coarse.iter().map(|v| v.abs()).sum();
        let tol = (self.rel_tol * scale).max(f64::MIN_POSITIVE);
        let n = coarse.len() as f64;
        breaks
            .windows(2)
            .zip(coarse)
            .map(|(w, est)| self.refine(f, w[0], w[1], est, tol / n, 0))
            .sum()
    }

    fn refine<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (a + b);
        let left = self.rule.integrate(a, mid, f);
        let right = self.rule.integrate(mid, b, f);
        let halves = left + right;
        if (halves - whole).abs() <= tol || depth >= self.max_depth || mid <= a || mid >= b {
            return halves;
        }
        self.refine(f, a, mid, left, 0.5 * tol, depth + 1) + self.refine(f, mid, b, right, 0.5 * tol, depth + 1)
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}
