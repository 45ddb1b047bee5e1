//! Physical link models: geometric path loss, lognormal turbulence fading,
//! the photovoltaic harvesting law and the transition density `p(y|x)` of the
//! information link.
//!
//! The information link is `y = a·R_P·h1l·h_t·x + n` with `h_t = e^{2X}`,
//! `X ~ N(mu_Xl, sigma2_Xl)` and `n ~ N(0, sigma2_g)`. Writing `k = ln h_t`,
//! the transition density is the Gaussian-weighted average
//! `p(y|x) = E_k[ N(y; g·x·e^k, sigma2_g) ]` with `k ~ N(2 mu_Xl, 4 sigma2_Xl)`.
//! Two independent evaluations are provided: direct quadrature in `k`
//! ([`conditional_pdf_quadrature`]) and the Hermite-polynomial expansion
//! ([`conditional_pdf_hermite`]), which is asymptotic and only usable while
//! its terms stay small.

use std::f64::consts::PI;

use gauss_quad::GaussHermite;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, AdaptiveLegendre};

/// Transmitter/receiver geometry of one optical link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    /// Transmitter optical efficiency.
    pub eta_t: f64,
    /// Receiver optical efficiency.
    pub eta_r: f64,
    /// Extinction coefficient (1/m).
    pub c_lambda: f64,
    /// Perpendicular transmitter–receiver distance (m).
    pub l: f64,
    /// Beam divergence half-angle (rad).
    pub theta_0: f64,
    /// Receiver incidence angle (rad).
    pub theta_rx: f64,
    /// Receiver aperture area (m²).
    pub area_rx: f64,
}

impl ChannelGeometry {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("geometry: {what}")));
        if !(self.eta_t > 0.0 && self.eta_t <= 1.0) {
            return bad("eta_t must lie in (0, 1]");
        }
        if !(self.eta_r > 0.0 && self.eta_r <= 1.0) {
            return bad("eta_r must lie in (0, 1]");
        }
        if !(self.c_lambda >= 0.0 && self.c_lambda.is_finite()) {
            return bad("c_lambda must be non-negative");
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return bad("l must be positive");
        }
        if self.theta_0 == 0.0 {
            return Err(Error::DegenerateGeometry("beam divergence theta_0 is zero".into()));
        }
        if !(self.theta_0 > 0.0 && self.theta_0 < PI / 2.0) {
            return bad("theta_0 must lie in (0, pi/2)");
        }
        if !(self.theta_rx >= 0.0 && self.theta_rx < PI / 2.0) {
            return bad("theta_rx must lie in [0, pi/2)");
        }
        if !(self.area_rx > 0.0 && self.area_rx.is_finite()) {
            return bad("area_rx must be positive");
        }
        Ok(())
    }
}

/// Geometric path loss of a link (unitless gain in (0, 1]).
pub fn path_loss(geometry: &ChannelGeometry) -> Result<f64> {
    geometry.validate()?;
    let g = geometry;
    let cos_rx = g.theta_rx.cos();
    let attenuation = (-g.c_lambda * g.l / cos_rx).exp();
    let spread = 2.0 * PI * g.l * g.l * (1.0 - g.theta_0.cos());
    let gain = g.eta_t * g.eta_r * attenuation * g.area_rx * cos_rx / spread;
    if !(gain > 0.0 && gain <= 1.0 && gain.is_finite()) {
        return Err(Error::DegenerateGeometry(format!(
            "path loss {gain:e} is outside (0, 1]"
        )));
    }
    Ok(gain)
}

/// Lognormal fading of the information link: `h_t = e^{2X}`, `X ~ N(mu_Xl, sigma2_Xl)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    #[serde(rename = "sigma2_Xl")]
    pub sigma2: f64,
    #[serde(rename = "mu_Xl")]
    pub mu: f64,
    /// When set, `mu_Xl = -sigma2_Xl` so that `E[h_t] = 1`.
    #[serde(default)]
    pub normalized: bool,
}

impl FadingParams {
    /// Unit-mean fading with log-amplitude variance `sigma2`.
    pub fn normalized(sigma2: f64) -> Self {
        Self {
            sigma2,
            mu: -sigma2,
            normalized: true,
        }
    }

    pub fn new(sigma2: f64, mu: f64) -> Self {
        Self {
            sigma2,
            mu,
            normalized: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config("fading: sigma2_Xl must be positive".into()));
        }
        if !self.mu.is_finite() {
            return Err(Error::Config("fading: mu_Xl must be finite".into()));
        }
        if self.normalized && self.mu != -self.sigma2 {
            return Err(Error::Config(
                "fading: normalized fading requires mu_Xl = -sigma2_Xl".into(),
            ));
        }
        Ok(())
    }

    /// Mean of `k = ln h_t`.
    pub fn log_gain_mean(&self) -> f64 {
        2.0 * self.mu
    }

    /// Standard deviation of `k = ln h_t`.
    pub fn log_gain_std(&self) -> f64 {
        2.0 * self.sigma2.sqrt()
    }

    /// `E[h_t] = exp(2 mu + 2 sigma2)`.
    pub fn mean_gain(&self) -> f64 {
        (2.0 * self.mu + 2.0 * self.sigma2).exp()
    }

    /// Location of the maximum of the fading density.
    pub fn mode(&self) -> f64 {
        (2.0 * self.mu - 4.0 * self.sigma2).exp()
    }

    /// Fading gain below which a fraction `p` of realizations fall.
    pub fn gain_quantile(&self, p: f64) -> f64 {
        (self.log_gain_mean() + self.log_gain_std() * quad::normal_quantile(p)).exp()
    }
}

/// Density of the fading gain `h_t`.
pub fn fading_pdf(h: f64, fading: &FadingParams) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("fading gain must be positive, got {h}")));
    }
    let s2 = fading.sigma2;
    let d = h.ln() - 2.0 * fading.mu;
    Ok((-d * d / (8.0 * s2)).exp() / (2.0 * h * (2.0 * PI * s2).sqrt()))
}

/// Draws `count` fading gains from a ChaCha stream seeded with `seed`.
pub fn fading_sample(fading: &FadingParams, count: usize, seed: u64) -> Result<Vec<f64>> {
    fading.validate()?;
    if count == 0 {
        return Err(Error::Config("fading_sample: count must be at least 1".into()));
    }
    let log_amplitude = Normal::new(fading.mu, fading.sigma2.sqrt())
        .map_err(|e| Error::Config(format!("fading: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| (2.0 * log_amplitude.sample(&mut rng)).exp())
        .collect())
}

/// Transmitter, detector and harvester constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Electrical-to-optical conversion efficiency (W/A).
    pub a: f64,
    /// Photodiode responsivity (A/W).
    #[serde(rename = "R_P")]
    pub r_p: f64,
    /// Photovoltaic responsivity (A/W).
    #[serde(rename = "R_E")]
    pub r_e: f64,
    /// Receiver noise variance (A²).
    pub sigma2_g: f64,
    /// PV fill factor.
    #[serde(rename = "f_E")]
    pub f_e: f64,
    /// Thermal voltage (V).
    pub v_t: f64,
    /// Harvesting duration (s).
    #[serde(rename = "T")]
    pub t: f64,
    /// Dark saturation current (A).
    #[serde(rename = "I_0")]
    pub i_0: f64,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a", self.a),
            ("R_P", self.r_p),
            ("R_E", self.r_e),
            ("sigma2_g", self.sigma2_g),
            ("f_E", self.f_e),
            ("v_t", self.v_t),
            ("T", self.t),
            ("I_0", self.i_0),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("devices: {name} must be positive")));
            }
        }
        if self.f_e > 1.0 {
            return Err(Error::Config("devices: f_E must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Which transition law the information link follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    Lognormal,
    Gaussian,
}

/// Full parameterization of the link plus the constants derived from it.
///
/// The derived fields are recomputed from the primitive ones on construction
/// and on deserialization; values present in a JSON document are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelSpecDoc", into = "ChannelSpecDoc")]
pub struct ChannelSpec {
    geometry_pd: ChannelGeometry,
    geometry_pv: ChannelGeometry,
    fading: FadingParams,
    devices: DeviceParams,
    model: ChannelModel,
    h1l: f64,
    h2l: f64,
    b: f64,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct ChannelSpecDoc {
    geometry_pd: ChannelGeometry,
    geometry_pv: ChannelGeometry,
    fading: FadingParams,
    devices: DeviceParams,
    model: ChannelModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h1l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h2l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
}

impl TryFrom<ChannelSpecDoc> for ChannelSpec {
    type Error = Error;

    fn try_from(doc: ChannelSpecDoc) -> Result<Self> {
        ChannelSpec::new(doc.geometry_pd, doc.geometry_pv, doc.fading, doc.devices, doc.model)
    }
}

impl From<ChannelSpec> for ChannelSpecDoc {
    fn from(s: ChannelSpec) -> Self {
        ChannelSpecDoc {
            geometry_pd: s.geometry_pd,
            geometry_pv: s.geometry_pv,
            fading: s.fading,
            devices: s.devices,
            model: s.model,
            h1l: Some(s.h1l),
            h2l: Some(s.h2l),
            b: Some(s.b),
            c: Some(s.c),
        }
    }
}

impl ChannelSpec {
    pub fn new(
        geometry_pd: ChannelGeometry,
        geometry_pv: ChannelGeometry,
        fading: FadingParams,
        devices: DeviceParams,
        model: ChannelModel,
    ) -> Result<Self> {
        fading.validate()?;
        devices.validate()?;
        let h1l = path_loss(&geometry_pd)?;
        let h2l = path_loss(&geometry_pv)?;
        let b = devices.f_e * devices.v_t * devices.t * devices.a * devices.r_e * h2l;
        let c = devices.a * devices.r_e * h2l / devices.i_0;
        Ok(Self {
            geometry_pd,
            geometry_pv,
            fading,
            devices,
            model,
            h1l,
            h2l,
            b,
            c,
        })
    }

    /// The reference underwater/indoor link used throughout the examples:
    /// 10 m range, 10° divergence, 1 cm² photodiode, 100 cm² PV cell at 5°,
    /// `sigma2_g = 1e-12 A²` and unit-mean fading with `sigma2_Xl = 0.1`.
    pub fn reference() -> Self {
        let deg = PI / 180.0;
        let pd = ChannelGeometry {
            eta_t: 1.0,
            eta_r: 1.0,
            c_lambda: 0.03,
            l: 10.0,
            theta_0: 10.0 * deg,
            theta_rx: 0.0,
            area_rx: 0.001,
        };
        let pv = ChannelGeometry {
            theta_rx: 5.0 * deg,
            area_rx: 0.01,
            ..pd
        };
        let devices = DeviceParams {
            a: 20.0,
            r_p: 0.5,
            r_e: 0.75,
            sigma2_g: 1e-12,
            f_e: 0.5,
            v_t: 0.025,
            t: 1.0,
            i_0: 1e-9,
        };
        Self::new(pd, pv, FadingParams::normalized(0.1), devices, ChannelModel::Lognormal)
            .expect("reference parameters are valid")
    }

    fn rebuild(&self) -> Result<Self> {
        Self::new(self.geometry_pd, self.geometry_pv, self.fading, self.devices, self.model)
    }

    pub fn with_model(&self, model: ChannelModel) -> Self {
        Self { model, ..self.clone() }
    }

    pub fn with_fading(&self, fading: FadingParams) -> Result<Self> {
        Self { fading, ..self.clone() }.rebuild()
    }

    pub fn with_devices(&self, devices: DeviceParams) -> Result<Self> {
        Self { devices, ..self.clone() }.rebuild()
    }

    pub fn with_noise_variance(&self, sigma2_g: f64) -> Result<Self> {
        self.with_devices(DeviceParams {
            sigma2_g,
            ..self.devices
        })
    }

    pub fn geometry_pd(&self) -> &ChannelGeometry {
        &self.geometry_pd
    }

    pub fn geometry_pv(&self) -> &ChannelGeometry {
        &self.geometry_pv
    }

    pub fn fading(&self) -> &FadingParams {
        &self.fading
    }

    pub fn devices(&self) -> &DeviceParams {
        &self.devices
    }

    pub fn model(&self) -> ChannelModel {
        self.model
    }

    /// Information-link path loss.
    pub fn h1l(&self) -> f64 {
        self.h1l
    }

    /// Harvesting-link path loss.
    pub fn h2l(&self) -> f64 {
        self.h2l
    }

    /// Linear harvesting constant `f_E·v_t·T·a·R_E·h2l` (J).
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Logarithmic harvesting constant `a·R_E·h2l/I_0`.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Deterministic gain `a·R_P·h1l` from drive level to photocurrent.
    pub fn signal_gain(&self) -> f64 {
        self.devices.a * self.devices.r_p * self.h1l
    }

    pub fn noise_std(&self) -> f64 {
        self.devices.sigma2_g.sqrt()
    }

    /// Harvested energy `b·x·ln(1 + c·x)` for a non-negative drive `x`.
    #[inline]
    pub fn harvested_energy(&self, x: f64) -> f64 {
        self.b * x * (self.c * x).ln_1p()
    }

    /// Transition density of the configured model.
    pub fn conditional_pdf(&self, y: f64, x: f64, quadrature: &FadingQuadrature) -> Result<f64> {
        Ok(TransitionKernel::new(self, quadrature)?.pdf(y, x))
    }
}

/// Per-symbol harvested energy (J).
pub fn eh_energy(x: f64, spec: &ChannelSpec) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("drive level must be non-negative, got {x}")));
    }
    Ok(spec.harvested_energy(x))
}

/// Transition density of the fading-free link, `N(y; a·R_P·h1l·x, sigma2_g)`.
pub fn gaussian_conditional_pdf(y: f64, x: f64, spec: &ChannelSpec) -> f64 {
    quad::normal_pdf(y, spec.signal_gain() * x, spec.noise_std())
}

/// Smallest Gauss–Hermite order accepted by [`FadingQuadrature::GaussHermite`].
pub const MIN_HERMITE_NODES: usize = 8;
/// Smallest panel order accepted by [`FadingQuadrature::Windowed`].
pub const MIN_PANEL_ORDER: usize = 4;

/// How the expectation over the log-fading variable `k` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadingQuadrature {
    /// Gauss–Hermite rule in `k`, doubled from `nodes` until two successive
    /// estimates agree to `rel_tol` or `max_nodes` is exceeded. Accurate when
    /// the receiver noise is wide compared with the spread of `g·x·e^k`.
    GaussHermite {
        nodes: usize,
        max_nodes: usize,
        rel_tol: f64,
    },
    /// Adaptive Gauss–Legendre over the window of `k` where both the fading
    /// weight and the noise kernel are non-negligible, split at the noise
    /// peak. Accurate in every noise regime.
    Windowed { order: usize, rel_tol: f64 },
}

impl Default for FadingQuadrature {
    fn default() -> Self {
        FadingQuadrature::Windowed {
            order: 12,
            rel_tol: 1e-10,
        }
    }
}

impl FadingQuadrature {
    pub fn gauss_hermite(nodes: usize) -> Self {
        FadingQuadrature::GaussHermite {
            nodes,
            max_nodes: 1024,
            rel_tol: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            FadingQuadrature::GaussHermite { nodes, max_nodes, rel_tol } => {
                if nodes < MIN_HERMITE_NODES {
                    return Err(Error::Config(format!(
                        "Gauss-Hermite node count {nodes} is below the minimum {MIN_HERMITE_NODES}"
                    )));
                }
                if max_nodes < nodes || !(rel_tol > 0.0) {
                    return Err(Error::Config("Gauss-Hermite doubling limits are inconsistent".into()));
                }
            }
            FadingQuadrature::Windowed { order, rel_tol } => {
                if order < MIN_PANEL_ORDER {
                    return Err(Error::Config(format!(
                        "panel order {order} is below the minimum {MIN_PANEL_ORDER}"
                    )));
                }
                if !(rel_tol > 0.0) {
                    return Err(Error::Config("panel tolerance must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

enum KernelRoute {
    Gaussian,
    Windowed(AdaptiveLegendre),
    Hermite {
        nodes: usize,
        max_nodes: usize,
        rel_tol: f64,
    },
}

/// Reusable evaluator of `p(y|x)` for one channel; holds the quadrature rule
/// so repeated evaluations avoid re-deriving nodes.
pub struct TransitionKernel {
    gain: f64,
    sigma: f64,
    log_mean: f64,
    log_std: f64,
    route: KernelRoute,
}

const WEIGHT_SPAN: f64 = 9.0;
const NOISE_SPAN: f64 = 12.0;

impl TransitionKernel {
    pub fn new(spec: &ChannelSpec, quadrature: &FadingQuadrature) -> Result<Self> {
        let route = match spec.model() {
            ChannelModel::Gaussian => KernelRoute::Gaussian,
            ChannelModel::Lognormal => Self::fading_route(quadrature)?,
        };
        Ok(Self::with_route(spec, route))
    }

    /// Kernel that always integrates over the fading, whatever the model tag.
    pub fn lognormal(spec: &ChannelSpec, quadrature: &FadingQuadrature) -> Result<Self> {
        Ok(Self::with_route(spec, Self::fading_route(quadrature)?))
    }

    fn fading_route(quadrature: &FadingQuadrature) -> Result<KernelRoute> {
        quadrature.validate()?;
        Ok(match *quadrature {
            FadingQuadrature::Windowed { order, rel_tol } => {
                KernelRoute::Windowed(AdaptiveLegendre::new(order, rel_tol))
            }
            FadingQuadrature::GaussHermite { nodes, max_nodes, rel_tol } => KernelRoute::Hermite {
                nodes,
                max_nodes,
                rel_tol,
            },
        })
    }

    fn with_route(spec: &ChannelSpec, route: KernelRoute) -> Self {
        Self {
            gain: spec.signal_gain(),
            sigma: spec.noise_std(),
            log_mean: spec.fading().log_gain_mean(),
            log_std: spec.fading().log_gain_std(),
            route,
        }
    }

    /// `p(y|x)`. Falls back to the best available estimate if the
    /// Gauss–Hermite doubling limit is hit; use [`Self::try_pdf`] to observe that.
    pub fn pdf(&self, y: f64, x: f64) -> f64 {
        match self.try_pdf(y, x) {
            Ok(v) => v,
            Err(Estimate(v)) => v,
        }
    }

    pub(crate) fn try_pdf(&self, y: f64, x: f64) -> std::result::Result<f64, Estimate> {
        let s = self.gain * x;
        if s == 0.0 {
            return Ok(quad::normal_pdf(y, 0.0, self.sigma));
        }
        match &self.route {
            KernelRoute::Gaussian => Ok(quad::normal_pdf(y, s, self.sigma)),
            KernelRoute::Windowed(integrator) => Ok(self.windowed(integrator, y, s)),
            KernelRoute::Hermite {
                nodes,
                max_nodes,
                rel_tol,
            } => self.hermite(y, s, *nodes, *max_nodes, *rel_tol),
        }
    }

    fn windowed(&self, integrator: &AdaptiveLegendre, y: f64, s: f64) -> f64 {
        let (m, tau, sigma) = (self.log_mean, self.log_std, self.sigma);
        let mut lo = m - WEIGHT_SPAN * tau;
        let mut hi = m + WEIGHT_SPAN * tau;
        // Outside this window the noise kernel is below e^{-72} of its peak.
        if y + NOISE_SPAN * sigma > 0.0 {
            hi = hi.min(((y + NOISE_SPAN * sigma) / s).ln());
        }
        if y - NOISE_SPAN * sigma > 0.0 {
            lo = lo.max(((y - NOISE_SPAN * sigma) / s).ln());
        }
        if !(hi > lo) {
            return 0.0;
        }
        let mut breaks = Vec::with_capacity(10);
        breaks.push(lo);
        for j in -3..=3 {
            let t = y + f64::from(j) * sigma;
            if t > 0.0 {
                let k = (t / s).ln();
                if k > lo && k < hi {
                    breaks.push(k);
                }
            }
        }
        if m > lo && m < hi {
            breaks.push(m);
        }
        breaks.push(hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let norm = 1.0 / (2.0 * PI * tau * sigma);
        let (inv_2tau2, inv_2sig2) = (0.5 / (tau * tau), 0.5 / (sigma * sigma));
        let f = |k: f64| {
            let dk = k - m;
            let dy = y - s * k.exp();
            norm * (-(dk * dk) * inv_2tau2 - dy * dy * inv_2sig2).exp()
        };
        integrator.integrate_pieces(&f, &breaks)
    }

    fn hermite_estimate(&self, rule: &GaussHermite, y: f64, s: f64) -> f64 {
        let scale = std::f64::consts::SQRT_2 * self.log_std;
        rule.integrate(|t| quad::normal_pdf(y, s * (self.log_mean + scale * t).exp(), self.sigma))
            / PI.sqrt()
    }

    fn hermite(
        &self,
        y: f64,
        s: f64,
        nodes: usize,
        max_nodes: usize,
        rel_tol: f64,
    ) -> std::result::Result<f64, Estimate> {
        let mut n = nodes;
        let mut prev = self.hermite_estimate(&quad::hermite_rule(n), y, s);
        while 2 * n <= max_nodes {
            n *= 2;
            let next = self.hermite_estimate(&quad::hermite_rule(n), y, s);
            if (next - prev).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
                return Ok(next);
            }
            prev = next;
        }
        Err(Estimate(prev))
    }
}

/// Best estimate returned when an iterative quadrature did not reach its tolerance.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Estimate(pub f64);

/// Lognormal transition density `p(y|x)` by quadrature over the log-fading.
///
/// Always integrates over the fading regardless of the model tag on `spec`.
pub fn conditional_pdf_quadrature(
    y: f64,
    x: f64,
    spec: &ChannelSpec,
    quadrature: &FadingQuadrature,
) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("drive level must be non-negative, got {x}")));
    }
    TransitionKernel::lognormal(spec, quadrature)?
        .try_pdf(y, x)
        .map_err(|Estimate(v)| {
            Error::Tolerance(format!(
                "Gauss-Hermite doubling did not converge at y={y:e}, x={x:e} (last {v:e})"
            ))
        })
}

/// Partial sum of the Hermite expansion together with the magnitude of its
/// last included term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteSum {
    pub value: f64,
    pub last_term: f64,
}

/// Terms `T_n(y, x)` of `p(y|x) = Σ_n T_n` in the noise-scaled form
/// `T_n = φ(u)/σ · He_n(u) · (K_n·x/σ)^n / n!`, `u = y/σ`,
/// `K_n = g·e^{2(n σ²_Xl + μ_Xl)}`. With `derivative` set, returns the terms
/// of `∂p/∂x` instead.
fn hermite_terms(y: f64, x: f64, spec: &ChannelSpec, n_terms: usize, derivative: bool) -> Vec<f64> {
    let sigma = spec.noise_std();
    let u = y / sigma;
    let base = quad::normal_pdf(u, 0.0, 1.0) / sigma;
    let (mu, s2) = (spec.fading().mu, spec.fading().sigma2);
    let ln_ratio = (spec.signal_gain() / sigma).ln();

    // Orthonormal recurrence h_n = He_n/sqrt(n!) keeps magnitudes bounded.
    let mut h_prev = 0.0;
    let mut h = 1.0;
    let mut ln_fact = 0.0;
    let mut terms = Vec::with_capacity(n_terms);
    for n in 0..n_terms {
        if n > 0 {
            let nf = n as f64;
            let next = (u * h - (nf - 1.0).sqrt() * h_prev) / nf.sqrt();
            h_prev = h;
            h = next;
            ln_fact += nf.ln();
        }
        let nf = n as f64;
        let moment = 2.0 * nf * mu + 2.0 * nf * nf * s2;
        let term = if !derivative {
            if n == 0 {
                base
            } else if x == 0.0 {
                0.0
            } else {
                base * h * (nf * (ln_ratio + x.ln()) + moment - 0.5 * ln_fact).exp()
            }
        } else if n == 0 {
            0.0
        } else if x == 0.0 {
            if n == 1 {
                base * h * (ln_ratio + moment).exp()
            } else {
                0.0
            }
        } else {
            base * h * (nf * ln_ratio + (nf - 1.0) * x.ln() + nf.ln() + moment - 0.5 * ln_fact).exp()
        };
        terms.push(term);
    }
    terms
}

fn hermite_sum(terms: Vec<f64>) -> HermiteSum {
    HermiteSum {
        value: terms.iter().sum(),
        last_term: terms.last().map_or(0.0, |t| t.abs()),
    }
}

/// `n_terms`-term partial sum of the Hermite expansion of `p(y|x)`.
pub fn conditional_pdf_hermite(y: f64, x: f64, spec: &ChannelSpec, n_terms: usize) -> Result<HermiteSum> {
    if n_terms == 0 {
        return Err(Error::Config("Hermite expansion needs at least one term".into()));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("drive level must be non-negative, got {x}")));
    }
    Ok(hermite_sum(hermite_terms(y, x, spec, n_terms, false)))
}

/// `n_terms`-term partial sum of the term-wise derivative `∂p(y|x)/∂x`.
pub fn conditional_pdf_hermite_dx(y: f64, x: f64, spec: &ChannelSpec, n_terms: usize) -> Result<HermiteSum> {
    if n_terms == 0 {
        return Err(Error::Config("Hermite expansion needs at least one term".into()));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("drive level must be non-negative, got {x}")));
    }
    Ok(hermite_sum(hermite_terms(y, x, spec, n_terms, true)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_divergence_is_degenerate() {
        let mut g = *ChannelSpec::reference().geometry_pd();
        g.theta_0 = 0.0;
        assert!(matches!(path_loss(&g), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn out_of_range_efficiency_is_rejected() {
        let mut g = *ChannelSpec::reference().geometry_pd();
        g.eta_t = 1.5;
        assert!(matches!(path_loss(&g), Err(Error::Config(_))));
    }

    #[test]
    fn lossless_geometry_reduces_to_solid_angle_ratio() {
        let g = ChannelGeometry {
            eta_t: 1.0,
            eta_r: 1.0,
            c_lambda: 0.0,
            l: 3.0,
            theta_0: 0.4,
            theta_rx: 0.0,
            area_rx: 0.02,
        };
        let expected = 0.02 / (2.0 * PI * 9.0 * (1.0 - 0.4f64.cos()));
        assert_eq!(path_loss(&g).unwrap(), expected);
    }

    #[test]
    fn fading_pdf_rejects_non_positive_gain() {
        let f = FadingParams::normalized(0.1);
        assert!(fading_pdf(0.0, &f).is_err());
        assert!(fading_pdf(-1.0, &f).is_err());
    }

    #[test]
    fn normalized_flag_is_checked() {
        let mut f = FadingParams::normalized(0.1);
        f.mu = -0.2;
        assert!(f.validate().is_err());
    }

    #[test]
    fn eh_energy_rejects_negative_drive() {
        let spec = ChannelSpec::reference();
        assert!(matches!(eh_energy(-0.1, &spec), Err(Error::Domain(_))));
        assert_eq!(eh_energy(0.0, &spec).unwrap(), 0.0);
    }

    #[test]
    fn too_few_hermite_nodes_is_a_configuration_error() {
        let spec = ChannelSpec::reference();
        let q = FadingQuadrature::gauss_hermite(4);
        assert!(matches!(
            conditional_pdf_quadrature(0.0, 0.5, &spec, &q),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn hermite_partial_sum_needs_a_term() {
        let spec = ChannelSpec::reference();
        assert!(matches!(
            conditional_pdf_hermite(0.0, 0.1, &spec, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn single_hermite_term_is_the_noise_density() {
        let spec = ChannelSpec::reference();
        let sigma = spec.noise_std();
        let y = 0.7 * sigma;
        let one = conditional_pdf_hermite(y, 0.3, &spec, 1).unwrap();
        assert_relative_eq!(one.value, quad::normal_pdf(y, 0.0, sigma), max_relative = 1e-14);
        let many = conditional_pdf_hermite(y, 0.0, &spec, 30).unwrap();
        assert_relative_eq!(many.value, quad::normal_pdf(y, 0.0, sigma), max_relative = 1e-14);
        assert_eq!(many.last_term, 0.0);
    }

    #[test]
    fn json_round_trip_recomputes_derived_constants() {
        let spec = ChannelSpec::reference();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"model\":\"lognormal\""));
        assert!(text.contains("\"sigma2_Xl\""));
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["h1l"] = serde_json::json!(42.0);
        let back: ChannelSpec = serde_json::from_value(doc).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn invalid_document_is_rejected() {
        let spec = ChannelSpec::reference();
        let mut doc = serde_json::to_value(&spec).unwrap();
        doc["devices"]["sigma2_g"] = serde_json::json!(-1.0);
        assert!(serde_json::from_value::<ChannelSpec>(doc).is_err());
    }
}
