//! Information functionals over discrete input laws.
//!
//! Densities are integrated on an output grid `y(t) = (κσ/δ)·sinh(δ·t)` with
//! `t` on a unit lattice: the step is `κσ` near the origin and grows to a
//! fraction `δ` of `|y|` in the fading-dominated tail. Trapezoid weights in
//! `t` are `dy/dt`, which keeps the rule spectrally accurate for smooth,
//! decaying integrands. Conditional densities are evaluated once per input
//! point into a [`ChannelTable`]; every functional of the input law is then a
//! mixture over the table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, ChannelSpec, FadingQuadrature, TransitionKernel};
use crate::error::{Error, Result};
use crate::quad::{self, DENSITY_FLOOR};

/// Equally spaced amplitude alphabet `{0, l, …, (N−1)l}`, `l = A/(N−1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputGrid {
    a: f64,
    n: usize,
}

impl InputGrid {
    pub fn new(a: f64, n: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Config(format!("peak amplitude must be positive, got {a}")));
        }
        if n < 2 {
            return Err(Error::Config(format!("grid needs at least 2 points, got {n}")));
        }
        Ok(Self { a, n })
    }

    pub fn peak(&self) -> f64 {
        self.a
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.a / (self.n - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.a
        } else {
            k as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.point(k)).collect()
    }

    /// Grid with `factor`× as many intervals over the same range; every
    /// original point `k` reappears at index `k·factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Config("refinement factor must be at least 1".into()));
        }
        Self::new(self.a, (self.n - 1) * factor + 1)
    }
}

/// Probability masses on an [`InputGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionDoc", into = "DistributionDoc")]
pub struct InputDistribution {
    grid: InputGrid,
    pmf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistributionDoc {
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "N")]
    n: usize,
    pmf: Vec<f64>,
}

impl TryFrom<DistributionDoc> for InputDistribution {
    type Error = Error;

    fn try_from(doc: DistributionDoc) -> Result<Self> {
        InputDistribution::new(InputGrid::new(doc.a, doc.n)?, doc.pmf)
    }
}

impl From<InputDistribution> for DistributionDoc {
    fn from(d: InputDistribution) -> Self {
        DistributionDoc {
            a: d.grid.a,
            n: d.grid.n,
            pmf: d.pmf,
        }
    }
}

/// Tolerance on `Σ p = 1` accepted by [`InputDistribution::new`].
pub const PMF_SUM_TOL: f64 = 1e-12;

impl InputDistribution {
    pub fn new(grid: InputGrid, pmf: Vec<f64>) -> Result<Self> {
        if pmf.len() != grid.len() {
            return Err(Error::Shape(format!(
                "pmf has {} entries for a {}-point grid",
                pmf.len(),
                grid.len()
            )));
        }
        if let Some((k, p)) = pmf.iter().enumerate().find(|(_, p)| !(**p >= 0.0 && **p <= 1.0)) {
            return Err(Error::Domain(format!("pmf[{k}] = {p} is not a probability")));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(Error::Domain(format!("pmf sums to {total}, not 1")));
        }
        Ok(Self { grid, pmf })
    }

    /// Rescales non-negative weights to a pmf.
    pub fn normalized(grid: InputGrid, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Domain("weights must be non-negative with a positive sum".into()));
        }
        let pmf = weights.iter().map(|w| w / total).collect();
        Self::new(grid, pmf)
    }

    pub fn uniform(grid: InputGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            pmf: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(grid: InputGrid, k: usize) -> Result<Self> {
        if k >= grid.len() {
            return Err(Error::Shape(format!("index {k} outside a {}-point grid", grid.len())));
        }
        let mut pmf = vec![0.0; grid.len()];
        pmf[k] = 1.0;
        Ok(Self { grid, pmf })
    }

    pub fn grid(&self) -> &InputGrid {
        &self.grid
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn points(&self) -> Vec<f64> {
        self.grid.points()
    }

    /// `θ·self + (1−θ)·other` on a shared grid.
    pub fn mix(&self, other: &Self, theta: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Shape("distributions live on different grids".into()));
        }
        let pmf = self
            .pmf
            .iter()
            .zip(&other.pmf)
            .map(|(a, b)| theta * a + (1.0 - theta) * b)
            .collect();
        InputDistribution::normalized(self.grid, pmf)
    }

    /// Support as `(location, mass)` pairs, dropping zero cells.
    pub fn atoms(&self) -> (Vec<f64>, Vec<f64>) {
        self.pmf
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(k, p)| (self.grid.point(k), *p))
            .unzip()
    }
}

/// Peak, average-power and harvested-energy requirements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    #[serde(rename = "A")]
    pub a: f64,
    pub epsilon: f64,
    /// Minimum average harvested energy (J).
    #[serde(rename = "E_th")]
    pub e_th: f64,
}

impl ConstraintSet {
    pub fn new(a: f64, epsilon: f64, e_th: f64) -> Result<Self> {
        let c = Self { a, epsilon, e_th };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::Config(format!("A must be positive, got {}", self.a)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.e_th >= 0.0 && self.e_th.is_finite()) {
            return Err(Error::Config(format!("E_th must be non-negative, got {}", self.e_th)));
        }
        Ok(())
    }
}

pub fn avg_power(dist: &InputDistribution) -> f64 {
    dist.pmf.iter().enumerate().map(|(k, p)| p * dist.grid.point(k)).sum()
}

/// Average harvested energy (J).
pub fn avg_eh(dist: &InputDistribution, spec: &ChannelSpec) -> f64 {
    dist.pmf
        .iter()
        .enumerate()
        .map(|(k, p)| p * spec.harvested_energy(dist.grid.point(k)))
        .sum()
}

/// Output-grid resolution and coverage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Step near the origin, in noise standard deviations.
    pub noise_step: f64,
    /// Asymptotic relative step per unit log-fading standard deviation.
    pub relative_step: f64,
    /// Margin beyond the signal range, in noise standard deviations.
    pub noise_span: f64,
    /// Fading tail probability left uncovered at the top of the range.
    pub tail_prob: f64,
    /// Table entries below this fraction of their row maximum are dropped.
    pub band_floor: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            noise_step: 0.5,
            relative_step: 0.02,
            noise_span: 10.0,
            tail_prob: 1e-8,
            band_floor: 1e-30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeasureOptions {
    pub grid: GridOptions,
    pub quadrature: FadingQuadrature,
}

/// Quadrature nodes and weights on the output axis.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrid {
    pub ys: Vec<f64>,
    pub weights: Vec<f64>,
}

impl OutputGrid {
    /// Grid covering the outputs of every input in `[0, x_max]`. `subdivide`
    /// splits each lattice step into that many pieces.
    pub fn build(spec: &ChannelSpec, x_max: f64, opts: &GridOptions, subdivide: usize) -> Result<Self> {
        if !(opts.noise_step > 0.0 && opts.noise_span > 0.0 && opts.relative_step >= 0.0) {
            return Err(Error::Config("output grid steps must be positive".into()));
        }
        if !(opts.tail_prob > 0.0 && opts.tail_prob < 0.5) {
            return Err(Error::Config("tail_prob must lie in (0, 0.5)".into()));
        }
        if subdivide == 0 {
            return Err(Error::Config("subdivide must be at least 1".into()));
        }
        let sigma = spec.noise_std();
        let (h_cap, delta) = match spec.model() {
            ChannelModel::Gaussian => (1.0, 0.0),
            ChannelModel::Lognormal => (
                spec.fading().gain_quantile(1.0 - opts.tail_prob),
                opts.relative_step * spec.fading().log_gain_std(),
            ),
        };
        let lo = -opts.noise_span * sigma;
        let hi = spec.signal_gain() * x_max.max(0.0) * h_cap + opts.noise_span * sigma;
        let a = opts.noise_step * sigma;

        // y(t) = (a/δ) sinh(δ t), reducing to a·t as δ → 0.
        let to_t = |y: f64| if delta > 0.0 { (y * delta / a).asinh() / delta } else { y / a };
        let t_lo = to_t(lo).floor();
        let t_hi = to_t(hi).ceil();
        let m = subdivide as f64;
        let count = ((t_hi - t_lo) * m).round() as usize + 1;
        let mut ys = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for i in 0..count {
            let t = t_lo + i as f64 / m;
            let (y, dy) = if delta > 0.0 {
                ((a / delta) * (delta * t).sinh(), a * (delta * t).cosh())
            } else {
                (a * t, a)
            };
            ys.push(y);
            let end = if i == 0 || i + 1 == count { 0.5 } else { 1.0 };
            weights.push(end * dy / m);
        }
        Ok(Self { ys, weights })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// `Σ w_j f(y_j)`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.ys.iter().zip(&self.weights).map(|(y, w)| w * f(*y)).sum()
    }
}

/// Cell masses `W_j = w_j·p(y_j|x) / Σ` of one input over a contiguous band of
/// output cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub start: usize,
    pub masses: Vec<f64>,
    /// `Σ_j w_j p(y_j|x)` before normalization.
    pub raw_mass: f64,
    /// `Σ W log₂ W`.
    neg_entropy: f64,
}

impl TableRow {
    fn from_density(density: Vec<f64>, weights: &[f64], band_floor: f64) -> Self {
        let cells: Vec<f64> = density.iter().zip(weights).map(|(p, w)| p * w).collect();
        let raw_mass: f64 = cells.iter().sum();
        let peak = cells.iter().cloned().fold(0.0, f64::max);
        let cut = peak * band_floor;
        let start = cells.iter().position(|v| *v > cut).unwrap_or(0);
        let end = cells.iter().rposition(|v| *v > cut).map_or(start, |e| e + 1);
        let band = &cells[start..end];
        let kept: f64 = band.iter().sum();
        let masses: Vec<f64> = if kept > 0.0 {
            band.iter().map(|v| v / kept).collect()
        } else {
            Vec::new()
        };
        let neg_entropy = masses.iter().filter(|w| **w > 0.0).map(|w| w * w.log2()).sum();
        Self {
            start,
            masses,
            raw_mass,
            neg_entropy,
        }
    }

    /// Marginal information density `Σ W log₂(W/q)` against output masses `q`
    /// whose base-2 logarithms are `log_q`.
    #[inline]
    pub fn info_density(&self, log_q: &[f64]) -> f64 {
        let lq = &log_q[self.start..self.start + self.masses.len()];
        let cross: f64 = self.masses.iter().zip(lq).map(|(w, l)| w * l).sum();
        self.neg_entropy - cross
    }

    #[inline]
    fn accumulate(&self, p: f64, out: &mut [f64]) {
        let dst = &mut out[self.start..self.start + self.masses.len()];
        for (o, w) in dst.iter_mut().zip(&self.masses) {
            *o += p * w;
        }
    }
}

/// Conditional densities of a fixed set of inputs discretized on one output grid.
pub struct ChannelTable {
    xs: Vec<f64>,
    grid: OutputGrid,
    rows: Vec<TableRow>,
    kernel: TransitionKernel,
    band_floor: f64,
}

impl ChannelTable {
    /// Table for inputs `xs` on an output grid that covers `[0, x_max]`.
    pub fn build(spec: &ChannelSpec, xs: &[f64], x_max: f64, opts: &MeasureOptions) -> Result<Self> {
        let top = xs.iter().cloned().fold(x_max, f64::max);
        let grid = OutputGrid::build(spec, top, &opts.grid, 1)?;
        Self::with_grid(spec, xs, grid, opts)
    }

    pub fn with_grid(spec: &ChannelSpec, xs: &[f64], grid: OutputGrid, opts: &MeasureOptions) -> Result<Self> {
        if let Some(x) = xs.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::Domain(format!("input amplitude must be non-negative, got {x}")));
        }
        let kernel = TransitionKernel::new(spec, &opts.quadrature)?;
        let mut table = Self {
            xs: xs.to_vec(),
            grid,
            rows: Vec::new(),
            kernel,
            band_floor: opts.grid.band_floor,
        };
        table.rows = xs.par_iter().map(|x| table.row(*x)).collect();
        Ok(table)
    }

    /// Discretizes `p(·|x)` on this table's output grid.
    pub fn row(&self, x: f64) -> TableRow {
        let density: Vec<f64> = self.grid.ys.iter().map(|y| self.kernel.pdf(*y, x)).collect();
        TableRow::from_density(density, &self.grid.weights, self.band_floor)
    }

    pub fn inputs(&self) -> &[f64] {
        &self.xs
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    pub fn output_grid(&self) -> &OutputGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    fn check_len(&self, pmf: &[f64]) -> Result<()> {
        if pmf.len() != self.rows.len() {
            return Err(Error::Shape(format!(
                "pmf has {} entries for a {}-row table",
                pmf.len(),
                self.rows.len()
            )));
        }
        Ok(())
    }

    /// Output cell masses `q_j = Σ_k p_k W_kj`.
    pub fn output_masses(&self, pmf: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (row, p) in self.rows.iter().zip(pmf) {
            if *p > 0.0 {
                row.accumulate(*p, &mut out);
            }
        }
        out
    }

    /// `log₂ q_j`, floored.
    pub fn log_masses(q: &[f64]) -> Vec<f64> {
        q.iter().map(|v| v.max(DENSITY_FLOOR).log2()).collect()
    }

    /// Information density of every row against the output law of `pmf`.
    pub fn info_densities(&self, pmf: &[f64]) -> Result<Vec<f64>> {
        self.check_len(pmf)?;
        let log_q = Self::log_masses(&self.output_masses(pmf));
        Ok(self.rows.iter().map(|r| r.info_density(&log_q)).collect())
    }

    pub fn mutual_information(&self, pmf: &[f64]) -> Result<f64> {
        let dens = self.info_densities(pmf)?;
        Ok(pmf.iter().zip(&dens).filter(|(p, _)| **p > 0.0).map(|(p, i)| p * i).sum())
    }
}

fn support_table(dist: &InputDistribution, spec: &ChannelSpec, extra: &[f64], opts: &MeasureOptions) -> Result<(ChannelTable, Vec<f64>)> {
    let (mut xs, mut ps) = dist.atoms();
    xs.extend_from_slice(extra);
    ps.extend(std::iter::repeat(0.0).take(extra.len()));
    let table = ChannelTable::build(spec, &xs, dist.grid().peak(), opts)?;
    Ok((table, ps))
}

/// Output density `Σ_k p_k p(y|x_k)` of the configured model.
pub fn output_pdf(y: f64, dist: &InputDistribution, spec: &ChannelSpec) -> Result<f64> {
    let kernel = TransitionKernel::new(spec, &FadingQuadrature::default())?;
    Ok(dist
        .pmf()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(k, p)| p * kernel.pdf(y, dist.grid().point(k)))
        .sum())
}

/// Marginal information density `i(x;F)` in bits.
pub fn info_density(x: f64, dist: &InputDistribution, spec: &ChannelSpec) -> Result<f64> {
    info_density_with(x, dist, spec, &MeasureOptions::default())
}

pub fn info_density_with(x: f64, dist: &InputDistribution, spec: &ChannelSpec, opts: &MeasureOptions) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("input amplitude must be non-negative, got {x}")));
    }
    let (table, ps) = support_table(dist, spec, &[x], opts)?;
    let dens = table.info_densities(&ps)?;
    let value = *dens.last().expect("table has the probe row");
    if !value.is_finite() {
        return Err(Error::Tolerance(format!("information density at x={x} is not finite")));
    }
    Ok(value.max(0.0))
}

/// Mutual information `I(F)` in bits.
pub fn mutual_information(dist: &InputDistribution, spec: &ChannelSpec) -> Result<f64> {
    mutual_information_with(dist, spec, &MeasureOptions::default())
}

pub fn mutual_information_with(dist: &InputDistribution, spec: &ChannelSpec, opts: &MeasureOptions) -> Result<f64> {
    let (table, ps) = support_table(dist, spec, &[], opts)?;
    table.mutual_information(&ps)
}

/// Mutual information of an arbitrary finite mixture `Σ p_k δ(x − x_k)`.
pub fn mixture_information(xs: &[f64], ps: &[f64], x_max: f64, spec: &ChannelSpec, opts: &MeasureOptions) -> Result<f64> {
    if xs.len() != ps.len() {
        return Err(Error::Shape("locations and masses differ in length".into()));
    }
    ChannelTable::build(spec, xs, x_max, opts)?.mutual_information(ps)
}

/// Differential entropies in bits, from fresh density evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyReport {
    pub output_entropy: f64,
    pub conditional_entropy: f64,
}

impl EntropyReport {
    pub fn mutual_information(&self) -> f64 {
        self.output_entropy - self.conditional_entropy
    }
}

fn differential_entropy(grid: &OutputGrid, density: &[f64]) -> f64 {
    -grid
        .ys
        .iter()
        .enumerate()
        .map(|(j, _)| {
            let p = density[j];
            if p > 0.0 {
                grid.weights[j] * p * p.max(DENSITY_FLOOR).log2()
            } else {
                0.0
            }
        })
        .sum::<f64>()
}

/// `H(Y)` and `H(Y|X)` of a finite mixture, integrated on an output grid
/// `subdivide`× finer than the table grid.
pub fn entropy_decomposition(
    xs: &[f64],
    ps: &[f64],
    x_max: f64,
    spec: &ChannelSpec,
    opts: &MeasureOptions,
    subdivide: usize,
) -> Result<EntropyReport> {
    if xs.len() != ps.len() {
        return Err(Error::Shape("locations and masses differ in length".into()));
    }
    let top = xs.iter().cloned().fold(x_max, f64::max);
    let grid = OutputGrid::build(spec, top, &opts.grid, subdivide)?;
    let kernel = TransitionKernel::new(spec, &opts.quadrature)?;
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|x| grid.ys.iter().map(|y| kernel.pdf(*y, *x)).collect())
        .collect();
    let mut mixture = vec![0.0; grid.len()];
    let mut conditional_entropy = 0.0;
    for (row, p) in rows.iter().zip(ps) {
        if *p > 0.0 {
            conditional_entropy += p * differential_entropy(&grid, row);
            for (m, v) in mixture.iter_mut().zip(row) {
                *m += p * v;
            }
        }
    }
    Ok(EntropyReport {
        output_entropy: differential_entropy(&grid, &mixture),
        conditional_entropy,
    })
}

/// Mean and variance of `p(·|x)` on the output grid.
pub fn conditional_moments(x: f64, spec: &ChannelSpec, opts: &MeasureOptions) -> Result<(f64, f64, f64)> {
    let grid = OutputGrid::build(spec, x, &opts.grid, 1)?;
    let kernel = TransitionKernel::new(spec, &opts.quadrature)?;
    let dens: Vec<f64> = grid.ys.iter().map(|y| kernel.pdf(*y, x)).collect();
    let mass: f64 = dens.iter().zip(&grid.weights).map(|(p, w)| p * w).sum();
    let mean: f64 = grid.ys.iter().zip(&dens).zip(&grid.weights).map(|((y, p), w)| y * p * w).sum::<f64>() / mass;
    let var: f64 = grid
        .ys
        .iter()
        .zip(&dens)
        .zip(&grid.weights)
        .map(|((y, p), w)| (y - mean).powi(2) * p * w)
        .sum::<f64>()
        / mass;
    Ok((mass, mean, var))
}

/// Normal density on the output grid, exposed for tests of the grid itself.
pub fn grid_normal_mass(grid: &OutputGrid, mean: f64, std: f64) -> f64 {
    grid.integrate(|y| quad::normal_pdf(y, mean, std))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = InputGrid::new(5.0, 201).unwrap();
        assert_eq!(g.point(0), 0.0);
        assert_eq!(g.point(200), 5.0);
        assert_relative_eq!(g.point(100), 2.5, epsilon = 1e-15);
        assert!(InputGrid::new(5.0, 1).is_err());
        assert!(InputGrid::new(0.0, 3).is_err());
    }

    #[test]
    fn refined_grid_contains_original_points() {
        let g = InputGrid::new(3.0, 11).unwrap();
        let r = g.refined(4).unwrap();
        for k in 0..11 {
            assert_relative_eq!(r.point(4 * k), g.point(k), epsilon = 1e-14);
        }
    }

    #[test]
    fn distribution_rejects_bad_pmf() {
        let g = InputGrid::new(1.0, 3).unwrap();
        assert!(matches!(InputDistribution::new(g, vec![0.5, 0.5]), Err(Error::Shape(_))));
        assert!(matches!(InputDistribution::new(g, vec![0.5, 0.6, -0.1]), Err(Error::Domain(_))));
        assert!(matches!(InputDistribution::new(g, vec![0.5, 0.4, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn distribution_json_shape() {
        let g = InputGrid::new(2.0, 3).unwrap();
        let d = InputDistribution::new(g, vec![0.25, 0.25, 0.5]).unwrap();
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v, serde_json::json!({"A": 2.0, "N": 3, "pmf": [0.25, 0.25, 0.5]}));
        let back: InputDistribution = serde_json::from_value(v).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_value::<InputDistribution>(serde_json::json!({"A": 2.0, "N": 2, "pmf": [0.25, 0.25, 0.5]})).is_err());
    }

    #[test]
    fn moments_of_simple_laws() {
        let spec = ChannelSpec::reference();
        let g = InputGrid::new(1.0, 2).unwrap();
        let top = InputDistribution::point_mass(g, 1).unwrap();
        assert_eq!(avg_power(&top), 1.0);
        let half = InputDistribution::uniform(g);
        assert_eq!(avg_power(&half), 0.5);
        assert_relative_eq!(avg_eh(&half, &spec), 0.5 * spec.harvested_energy(1.0), max_relative = 1e-15);
    }

    #[test]
    fn uniform_output_grid_for_gaussian_model() {
        let spec = ChannelSpec::reference().with_model(ChannelModel::Gaussian);
        let g = OutputGrid::build(&spec, 0.01, &GridOptions::default(), 1).unwrap();
        let steps: Vec<f64> = g.ys.windows(2).map(|w| w[1] - w[0]).collect();
        let h = steps[0];
        assert!(steps.iter().all(|s| (s - h).abs() < 1e-9 * h));
        assert_relative_eq!(h, 0.5e-6, max_relative = 1e-12);
    }

    #[test]
    fn output_grid_integrates_normal_densities() {
        let spec = ChannelSpec::reference();
        let g = OutputGrid::build(&spec, 1.0, &GridOptions::default(), 1).unwrap();
        let sigma = spec.noise_std();
        assert_relative_eq!(grid_normal_mass(&g, 0.0, sigma), 1.0, epsilon = 1e-12);
        assert_relative_eq!(grid_normal_mass(&g, 3e-4, 3e-5), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn point_mass_has_zero_information() {
        let spec = ChannelSpec::reference();
        let g = InputGrid::new(1.0, 5).unwrap();
        let d = InputDistribution::point_mass(g, 2).unwrap();
        assert!(mutual_information(&d, &spec).unwrap().abs() < 1e-12);
        assert!(info_density(0.5, &d, &spec).unwrap().abs() < 1e-9);
    }

    #[test]
    fn table_rejects_wrong_pmf_length() {
        let spec = ChannelSpec::reference();
        let t = ChannelTable::build(&spec, &[0.0, 1.0], 1.0, &MeasureOptions::default()).unwrap();
        assert!(matches!(t.mutual_information(&[1.0]), Err(Error::Shape(_))));
    }
}
