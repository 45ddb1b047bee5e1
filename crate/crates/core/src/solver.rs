//! Constrained capacity solver over an amplitude grid.
//!
//! For fixed multipliers `(λ₁, λ₂)` the Lagrangian `I(p) − Σ p_k c_k`, with
//! cost `c_k = λ₁x_k − λ₂E(x_k)`, is maximized by Blahut–Arimoto updates
//! tilted by `2^{−c_k}`. The multipliers are then located by one-dimensional
//! monotone root finding on the constraint defects, starting from the
//! smallest multipliers and only activating a constraint when it is violated.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSpec;
use crate::error::{Error, Result};
use crate::measure::{self, ChannelTable, ConstraintSet, InputDistribution, InputGrid, MeasureOptions};

/// Lagrange multipliers of the capacity problem. `lambda1` prices average
/// power (bits per unit amplitude), `lambda2` rewards harvested energy (bits
/// per joule) and `lambda3` is the tilted information level shared by every
/// support point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MultiplierSet {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub location: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub capacity_bits: f64,
    pub constraints: ConstraintSet,
    pub dist: InputDistribution,
    pub multipliers: MultiplierSet,
    pub support: Vec<SupportPoint>,
    /// Largest value of the optimality residual `s(x)` on the refined grid.
    pub kkt_residual: f64,
    /// Largest `|s(x)|` over support cells.
    pub kkt_support_gap: f64,
    pub feasible: bool,
    pub iterations: usize,
    pub avg_power: f64,
    /// Average harvested energy (J).
    pub avg_eh: f64,
    /// Final upper-minus-lower bound gap of the inner maximization (bits).
    pub inner_gap: f64,
    /// `E_th` equals the largest harvestable energy: the feasible set is a
    /// single law, the requirement is tight and no finite multipliers exist.
    #[serde(default)]
    pub extremal: bool,
}

impl SolveReport {
    pub fn support_count(&self) -> usize {
        self.support.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Grid size used by sweeps that construct their own grid.
    pub grid_points: usize,
    pub measure: MeasureOptions,
    /// Inner stop: `max_k(i_k − c_k) − Σ p_k(i_k − c_k)` in bits.
    pub inner_tol: f64,
    pub max_inner_iterations: usize,
    /// Outer stop: `λ·|defect|` in bits.
    pub slackness_tol: f64,
    pub max_outer_iterations: usize,
    /// Blahut–Arimoto updates run before Newton steps start.
    pub warmup_iterations: usize,
    pub kkt_tol: f64,
    pub kkt_fine_factor: usize,
    /// Fail a solve whose refined-grid residual exceeds `kkt_tol`.
    pub enforce_kkt: bool,
    pub mass_tol: f64,
    pub cluster_width: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            grid_points: 201,
            measure: MeasureOptions::default(),
            inner_tol: 1e-9,
            max_inner_iterations: 20_000,
            slackness_tol: 1e-8,
            max_outer_iterations: 200,
            warmup_iterations: 200,
            kkt_tol: 1e-3,
            kkt_fine_factor: 4,
            enforce_kkt: true,
            mass_tol: 1e-6,
            cluster_width: 3,
        }
    }
}

/// Outcome of the closed-form feasibility test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// Largest average harvested energy reachable under the power bounds (J).
    pub max_eh: f64,
}

fn check_grid(constraints: &ConstraintSet, grid: &InputGrid) -> Result<()> {
    constraints.validate()?;
    if grid.peak() != constraints.a {
        return Err(Error::Shape(format!(
            "grid peak {} differs from the constraint peak {}",
            grid.peak(),
            constraints.a
        )));
    }
    Ok(())
}

/// Largest harvested energy under `x ≤ A`, `E[x] ≤ ε`. The harvesting law is
/// convex with `E(0) = 0`, so the extremal law puts mass `min(ε, A)/A` at `A`
/// and the rest at zero.
pub fn max_harvested_energy(a: f64, epsilon: f64, spec: &ChannelSpec) -> f64 {
    epsilon.min(a) / a * spec.harvested_energy(a)
}

pub fn feasibility_check(constraints: &ConstraintSet, grid: &InputGrid, spec: &ChannelSpec) -> Result<Feasibility> {
    check_grid(constraints, grid)?;
    let max_eh = max_harvested_energy(constraints.a, constraints.epsilon, spec);
    Ok(Feasibility {
        feasible: max_eh >= constraints.e_th,
        max_eh,
    })
}

/// Groups grid cells with mass at least `mass_tol` into mass points. Retained
/// cells at most `cluster_width` indices apart are chained into one point
/// located at their mass-weighted centroid. Masses are renormalized over the
/// retained cells.
pub fn extract_support(dist: &InputDistribution, mass_tol: f64, cluster_width: usize) -> Vec<SupportPoint> {
    let grid = dist.grid();
    let kept: Vec<(usize, f64)> = dist
        .pmf()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p >= mass_tol && **p > 0.0)
        .map(|(k, p)| (k, *p))
        .collect();
    let total: f64 = kept.iter().map(|(_, p)| p).sum();
    let mut clusters: Vec<(usize, f64, f64)> = Vec::new();
    for (k, p) in kept {
        match clusters.last_mut() {
            Some((last, mass, moment)) if k - *last <= cluster_width.max(1) => {
                *last = k;
                *mass += p;
                *moment += p * grid.point(k);
            }
            _ => clusters.push((k, p, p * grid.point(k))),
        }
    }
    clusters
        .into_iter()
        .map(|(_, mass, moment)| SupportPoint {
            location: moment / mass,
            mass: mass / total,
        })
        .collect()
}

/// Residuals of the optimality condition
/// `s(x) = i(x;F) − λ₁(x − ε) + λ₂(E(x) − E_th) − C ≤ 0`, with equality on the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktRecord {
    pub max_residual: f64,
    /// Location of the largest residual.
    pub argmax: f64,
    pub support_gap: f64,
    pub fine_points: usize,
}

struct Inner {
    lambda1: f64,
    pmf: Vec<f64>,
    mean: f64,
    eh: f64,
    mi: f64,
    level: f64,
    gap: f64,
}

struct Eval {
    q: Vec<f64>,
    v: Vec<f64>,
    level: f64,
    top: f64,
    mi: f64,
}

/// Cells below this fraction of the largest mass are held fixed by Newton steps.
const ACTIVE_FLOOR: f64 = 1e-9;
/// Blahut–Arimoto warm-up stops once the bound gap falls below this (bits).
const WARMUP_GAP: f64 = 1e-3;

struct Problem<'a> {
    table: &'a ChannelTable,
    xs: Vec<f64>,
    energy: Vec<f64>,
    constraints: ConstraintSet,
    opts: &'a SolveOptions,
    iterations: usize,
}

/// Mixes a warm start with a tiny uniform component so cells that underflowed
/// in a previous solve can re-enter.
fn reseed(pmf: &[f64]) -> Vec<f64> {
    let n = pmf.len() as f64;
    let eta = 1e-12;
    pmf.iter().map(|p| (1.0 - eta) * p + eta / n).collect()
}

impl<'a> Problem<'a> {
    fn new(table: &'a ChannelTable, spec: &ChannelSpec, constraints: ConstraintSet, opts: &'a SolveOptions) -> Self {
        let xs = table.inputs().to_vec();
        let energy = xs.iter().map(|x| spec.harvested_energy(*x)).collect();
        Self {
            table,
            xs,
            energy,
            constraints,
            opts,
            iterations: 0,
        }
    }

    fn costs(&self, l1: f64, l2: f64) -> Vec<f64> {
        self.xs
            .iter()
            .zip(&self.energy)
            .map(|(x, e)| l1 * x - l2 * e)
            .collect()
    }

    fn evaluate(&mut self, p: &[f64], cost: &[f64]) -> Result<Eval> {
        self.iterations += 1;
        let q = self.table.output_masses(p);
        let log_q = ChannelTable::log_masses(&q);
        let dens: Vec<f64> = self.table.rows().iter().map(|r| r.info_density(&log_q)).collect();
        let v: Vec<f64> = dens.iter().zip(cost).map(|(i, c)| i - c).collect();
        let level = p.iter().zip(&v).map(|(p, v)| p * v).sum();
        let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mi = p.iter().zip(&dens).map(|(p, i)| p * i).sum();
        Ok(Eval { q, v, level, top, mi })
    }

    /// One tilted Blahut–Arimoto update.
    fn ba_step(p: &mut [f64], e: &Eval, relax: f64) {
        let mut total = 0.0;
        for (pk, vk) in p.iter_mut().zip(&e.v) {
            *pk *= (relax * (vk - e.top) * LN_2).exp();
            total += *pk;
        }
        p.iter_mut().for_each(|pk| *pk /= total);
    }

    /// Curvature `Σ_j W_kj W_lj / (q_j ln 2)` (the negated Hessian of the
    /// information) over the rows in `active`.
    fn curvature(&self, active: &[usize], e: &Eval) -> DMatrix<f64> {
        let rows = self.table.rows();
        let inv_q: Vec<f64> = e.q.iter().map(|q| if *q > 0.0 { 1.0 / q } else { 0.0 }).collect();
        let s = active.len();
        let mut m = DMatrix::<f64>::zeros(s, s);
        for a in 0..s {
            let ra = &rows[active[a]];
            for b in a..s {
                let rb = &rows[active[b]];
                let lo = ra.start.max(rb.start);
                let hi = (ra.start + ra.masses.len()).min(rb.start + rb.masses.len());
                let mut acc = 0.0;
                for j in lo..hi {
                    acc += ra.masses[j - ra.start] * rb.masses[j - rb.start] * inv_q[j];
                }
                m[(a, b)] = acc / LN_2;
                m[(b, a)] = acc / LN_2;
            }
        }
        m
    }

    /// Damped Newton step `(M + μ·diag M) d = g − ν1` with `Σ d = 0`.
    fn damped_step(m: &DMatrix<f64>, g: &DVector<f64>, damping: f64) -> Option<DVector<f64>> {
        let s = g.len();
        let mut reg = m.clone();
        for a in 0..s {
            reg[(a, a)] += damping * m[(a, a)].max(f64::MIN_POSITIVE) + 1e-300;
        }
        let chol = reg.cholesky()?;
        let mg = chol.solve(g);
        let m1 = chol.solve(&DVector::from_element(s, 1.0));
        let nu = mg.sum() / m1.sum();
        let d = mg - m1 * nu;
        d.iter().all(|x| x.is_finite()).then_some(d)
    }

    /// Maximizes `I(p) − Σ p_k c_k` over the simplex from `warm`: an active-set
    /// projected Newton iteration, with tilted Blahut–Arimoto updates to seed
    /// the support and whenever a Newton step fails to ascend.
    fn inner(&mut self, l1: f64, l2: f64, warm: &[f64]) -> Result<Inner> {
        let cost = self.costs(l1, l2);
        let tol = self.opts.inner_tol;
        let n = self.xs.len();
        let mut p = reseed(warm);
        let mut e = self.evaluate(&p, &cost)?;
        for _ in 0..self.opts.warmup_iterations {
            if e.top - e.level <= WARMUP_GAP {
                break;
            }
            Self::ba_step(&mut p, &e, 1.0);
            e = self.evaluate(&p, &cost)?;
        }
        let start = self.iterations;
        let mut damping = 1e-3;
        while self.iterations - start < self.opts.max_inner_iterations {
            let gap = e.top - e.level;
            if gap <= tol {
                let mi = e.mi;
                let level = e.level;
                return Ok(self.finish(l1, p, mi, level, gap));
            }
            let peak = p.iter().cloned().fold(0.0, f64::max);
            let mut active: Vec<usize> = (0..n).filter(|k| p[*k] > ACTIVE_FLOOR * peak).collect();
            let mut entering: Vec<usize> = (0..n)
                .filter(|k| p[*k] <= ACTIVE_FLOOR * peak && e.v[*k] > e.level + 0.5 * gap)
                .collect();
            entering.sort_by(|a, b| e.v[*b].total_cmp(&e.v[*a]));
            entering.truncate(8);
            active.extend(entering);
            active.sort_unstable();

            let mut accepted = false;
            let m = self.curvature(&active, &e);
            let g = DVector::from_iterator(active.len(), active.iter().map(|k| e.v[*k]));
            for _ in 0..24 {
                let Some(d) = Self::damped_step(&m, &g, damping) else {
                    damping = (damping * 10.0).min(1e12);
                    continue;
                };
                let mut trial = p.clone();
                for (a, k) in active.iter().enumerate() {
                    trial[*k] = (p[*k] + d[a]).max(0.0);
                }
                let total: f64 = trial.iter().sum();
                trial.iter_mut().for_each(|t| *t /= total);
                let te = self.evaluate(&trial, &cost)?;
                // Near the optimum the ascent drops below the resolution of
                // `level`; the bound gap then decides.
                let flat = te.level >= e.level - 8.0 * f64::EPSILON * e.level.abs();
                if te.level > e.level || (flat && te.top - te.level < gap) {
                    p = trial;
                    e = te;
                    accepted = true;
                    damping = (damping * 0.1).max(1e-12);
                    break;
                }
                damping = (damping * 10.0).min(1e12);
            }
            if !accepted {
                damping = 1e-3;
                for _ in 0..20 {
                    Self::ba_step(&mut p, &e, 1.0);
                    e = self.evaluate(&p, &cost)?;
                }
            }
        }
        Err(Error::NonConvergence {
            iterations: self.iterations,
            residual: e.top - e.level,
        })
    }

    fn finish(&self, lambda1: f64, pmf: Vec<f64>, mi: f64, level: f64, gap: f64) -> Inner {
        let mean = pmf.iter().zip(&self.xs).map(|(p, x)| p * x).sum();
        let eh = pmf.iter().zip(&self.energy).map(|(p, e)| p * e).sum();
        Inner {
            lambda1,
            pmf,
            mean,
            eh,
            mi,
            level,
            gap,
        }
    }

    /// Smallest `λ ≥ 0` with `defect(λ) ≤ 0` for a defect that decreases in
    /// `λ` and is positive at zero. Returns the solution on the feasible side.
    fn root(
        &mut self,
        scale: f64,
        warm: Vec<f64>,
        mut eval: impl FnMut(&mut Self, f64, &[f64]) -> Result<(f64, Inner)>,
    ) -> Result<(f64, Inner)> {
        let tol = self.opts.slackness_tol;
        let mut lo = 0.0;
        let mut d_lo = f64::INFINITY;
        let mut hi = scale;
        let (mut d_hi, mut best) = eval(self, hi, &warm)?;
        let mut steps = 0;
        while d_hi > 0.0 {
            steps += 1;
            if steps > 60 {
                return Err(Error::NonConvergence {
                    iterations: self.iterations,
                    residual: d_hi,
                });
            }
            lo = hi;
            d_lo = d_hi;
            hi *= 4.0;
            let (d, s) = eval(self, hi, &best.pmf)?;
            d_hi = d;
            best = s;
        }
        let mut warm = best.pmf.clone();
        let mut side = 0i8;
        for _ in 0..self.opts.max_outer_iterations {
            if hi * d_hi.abs() <= tol || hi - lo <= 1e-14 * hi {
                return Ok((hi, best));
            }
            // Illinois-weighted secant, falling back to bisection near the ends.
            let mut lam = if d_lo.is_finite() {
                let (wl, wh) = match side {
                    1 => (0.5, 1.0),
                    -1 => (1.0, 0.5),
                    _ => (1.0, 1.0),
                };
                let (fl, fh) = (wl * d_lo, wh * d_hi);
                (lo * fh - hi * fl) / (fh - fl)
            } else {
                0.5 * (lo + hi)
            };
            let width = hi - lo;
            if !(lam > lo + 0.01 * width && lam < hi - 0.01 * width) {
                lam = 0.5 * (lo + hi);
            }
            let (d, s) = eval(self, lam, &warm)?;
            warm = s.pmf.clone();
            if d > 0.0 {
                lo = lam;
                d_lo = d;
                side = if side == 1 { 2 } else { 1 };
            } else {
                hi = lam;
                d_hi = d;
                best = s;
                side = if side == -1 { -2 } else { -1 };
            }
            if side.abs() == 2 {
                side = side.signum();
            }
        }
        Err(Error::NonConvergence {
            iterations: self.iterations,
            residual: hi * d_hi.abs(),
        })
    }

    fn power_scale(&self) -> f64 {
        1.0 / self.constraints.a
    }

    fn energy_scale(&self) -> f64 {
        let top = self.energy.iter().cloned().fold(0.0, f64::max);
        1.0 / top.max(f64::MIN_POSITIVE)
    }

    /// λ₁ such that the mean meets ε at fixed λ₂ (zero when already slack).
    fn fit_power(&mut self, l2: f64, warm: &[f64]) -> Result<(f64, Inner)> {
        let eps = self.constraints.epsilon;
        let free = self.inner(0.0, l2, warm)?;
        if free.mean <= eps {
            return Ok((0.0, free));
        }
        let scale = self.power_scale();
        let start = free.pmf.clone();
        self.root(scale, start, |s, l1, w| {
            let r = s.inner(l1, l2, w)?;
            Ok((r.mean - eps, r))
        })
    }

    fn solve(&mut self) -> Result<(MultiplierSet, Inner)> {
        let n = self.xs.len();
        let uniform = vec![1.0 / n as f64; n];
        let (eps, e_th) = (self.constraints.epsilon, self.constraints.e_th);

        let free = self.inner(0.0, 0.0, &uniform)?;
        let (ap_ok, eh_ok) = (free.mean <= eps, free.eh >= e_th);
        if ap_ok && eh_ok {
            return Ok(self.multipliers(0.0, 0.0, free));
        }
        if !ap_ok {
            let (l1, r) = self.fit_power(0.0, &free.pmf)?;
            if r.eh >= e_th {
                return Ok(self.multipliers(l1, 0.0, r));
            }
        } else {
            let scale = self.energy_scale();
            let (l2, r) = self.root(scale, free.pmf.clone(), |s, l2, w| {
                let r = s.inner(0.0, l2, w)?;
                Ok((e_th - r.eh, r))
            })?;
            if r.mean <= eps {
                return Ok(self.multipliers(0.0, l2, r));
            }
        }
        // Both constraints bind: λ₂ outer, λ₁ re-fitted at every step.
        let scale = self.energy_scale();
        let (l2, r) = self.root(scale, free.pmf.clone(), |s, l2, w| {
            let (_, r) = s.fit_power(l2, w)?;
            Ok((e_th - r.eh, r))
        })?;
        Ok(self.multipliers(r.lambda1, l2, r))
    }

    fn multipliers(&self, l1: f64, l2: f64, r: Inner) -> (MultiplierSet, Inner) {
        (
            MultiplierSet {
                lambda1: l1,
                lambda2: l2,
                lambda3: r.level,
            },
            r,
        )
    }
}

/// Optimality residuals on a grid `fine_factor`× denser than the table's,
/// reusing the table rows at the coarse points.
fn kkt_on_table(
    table: &ChannelTable,
    pmf: &[f64],
    grid: &InputGrid,
    multipliers: &MultiplierSet,
    constraints: &ConstraintSet,
    capacity: f64,
    spec: &ChannelSpec,
    fine_factor: usize,
    mass_tol: f64,
) -> Result<KktRecord> {
    use rayon::prelude::*;
    let fine = grid.refined(fine_factor.max(1))?;
    let f = fine_factor.max(1);
    let log_q = ChannelTable::log_masses(&table.output_masses(pmf));
    let residual = |x: f64, i: f64| {
        i - multipliers.lambda1 * (x - constraints.epsilon)
            + multipliers.lambda2 * (spec.harvested_energy(x) - constraints.e_th)
            - capacity
    };
    let values: Vec<(f64, f64)> = (0..fine.len())
        .into_par_iter()
        .map(|m| {
            let x = fine.point(m);
            let i = if m % f == 0 {
                table.rows()[m / f].info_density(&log_q)
            } else {
                table.row(x).info_density(&log_q)
            };
            (x, residual(x, i))
        })
        .collect();
    let (argmax, max_residual) = values
        .iter()
        .cloned()
        .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let support_gap = pmf
        .iter()
        .enumerate()
        .filter(|(_, p)| **p >= mass_tol)
        .map(|(k, _)| values[k * f].1.abs())
        .fold(0.0, f64::max);
    Ok(KktRecord {
        max_residual,
        argmax,
        support_gap,
        fine_points: fine.len(),
    })
}

/// Re-derives the optimality residuals of `report` from scratch.
pub fn kkt_verify(
    report: &SolveReport,
    constraints: &ConstraintSet,
    spec: &ChannelSpec,
    fine_factor: usize,
    opts: &SolveOptions,
) -> Result<KktRecord> {
    let grid = *report.dist.grid();
    check_grid(constraints, &grid)?;
    let table = ChannelTable::build(spec, &grid.points(), grid.peak(), &opts.measure)?;
    let pmf = report.dist.pmf();
    let capacity = table.mutual_information(pmf)?;
    kkt_on_table(&table, pmf, &grid, &report.multipliers, constraints, capacity, spec, fine_factor, opts.mass_tol)
}

/// Capacity of the grid-constrained problem.
pub fn solve_capacity(
    constraints: &ConstraintSet,
    grid: &InputGrid,
    spec: &ChannelSpec,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    check_grid(constraints, grid)?;
    let table = ChannelTable::build(spec, &grid.points(), grid.peak(), &opts.measure)?;
    solve_on_table(&table, constraints, grid, spec, opts)
}

/// Solve against a prebuilt table whose rows are the points of `grid`.
pub fn solve_on_table(
    table: &ChannelTable,
    constraints: &ConstraintSet,
    grid: &InputGrid,
    spec: &ChannelSpec,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    check_grid(constraints, grid)?;
    if table.inputs().len() != grid.len() {
        return Err(Error::Shape("table rows do not match the input grid".into()));
    }
    let feas = feasibility_check(constraints, grid, spec)?;
    if !feas.feasible {
        return Err(Error::Infeasible {
            e_th: constraints.e_th,
            max_eh: feas.max_eh,
        });
    }
    if constraints.e_th > 0.0 && constraints.e_th >= feas.max_eh * (1.0 - 1e-12) {
        return extremal_report(table, constraints, grid, spec);
    }

    let mut problem = Problem::new(table, spec, *constraints, opts);
    let (multipliers, inner) = problem.solve()?;
    let dist = InputDistribution::normalized(*grid, inner.pmf.clone())?;
    let kkt = kkt_on_table(
        table,
        dist.pmf(),
        grid,
        &multipliers,
        constraints,
        inner.mi,
        spec,
        opts.kkt_fine_factor,
        opts.mass_tol,
    )?;
    if opts.enforce_kkt && kkt.max_residual > opts.kkt_tol {
        return Err(Error::NonConvergence {
            iterations: problem.iterations,
            residual: kkt.max_residual,
        });
    }
    let support = extract_support(&dist, opts.mass_tol, opts.cluster_width);
    Ok(SolveReport {
        capacity_bits: inner.mi,
        constraints: *constraints,
        avg_power: measure::avg_power(&dist),
        avg_eh: measure::avg_eh(&dist, spec),
        dist,
        multipliers,
        support,
        kkt_residual: kkt.max_residual,
        kkt_support_gap: kkt.support_gap,
        feasible: true,
        iterations: problem.iterations,
        inner_gap: inner.gap,
        extremal: false,
    })
}

/// When `E_th` equals the largest harvestable energy the feasible set is the
/// single extremal law, which is therefore optimal; no residuals apply.
fn extremal_report(
    table: &ChannelTable,
    constraints: &ConstraintSet,
    grid: &InputGrid,
    spec: &ChannelSpec,
) -> Result<SolveReport> {
    let n = grid.len();
    let top = constraints.epsilon.min(constraints.a) / constraints.a;
    let mut pmf = vec![0.0; n];
    pmf[0] = 1.0 - top;
    pmf[n - 1] += top;
    let dist = InputDistribution::normalized(*grid, pmf)?;
    let capacity = table.mutual_information(dist.pmf())?;
    let support = extract_support(&dist, 0.0, 0);
    Ok(SolveReport {
        capacity_bits: capacity,
        constraints: *constraints,
        avg_power: measure::avg_power(&dist),
        avg_eh: measure::avg_eh(&dist, spec),
        dist,
        multipliers: MultiplierSet::default(),
        support,
        kkt_residual: 0.0,
        kkt_support_gap: 0.0,
        feasible: true,
        iterations: 0,
        inner_gap: 0.0,
        extremal: true,
    })
}

/// One point of the information-energy region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    #[serde(rename = "E_th")]
    pub e_th: f64,
    /// `None` when the requirement cannot be met.
    pub capacity_bits: Option<f64>,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub multipliers: Option<MultiplierSet>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kkt_residual: Option<f64>,
    #[serde(default)]
    pub extremal: bool,
}

/// Capacity against a list of ascending energy requirements at fixed `A`, `ε`.
pub fn sweep_region(
    base: &ConstraintSet,
    e_th_list: &[f64],
    grid: &InputGrid,
    spec: &ChannelSpec,
    opts: &SolveOptions,
) -> Result<Vec<RegionPoint>> {
    if e_th_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("E_th list must be sorted ascending".into()));
    }
    check_grid(base, grid)?;
    let table = ChannelTable::build(spec, &grid.points(), grid.peak(), &opts.measure)?;
    e_th_list
        .iter()
        .map(|e_th| {
            let c = ConstraintSet { e_th: *e_th, ..*base };
            match solve_on_table(&table, &c, grid, spec, opts) {
                Ok(r) => Ok(RegionPoint {
                    e_th: *e_th,
                    capacity_bits: Some(r.capacity_bits),
                    feasible: true,
                    multipliers: Some(r.multipliers),
                    kkt_residual: Some(r.kkt_residual),
                    extremal: r.extremal,
                }),
                Err(Error::Infeasible { .. }) => Ok(RegionPoint {
                    e_th: *e_th,
                    capacity_bits: None,
                    feasible: false,
                    multipliers: None,
                    kkt_residual: None,
                    extremal: false,
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Optimal support at one peak amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassPointRow {
    #[serde(rename = "A")]
    pub a: f64,
    pub feasible: bool,
    pub support_count: usize,
    pub support: Vec<SupportPoint>,
    pub capacity_bits: Option<f64>,
    pub kkt_residual: Option<f64>,
}

/// Solves on an `opts.grid_points` grid for every peak amplitude in `a_list`.
pub fn sweep_masspoints(
    a_list: &[f64],
    base: &ConstraintSet,
    spec: &ChannelSpec,
    opts: &SolveOptions,
) -> Result<Vec<MassPointRow>> {
    if a_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("A list must be sorted ascending".into()));
    }
    a_list
        .iter()
        .map(|a| {
            let c = ConstraintSet { a: *a, ..*base };
            let grid = InputGrid::new(*a, opts.grid_points)?;
            match solve_capacity(&c, &grid, spec, opts) {
                Ok(r) => Ok(MassPointRow {
                    a: *a,
                    feasible: true,
                    support_count: r.support.len(),
                    capacity_bits: Some(r.capacity_bits),
                    kkt_residual: Some(r.kkt_residual),
                    support: r.support,
                }),
                Err(Error::Infeasible { .. }) => Ok(MassPointRow {
                    a: *a,
                    feasible: false,
                    support_count: 0,
                    support: Vec::new(),
                    capacity_bits: None,
                    kkt_residual: None,
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn support_of_exact_two_point_law() {
        let g = InputGrid::new(1.0, 11).unwrap();
        let mut pmf = vec![0.0; 11];
        pmf[0] = 0.4;
        pmf[10] = 0.6;
        let d = InputDistribution::new(g, pmf).unwrap();
        let s = extract_support(&d, 1e-6, 3);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0], SupportPoint { location: 0.0, mass: 0.4 });
        assert_eq!(s[1], SupportPoint { location: 1.0, mass: 0.6 });
    }

    #[test]
    fn smeared_cluster_collapses_to_centroid() {
        let g = InputGrid::new(5.0, 21).unwrap();
        let mut pmf = vec![0.0; 21];
        pmf[0] = 0.5;
        pmf[9] = 0.1;
        pmf[10] = 0.3;
        pmf[11] = 0.1;
        let d = InputDistribution::new(g, pmf).unwrap();
        let s = extract_support(&d, 1e-6, 3);
        assert_eq!(s.len(), 2);
        assert_relative_eq!(s[1].location, 2.5, epsilon = 1e-12);
        assert_relative_eq!(s[1].mass, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn feasibility_certificate() {
        let spec = ChannelSpec::reference();
        let g = InputGrid::new(1.0, 11).unwrap();
        let zero = ConstraintSet::new(1.0, 0.3, 0.0).unwrap();
        assert!(feasibility_check(&zero, &g, &spec).unwrap().feasible);
        let c = ConstraintSet::new(1.0, 1.0, 1e-3).unwrap();
        let f = feasibility_check(&c, &g, &spec).unwrap();
        assert!(f.feasible);
        assert_relative_eq!(f.max_eh, spec.harvested_energy(1.0), max_relative = 1e-15);
        let bad = ConstraintSet::new(1.0, 0.2, 1e-3).unwrap();
        assert!(!feasibility_check(&bad, &g, &spec).unwrap().feasible);
        let wrong = InputGrid::new(2.0, 11).unwrap();
        assert!(matches!(feasibility_check(&c, &wrong, &spec), Err(Error::Shape(_))));
    }

    #[test]
    fn infeasible_solve_carries_certificate() {
        let spec = ChannelSpec::reference();
        let g = InputGrid::new(0.1, 11).unwrap();
        let c = ConstraintSet::new(0.1, 0.05, 1e-3).unwrap();
        match solve_capacity(&c, &g, &spec, &SolveOptions::default()) {
            Err(Error::Infeasible { e_th, max_eh }) => {
                assert_eq!(e_th, 1e-3);
                assert!(max_eh < e_th);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }
}
