//! Three-mass-point input family and the peak-amplitude transition where
//! binary inputs stop being optimal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelSpec, TransitionKernel};
use crate::error::{Error, Result};
use crate::measure::{ConstraintSet, InputGrid, MeasureOptions, OutputGrid};
use crate::quad::DENSITY_FLOOR;
use crate::solver::{self, SolveOptions};

/// Masses within this distance outside `[0, 1]` are rounding and get clamped.
const MASS_SLACK: f64 = 1e-12;

/// Law with masses `q0` at 0, `q` at `x1` and `q2` at `A`, constrained to mean
/// `ε`: `q2 = (ε − x1·q)/A`, `q0 = 1 − q − q2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreePointDist {
    #[serde(rename = "A")]
    pub a: f64,
    pub epsilon: f64,
    pub x1: f64,
    pub q: f64,
    pub q0: f64,
    pub q2: f64,
}

fn check_mass(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= -MASS_SLACK && v <= 1.0 + MASS_SLACK {
        Ok(v.clamp(0.0, 1.0))
    } else {
        Err(Error::Domain(format!("mass {name} = {v} lies outside [0, 1]")))
    }
}

pub fn three_point(a: f64, epsilon: f64, x1: f64, q: f64) -> Result<ThreePointDist> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("peak amplitude must be positive, got {a}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be non-negative, got {epsilon}")));
    }
    if !(x1 > 0.0 && x1 < a) {
        return Err(Error::Domain(format!("interior location x1 = {x1} must lie in (0, {a})")));
    }
    let q = check_mass("q1", q)?;
    let q2 = check_mass("q2", (epsilon - x1 * q) / a)?;
    let q0 = check_mass("q0", 1.0 - q - q2)?;
    Ok(ThreePointDist {
        a,
        epsilon,
        x1,
        q,
        q0,
        q2,
    })
}

impl ThreePointDist {
    /// The `q = 0` member: mass `ε/A` at `A`, the rest at zero.
    pub fn binary(a: f64, epsilon: f64) -> Result<Self> {
        three_point(a, epsilon, 0.5 * a, 0.0)
    }

    pub fn locations(&self) -> [f64; 3] {
        [0.0, self.x1, self.a]
    }

    pub fn masses(&self) -> [f64; 3] {
        [self.q0, self.q, self.q2]
    }

    pub fn mean(&self) -> f64 {
        self.x1 * self.q + self.a * self.q2
    }

    /// Largest admissible interior mass at location `x1`.
    pub fn max_interior_mass(a: f64, epsilon: f64, x1: f64) -> f64 {
        let by_top = epsilon / x1;
        let by_zero = (1.0 - epsilon / a) / (1.0 - x1 / a);
        by_top.min(by_zero).clamp(0.0, 1.0)
    }
}

/// Information and conditional entropy of a finite law, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationParts {
    pub mutual_information: f64,
    pub conditional_entropy: f64,
}

/// Evaluates finite mixtures on one output grid, so that differences between
/// nearby laws carry no grid noise.
pub struct FamilyEvaluator {
    grid: OutputGrid,
    kernel: TransitionKernel,
}

impl FamilyEvaluator {
    /// Grid covering inputs up to `x_max`, refined `subdivide`× over the
    /// default output grid.
    pub fn new(spec: &ChannelSpec, x_max: f64, opts: &MeasureOptions, subdivide: usize) -> Result<Self> {
        Ok(Self {
            grid: OutputGrid::build(spec, x_max, &opts.grid, subdivide)?,
            kernel: TransitionKernel::new(spec, &opts.quadrature)?,
        })
    }

    pub fn output_grid(&self) -> &OutputGrid {
        &self.grid
    }

    pub fn density(&self, x: f64) -> Vec<f64> {
        self.grid.ys.iter().map(|y| self.kernel.pdf(*y, x)).collect()
    }

    pub fn information(&self, xs: &[f64], ps: &[f64]) -> Result<InformationParts> {
        if xs.len() != ps.len() {
            return Err(Error::Shape("locations and masses differ in length".into()));
        }
        let rows: Vec<Vec<f64>> = xs.iter().map(|x| self.density(*x)).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        Ok(self.information_of_rows(&refs, ps))
    }

    /// `I = Σ_i p_i ∫ p_i(y) log₂(p_i(y)/p_Y(y)) dy` and `Σ_i p_i h(p_i)`.
    pub fn information_of_rows(&self, rows: &[&[f64]], ps: &[f64]) -> InformationParts {
        let w = &self.grid.weights;
        let mut mix = vec![0.0; w.len()];
        for (row, p) in rows.iter().zip(ps) {
            if *p > 0.0 {
                for (m, v) in mix.iter_mut().zip(row.iter()) {
                    *m += p * v;
                }
            }
        }
        let mut mi = 0.0;
        let mut hc = 0.0;
        for (row, p) in rows.iter().zip(ps) {
            if *p <= 0.0 {
                continue;
            }
            let (mut d, mut h) = (0.0, 0.0);
            for j in 0..w.len() {
                let v = row[j];
                if v > 0.0 {
                    let lv = v.max(DENSITY_FLOOR).log2();
                    d += w[j] * v * (lv - mix[j].max(DENSITY_FLOOR).log2());
                    h -= w[j] * v * lv;
                }
            }
            mi += p * d;
            hc += p * h;
        }
        InformationParts {
            mutual_information: mi,
            conditional_entropy: hc,
        }
    }

    pub fn family_information(&self, f: &ThreePointDist) -> Result<InformationParts> {
        self.information(&f.locations(), &f.masses())
    }
}

/// Central-difference derivatives of the family's information in `A`, bits
/// per unit amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericDerivative {
    /// `(ε, x1, q)` held fixed; the masses at 0 and `A` follow `A`.
    pub total: f64,
    /// All masses held fixed; only the top location moves.
    pub location_only: f64,
    /// Rate of change of `H(Y|X)` along the `total` path.
    pub conditional_entropy_rate: f64,
    pub step: f64,
}

#[allow(non_snake_case)]
pub fn dI_dA_numeric(
    a: f64,
    epsilon: f64,
    x1: f64,
    q: f64,
    spec: &ChannelSpec,
    h: f64,
    opts: &MeasureOptions,
) -> Result<NumericDerivative> {
    if !(h > 0.0 && h < a) {
        return Err(Error::Domain(format!("difference step {h} must lie in (0, {a})")));
    }
    let mid = three_point(a, epsilon, x1, q)?;
    let up = three_point(a + h, epsilon, x1, q)?;
    let down = three_point(a - h, epsilon, x1, q)?;
    let eval = FamilyEvaluator::new(spec, a + h, opts, 1)?;

    let r0 = eval.density(0.0);
    let r1 = eval.density(x1);
    let (r_up, r_down) = rayon::join(|| eval.density(a + h), || eval.density(a - h));
    let at = |top: &[f64], m: [f64; 3]| eval.information_of_rows(&[&r0, &r1, top], &m);

    let (iu, id) = (at(&r_up, up.masses()), at(&r_down, down.masses()));
    let (lu, ld) = (at(&r_up, mid.masses()), at(&r_down, mid.masses()));
    let span = 2.0 * h;
    Ok(NumericDerivative {
        total: (iu.mutual_information - id.mutual_information) / span,
        location_only: (lu.mutual_information - ld.mutual_information) / span,
        conditional_entropy_rate: (iu.conditional_entropy - id.conditional_entropy) / span,
        step: h,
    })
}

/// `q₂ · ∫ ∂p(y|A)/∂A · log₂(p(y|A)/p_Y(y)) dy` with the derivative taken from
/// the truncated Hermite series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesDerivative {
    pub value: f64,
    pub prefactor: f64,
    pub integral: f64,
    /// Contribution bound of the last series term to `value`.
    pub last_term: f64,
    pub n_terms: usize,
}

#[allow(non_snake_case)]
pub fn dI_dA_series(
    a: f64,
    epsilon: f64,
    x1: f64,
    q: f64,
    spec: &ChannelSpec,
    n_terms: usize,
    opts: &MeasureOptions,
) -> Result<SeriesDerivative> {
    let f = three_point(a, epsilon, x1, q)?;
    let eval = FamilyEvaluator::new(spec, a, opts, 1)?;
    let rows: Vec<Vec<f64>> = f.locations().par_iter().map(|x| eval.density(*x)).collect();
    let grid = eval.output_grid();
    let mut integral = 0.0;
    let mut tail = 0.0;
    for (j, (y, w)) in grid.ys.iter().zip(&grid.weights).enumerate() {
        let top = rows[2][j];
        let mix: f64 = rows.iter().zip(f.masses()).map(|(r, p)| p * r[j]).sum();
        if !(top > 0.0 && mix > 0.0) {
            continue;
        }
        let ratio = top.log2() - mix.log2();
        let d = channel::conditional_pdf_hermite_dx(*y, a, spec, n_terms)?;
        integral += w * d.value * ratio;
        tail += w * d.last_term * ratio.abs();
    }
    Ok(SeriesDerivative {
        value: f.q2 * integral,
        prefactor: f.q2,
        integral,
        last_term: f.q2 * tail,
        n_terms,
    })
}

/// Best member of the family at one peak amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyOptimum {
    pub x1: f64,
    pub q: f64,
    pub information: f64,
}

const COARSE: usize = 50;
const GOLDEN_STEPS: usize = 40;

fn golden_max(mut lo: f64, mut hi: f64, steps: usize, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..steps {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    if fa >= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Information of the binary member `{0, A}` with mean `ε`.
pub fn best_binary(a: f64, epsilon: f64, spec: &ChannelSpec, opts: &MeasureOptions) -> Result<f64> {
    let f = ThreePointDist::binary(a, epsilon)?;
    let eval = FamilyEvaluator::new(spec, a, opts, 1)?;
    Ok(eval.information(&[0.0, a], &[f.q0, f.q2])?.mutual_information)
}

/// Maximizes the family's information over `(x1, q)`: a 50×50 scan followed
/// by golden-section refinement in `x1` around the best cell, with `q`
/// re-optimized at every probe.
pub fn best_three_point(a: f64, epsilon: f64, spec: &ChannelSpec, opts: &MeasureOptions) -> Result<FamilyOptimum> {
    ThreePointDist::binary(a, epsilon)?;
    let eval = FamilyEvaluator::new(spec, a, opts, 1)?;
    let r0 = eval.density(0.0);
    let ra = eval.density(a);
    let best_q = |r1: &[f64], x1: f64, steps: usize| -> (f64, f64) {
        let q_max = ThreePointDist::max_interior_mass(a, epsilon, x1);
        let info = |q: f64| match three_point(a, epsilon, x1, q) {
            Ok(f) => eval.information_of_rows(&[&r0, r1, &ra], &f.masses()).mutual_information,
            Err(_) => f64::NEG_INFINITY,
        };
        let (mut bq, mut bi) = (0.0, info(0.0));
        for j in 1..COARSE {
            let q = q_max * j as f64 / (COARSE - 1) as f64;
            let v = info(q);
            if v > bi {
                bq = q;
                bi = v;
            }
        }
        if steps == 0 {
            return (bq, bi);
        }
        let dq = q_max / (COARSE - 1) as f64;
        let (gq, gi) = golden_max((bq - dq).max(0.0), (bq + dq).min(q_max), steps, info);
        if gi > bi {
            (gq, gi)
        } else {
            (bq, bi)
        }
    };
    let xs: Vec<f64> = (1..=COARSE).map(|i| a * i as f64 / (COARSE + 1) as f64).collect();
    let scan: Vec<(f64, f64, f64)> = xs
        .par_iter()
        .map(|x1| {
            let r1 = eval.density(*x1);
            let (q, i) = best_q(&r1, *x1, 0);
            (*x1, q, i)
        })
        .collect();
    let (bx, _, _) = scan
        .iter()
        .cloned()
        .fold((0.0, 0.0, f64::NEG_INFINITY), |acc, c| if c.2 > acc.2 { c } else { acc });
    let dx = a / (COARSE + 1) as f64;
    let mut best = FamilyOptimum {
        x1: bx,
        q: 0.0,
        information: f64::NEG_INFINITY,
    };
    let (lo, hi) = ((bx - dx).max(0.01 * dx), (bx + dx).min(a - 0.01 * dx));
    golden_max(lo, hi, GOLDEN_STEPS / 2, |x1| {
        let r1 = eval.density(x1);
        let (q, i) = best_q(&r1, x1, GOLDEN_STEPS);
        if i > best.information {
            best = FamilyOptimum { x1, q, information: i };
        }
        i
    });
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvidence {
    #[serde(rename = "dI_dA_numeric")]
    pub numeric: NumericDerivative,
    #[serde(rename = "dI_dA_series")]
    pub series: SeriesDerivative,
    pub x1: f64,
    pub q: f64,
}

/// Outcome of [`find_transition`]; `transition_A` is `None` when the support
/// count does not cross two inside the searched range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub epsilon: f64,
    #[serde(rename = "E_th")]
    pub e_th: f64,
    #[serde(rename = "transition_A")]
    pub transition_a: Option<f64>,
    pub bracket: Option<[f64; 2]>,
    pub evidence: Option<TransitionEvidence>,
    /// `(A, support count)` for every solve, in evaluation order. Infeasible
    /// amplitudes count as zero.
    pub probes: Vec<(f64, usize)>,
}

/// Options of the transition search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionOptions {
    pub solve: SolveOptions,
    /// Bisection stops when the bracket is at most this wide.
    pub a_tol: f64,
    pub series_terms: usize,
    /// Finite-difference step relative to `A`.
    pub relative_step: f64,
    pub with_evidence: bool,
}

impl Default for TransitionOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            a_tol: 0.05,
            series_terms: 60,
            relative_step: 2e-3,
            with_evidence: true,
        }
    }
}

fn support_count(a: f64, epsilon: f64, e_th: f64, spec: &ChannelSpec, opts: &SolveOptions) -> Result<usize> {
    let c = ConstraintSet::new(a, epsilon, e_th)?;
    let grid = InputGrid::new(a, opts.grid_points)?;
    match solver::solve_capacity(&c, &grid, spec, opts) {
        Ok(r) => Ok(r.support_count()),
        Err(Error::Infeasible { .. }) => Ok(0),
        Err(e) => Err(e),
    }
}

/// Smallest peak amplitude in `[a_lo, a_hi]`, to within `a_tol`, whose
/// solved input law has more than two mass points.
pub fn find_transition(
    epsilon: f64,
    e_th: f64,
    spec: &ChannelSpec,
    a_lo: f64,
    a_hi: f64,
    opts: &TransitionOptions,
) -> Result<TransitionReport> {
    if !(a_lo > 0.0 && a_lo < a_hi && a_hi.is_finite()) {
        return Err(Error::Config(format!("need 0 < A_lo < A_hi, got [{a_lo}, {a_hi}]")));
    }
    if !(opts.a_tol > 0.0) {
        return Err(Error::Config("a_tol must be positive".into()));
    }
    let mut probes = Vec::new();
    let mut count = |a: f64| -> Result<usize> {
        let n = support_count(a, epsilon, e_th, spec, &opts.solve)?;
        probes.push((a, n));
        Ok(n)
    };
    let not_found = |probes| TransitionReport {
        epsilon,
        e_th,
        transition_a: None,
        bracket: None,
        evidence: None,
        probes,
    };
    if count(a_lo)? > 2 || count(a_hi)? <= 2 {
        return Ok(not_found(probes));
    }
    let (mut lo, mut hi) = (a_lo, a_hi);
    while hi - lo > opts.a_tol {
        let mid = 0.5 * (lo + hi);
        if count(mid)? > 2 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let evidence = if opts.with_evidence {
        transition_evidence(hi, epsilon, spec, opts).ok()
    } else {
        None
    };
    Ok(TransitionReport {
        epsilon,
        e_th,
        transition_a: Some(hi),
        bracket: Some([lo, hi]),
        evidence,
        probes,
    })
}

/// Derivatives of the best three-point law at amplitude `a`.
pub fn transition_evidence(a: f64, epsilon: f64, spec: &ChannelSpec, opts: &TransitionOptions) -> Result<TransitionEvidence> {
    let m = &opts.solve.measure;
    let best = best_three_point(a, epsilon, spec, m)?;
    let h = opts.relative_step * a;
    Ok(TransitionEvidence {
        numeric: dI_dA_numeric(a, epsilon, best.x1, best.q, spec, h, m)?,
        series: dI_dA_series(a, epsilon, best.x1, best.q, spec, opts.series_terms, m)?,
        x1: best.x1,
        q: best.q,
    })
}
