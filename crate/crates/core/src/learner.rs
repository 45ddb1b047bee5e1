//! File interchange with the external adversarial capacity learner.
//!
//! A bundle is a directory holding the channel document, the constraint set,
//! a seeded file of fading draws for the information link and a manifest tying
//! them together. The learner writes back its input samples and an optional
//! information estimate; [`validate_learner`] scores them against a solver
//! report.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelSpec};
use crate::error::{Error, Result};
use crate::highsnr;
use crate::measure::{ConstraintSet, InputDistribution, InputGrid};
use crate::solver::SolveReport;

pub const CHANNEL_FILE: &str = "channel.json";
pub const CONSTRAINTS_FILE: &str = "constraints.json";
pub const SAMPLES_FILE: &str = "fading_samples.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub seed: u64,
    pub sample_count: usize,
    /// Sum of the fading draws, for integrity checks on the reader side.
    pub sample_sum: f64,
    pub channel_file: String,
    pub constraints_file: String,
    pub samples_file: String,
}

/// Writes a learner bundle into `dir`, creating it if needed.
pub fn export_learner(
    spec: &ChannelSpec,
    constraints: &ConstraintSet,
    sample_count: usize,
    seed: u64,
    dir: &Path,
) -> Result<BundleManifest> {
    constraints.validate()?;
    if sample_count == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    let samples = channel::fading_sample(spec.fading(), sample_count, seed)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CHANNEL_FILE), serde_json::to_string_pretty(spec)?)?;
    fs::write(dir.join(CONSTRAINTS_FILE), serde_json::to_string_pretty(constraints)?)?;

    let mut w = csv::Writer::from_path(dir.join(SAMPLES_FILE))?;
    w.write_record(["h1"])?;
    for h in &samples {
        w.write_record([h.to_string()])?;
    }
    w.flush()?;

    let manifest = BundleManifest {
        seed,
        sample_count,
        sample_sum: samples.iter().sum(),
        channel_file: CHANNEL_FILE.into(),
        constraints_file: CONSTRAINTS_FILE.into(),
        samples_file: SAMPLES_FILE.into(),
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Contents of a bundle directory after integrity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerBundle {
    pub manifest: BundleManifest,
    pub spec: ChannelSpec,
    pub constraints: ConstraintSet,
    pub samples: Vec<f64>,
}

pub fn read_bundle(dir: &Path) -> Result<LearnerBundle> {
    let manifest: BundleManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let spec: ChannelSpec = serde_json::from_str(&fs::read_to_string(dir.join(&manifest.channel_file))?)?;
    let constraints: ConstraintSet = serde_json::from_str(&fs::read_to_string(dir.join(&manifest.constraints_file))?)?;
    constraints.validate()?;
    let mut r = csv::Reader::from_path(dir.join(&manifest.samples_file))?;
    let samples = r
        .records()
        .map(|rec| {
            let rec = rec?;
            rec.get(0)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Config("malformed fading sample".into()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let sum: f64 = samples.iter().sum();
    if samples.len() != manifest.sample_count || sum != manifest.sample_sum {
        return Err(Error::Config(format!(
            "fading samples do not match the manifest ({} draws summing to {sum}, expected {} summing to {})",
            samples.len(),
            manifest.sample_count,
            manifest.sample_sum
        )));
    }
    Ok(LearnerBundle {
        manifest,
        spec,
        constraints,
        samples,
    })
}

/// What the learner hands back. Unknown fields (training curves, network
/// settings) are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerOutput {
    /// Generator draws of the input amplitude.
    pub samples: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mi_estimate_bits: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerValidation {
    pub total_variation: f64,
    /// Solver capacity minus the learner's estimate (bits).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mi_gap_bits: Option<f64>,
    /// `mean(x) − ε`; positive values violate the power bound.
    pub power_residual: f64,
    /// `E_th − mean(E(x))` in J; positive values violate the energy requirement.
    pub eh_residual: f64,
    /// Samples outside `[0, A]`.
    pub peak_violations: usize,
    pub sample_count: usize,
    /// Learner samples binned to the nearest point of the solve grid.
    pub binned: InputDistribution,
}

/// Histogram of `samples` on `grid`, each draw assigned to its nearest grid
/// point after clamping into `[0, A]`.
pub fn bin_samples(samples: &[f64], grid: &InputGrid) -> Result<InputDistribution> {
    if samples.is_empty() {
        return Err(Error::Shape("no learner samples to bin".into()));
    }
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("learner sample {x} is not finite")));
    }
    let mut counts = vec![0.0; grid.len()];
    let step = grid.spacing();
    for x in samples {
        let k = (x.clamp(0.0, grid.peak()) / step).round() as usize;
        counts[k.min(grid.len() - 1)] += 1.0;
    }
    InputDistribution::normalized(*grid, counts)
}

pub fn validate_learner(output: &LearnerOutput, report: &SolveReport, spec: &ChannelSpec) -> Result<LearnerValidation> {
    let grid = *report.dist.grid();
    let c = report.constraints;
    let binned = bin_samples(&output.samples, &grid)?;
    let n = output.samples.len() as f64;
    let mean = output.samples.iter().sum::<f64>() / n;
    let eh = output
        .samples
        .iter()
        .map(|x| spec.harvested_energy(x.max(0.0)))
        .sum::<f64>()
        / n;
    let peak_violations = output
        .samples
        .iter()
        .filter(|x| **x < 0.0 || **x > c.a)
        .count();
    Ok(LearnerValidation {
        total_variation: highsnr::total_variation(&binned, &report.dist)?,
        mi_gap_bits: output.mi_estimate_bits.map(|m| report.capacity_bits - m),
        power_residual: mean - c.epsilon,
        eh_residual: c.e_th - eh,
        peak_violations,
        sample_count: output.samples.len(),
        binned,
    })
}
