use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use slipt_core::channel::{self, ChannelModel, ChannelSpec};
use slipt_core::highsnr;
use slipt_core::learner::{self, LearnerOutput};
use slipt_core::measure::{ConstraintSet, InputGrid, MeasureOptions};
use slipt_core::solver::{self, SolveOptions, SolveReport};
use slipt_core::transition::{self, TransitionOptions};
use slipt_core::Error;

#[derive(Parser)]
#[command(name = "slipt", version, about = "Capacity analysis for SLIPT optical links")]
struct Cli {
    /// Channel document (JSON). The reference channel is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Write the reference channel document.
    Preset,
    /// Tabulate the conditional density p(y|x).
    Pdf(PdfArgs),
    /// Solve for the capacity-achieving input law.
    Solve(SolveArgs),
    /// Capacity against the harvested-energy requirement.
    Region(RegionArgs),
    /// Optimal mass points against the peak amplitude.
    Masspoints(MasspointArgs),
    /// Locate the peak amplitude where binary inputs stop being optimal.
    Transition(TransitionArgs),
    /// Calibrate the closed-form high-SNR input law.
    Highsnr(HighSnrArgs),
    /// Write a channel bundle for the external learner.
    ExportLearner(ExportArgs),
    /// Score learner output against a solver report.
    ValidateLearner(ValidateArgs),
}

#[derive(Args)]
struct Constraints {
    #[arg(long = "A")]
    a: f64,
    #[arg(long)]
    epsilon: f64,
    /// Harvested-energy requirement (J).
    #[arg(long = "E-th", default_value_t = 0.0)]
    e_th: f64,
}

#[derive(Args)]
struct SolverFlags {
    /// Input grid size.
    #[arg(long = "N", default_value_t = 201)]
    n: usize,
    /// Return solves whose refined-grid optimality residual exceeds the
    /// tolerance instead of failing them.
    #[arg(long)]
    allow_kkt_violation: bool,
    #[arg(long, default_value_t = 1e-3)]
    kkt_tol: f64,
}

impl SolverFlags {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            grid_points: self.n,
            kkt_tol: self.kkt_tol,
            enforce_kkt: !self.allow_kkt_violation,
            ..SolveOptions::default()
        }
    }
}

#[derive(Args)]
struct PdfArgs {
    /// Comma-separated input amplitudes.
    #[arg(long, value_delimiter = ',', required = true)]
    x: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    y_max: f64,
    #[arg(long, default_value_t = 201)]
    y_points: usize,
    /// Terms of the Hermite partial sum; 0 disables the column.
    #[arg(long, default_value_t = 40)]
    hermite_terms: usize,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    constraints: Constraints,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct RegionArgs {
    #[arg(long = "A")]
    a: f64,
    #[arg(long)]
    epsilon: f64,
    /// Comma-separated ascending energy requirements (J).
    #[arg(long = "E-th-list", value_delimiter = ',', required = true)]
    e_th_list: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lognormal")]
    models: Vec<ModelArg>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Lognormal,
    Gaussian,
}

impl ModelArg {
    fn model(self) -> ChannelModel {
        match self {
            ModelArg::Lognormal => ChannelModel::Lognormal,
            ModelArg::Gaussian => ChannelModel::Gaussian,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModelArg::Lognormal => "lognormal",
            ModelArg::Gaussian => "gaussian",
        }
    }
}

#[derive(Args)]
struct MasspointArgs {
    /// Comma-separated ascending peak amplitudes.
    #[arg(long = "A-list", value_delimiter = ',', required = true)]
    a_list: Vec<f64>,
    #[arg(long)]
    epsilon: f64,
    #[arg(long = "E-th", default_value_t = 0.0)]
    e_th: f64,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct TransitionArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long = "E-th", default_value_t = 0.0)]
    e_th: f64,
    #[arg(long = "A-lo")]
    a_lo: f64,
    #[arg(long = "A-hi")]
    a_hi: f64,
    #[arg(long = "A-tol", default_value_t = 0.05)]
    a_tol: f64,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct HighSnrArgs {
    #[command(flatten)]
    constraints: Constraints,
    #[arg(long = "N", default_value_t = 201)]
    n: usize,
    /// Also solve the full problem and report the divergence.
    #[arg(long)]
    compare: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    constraints: Constraints,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Bundle directory.
    #[arg(long)]
    dir: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Learner output JSON (`samples`, optional `mi_estimate_bits`).
    #[arg(long)]
    learner_output: PathBuf,
    /// Solver report JSON written by `solve`.
    #[arg(long)]
    report: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence { .. } | Error::Tolerance(_) | Error::Calibration { .. } => 1,
        Error::Infeasible { .. } => 3,
        _ => 2,
    }
}

fn load_spec(path: Option<&Path>) -> Result<ChannelSpec, Error> {
    match path {
        None => Ok(ChannelSpec::reference()),
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
    }
}

struct Output {
    format: Format,
    path: Option<PathBuf>,
}

impl Output {
    fn emit(&self, bytes: Vec<u8>) -> Result<(), Error> {
        match &self.path {
            Some(p) => fs::write(p, bytes)?,
            None => std::io::stdout().write_all(&bytes)?,
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, value: &T) -> Result<(), Error> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.emit(bytes)
    }

    fn table(&self, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.emit(bytes)
    }
}

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e16)`.
fn num(x: f64) -> String {
    let m = x.abs();
    if m != 0.0 && !(1e-4..1e16).contains(&m) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let spec = load_spec(cli.config.as_deref())?;
    let out = Output {
        format: cli.format,
        path: cli.out.clone(),
    };
    match cli.command {
        Command::Preset => out.json(&ChannelSpec::reference()),
        Command::Pdf(a) => cmd_pdf(&spec, &a, &out),
        Command::Solve(a) => {
            let c = ConstraintSet::new(a.constraints.a, a.constraints.epsilon, a.constraints.e_th)?;
            let grid = InputGrid::new(c.a, a.solver.n)?;
            let report = solver::solve_capacity(&c, &grid, &spec, &a.solver.options())?;
            match out.format {
                Format::Json => out.json(&report),
                Format::Csv => out.table(
                    &["location", "mass"],
                    report
                        .support
                        .iter()
                        .map(|s| vec![num(s.location), num(s.mass)])
                        .collect(),
                ),
            }
        }
        Command::Region(a) => cmd_region(&spec, &a, &out),
        Command::Masspoints(a) => {
            let base = ConstraintSet::new(a.a_list.first().copied().unwrap_or(1.0), a.epsilon, a.e_th)?;
            let rows = solver::sweep_masspoints(&a.a_list, &base, &spec, &a.solver.options())?;
            match out.format {
                Format::Json => out.json(&rows),
                Format::Csv => out.table(
                    &["A", "feasible", "support_count", "capacity_bits", "locations", "masses"],
                    rows.iter()
                        .map(|r| {
                            let join = |f: &dyn Fn(&solver::SupportPoint) -> f64| {
                                r.support.iter().map(|s| num(f(s))).collect::<Vec<_>>().join(";")
                            };
                            vec![
                                num(r.a),
                                r.feasible.to_string(),
                                r.support_count.to_string(),
                                opt(r.capacity_bits),
                                join(&|s| s.location),
                                join(&|s| s.mass),
                            ]
                        })
                        .collect(),
                ),
            }
        }
        Command::Transition(a) => {
            let opts = TransitionOptions {
                solve: a.solver.options(),
                a_tol: a.a_tol,
                ..TransitionOptions::default()
            };
            let r = transition::find_transition(a.epsilon, a.e_th, &spec, a.a_lo, a.a_hi, &opts)?;
            out.json(&r)
        }
        Command::Highsnr(a) => {
            let c = ConstraintSet::new(a.constraints.a, a.constraints.epsilon, a.constraints.e_th)?;
            let grid = InputGrid::new(c.a, a.n)?;
            let hs = highsnr::calibrate_multipliers(&c, &grid, &spec)?;
            if !a.compare {
                return out.json(&hs);
            }
            let opts = SolveOptions {
                enforce_kkt: false,
                ..SolveOptions::default()
            };
            let report = solver::solve_capacity(&c, &grid, &spec, &opts)?;
            let div = highsnr::compare_to_solver(&hs, &report, &spec, &MeasureOptions::default())?;
            out.json(&serde_json::json!({ "highsnr": hs, "divergence": div }))
        }
        Command::ExportLearner(a) => {
            let c = ConstraintSet::new(a.constraints.a, a.constraints.epsilon, a.constraints.e_th)?;
            let m = learner::export_learner(&spec, &c, a.samples, cli.seed, &a.dir)?;
            out.json(&m)
        }
        Command::ValidateLearner(a) => {
            let o: LearnerOutput = serde_json::from_str(&fs::read_to_string(&a.learner_output)?)?;
            let report: SolveReport = serde_json::from_str(&fs::read_to_string(&a.report)?)?;
            let v = learner::validate_learner(&o, &report, &spec)?;
            out.json(&v)
        }
    }
}

#[derive(Serialize)]
struct PdfRow {
    y: f64,
    x: f64,
    pdf_quad: f64,
    pdf_hermite: Option<f64>,
    last_term: Option<f64>,
}

fn cmd_pdf(spec: &ChannelSpec, a: &PdfArgs, out: &Output) -> Result<(), Error> {
    if !(a.y_max > a.y_min) || a.y_points < 2 {
        return Err(Error::Config("need y-max > y-min and at least 2 y points".into()));
    }
    let kernel = channel::TransitionKernel::new(spec, &Default::default())?;
    let mut rows = Vec::new();
    for x in &a.x {
        if !(*x >= 0.0) {
            return Err(Error::Config(format!("input amplitude must be non-negative, got {x}")));
        }
        for j in 0..a.y_points {
            let y = a.y_min + (a.y_max - a.y_min) * j as f64 / (a.y_points - 1) as f64;
            let h = if a.hermite_terms > 0 {
                Some(channel::conditional_pdf_hermite(y, *x, spec, a.hermite_terms)?)
            } else {
                None
            };
            rows.push(PdfRow {
                y,
                x: *x,
                pdf_quad: kernel.pdf(y, *x),
                pdf_hermite: h.map(|h| h.value),
                last_term: h.map(|h| h.last_term),
            });
        }
    }
    match out.format {
        Format::Json => out.json(&rows),
        Format::Csv => out.table(
            &["y", "x", "pdf_quad", "pdf_hermite", "last_term"],
            rows.iter()
                .map(|r| {
                    vec![
                        num(r.y),
                        num(r.x),
                        num(r.pdf_quad),
                        opt(r.pdf_hermite),
                        opt(r.last_term),
                    ]
                })
                .collect(),
        ),
    }
}

#[derive(Serialize)]
struct ModelRegion {
    model: &'static str,
    points: Vec<solver::RegionPoint>,
}

fn cmd_region(spec: &ChannelSpec, a: &RegionArgs, out: &Output) -> Result<(), Error> {
    let base = ConstraintSet::new(a.a, a.epsilon, 0.0)?;
    let grid = InputGrid::new(a.a, a.solver.n)?;
    let mut regions = Vec::new();
    for m in &a.models {
        let s = spec.with_model(m.model());
        let points = solver::sweep_region(&base, &a.e_th_list, &grid, &s, &a.solver.options())?;
        regions.push(ModelRegion { model: m.name(), points });
    }
    match out.format {
        Format::Json => out.json(&regions),
        Format::Csv => {
            let single = regions.len() == 1;
            let header: &[&str] = if single {
                &["E_th_J", "capacity_bits", "feasible"]
            } else {
                &["model", "E_th_J", "capacity_bits", "feasible"]
            };
            let mut rows = Vec::new();
            for r in &regions {
                for p in &r.points {
                    let mut row = vec![num(p.e_th), opt(p.capacity_bits), p.feasible.to_string()];
                    if !single {
                        row.insert(0, r.model.to_string());
                    }
                    rows.push(row);
                }
            }
            out.table(header, rows)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
