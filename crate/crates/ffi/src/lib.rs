//! C ABI over `slipt-core`.
//!
//! Channels and solve reports are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns a
//! [`SliptStatus`]; on failure the message is available from
//! [`slipt_last_error_message`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::c_char;
use slipt_core::channel::{ChannelModel, ChannelSpec};
use slipt_core::measure::{ConstraintSet, InputDistribution, InputGrid};
use slipt_core::solver::{self, SolveOptions, SolveReport};
use slipt_core::{measure, Error};

/// Outcome of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliptStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Domain = 4,
    Shape = 5,
    DegenerateGeometry = 6,
    Infeasible = 7,
    NonConvergence = 8,
    Tolerance = 9,
    Calibration = 10,
    Json = 11,
    Io = 12,
    OutOfRange = 13,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliptModel {
    Lognormal = 0,
    Gaussian = 1,
}

/// Opaque channel handle.
pub struct SliptChannel {
    spec: ChannelSpec,
}

/// Opaque solve report handle.
pub struct SliptReport {
    report: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SliptStatus {
    match e {
        Error::DegenerateGeometry(_) => SliptStatus::DegenerateGeometry,
        Error::Domain(_) => SliptStatus::Domain,
        Error::Config(_) => SliptStatus::Config,
        Error::Shape(_) => SliptStatus::Shape,
        Error::Infeasible { .. } => SliptStatus::Infeasible,
        Error::NonConvergence { .. } => SliptStatus::NonConvergence,
        Error::Tolerance(_) => SliptStatus::Tolerance,
        Error::Calibration { .. } => SliptStatus::Calibration,
        Error::Json(_) => SliptStatus::Json,
        Error::Io(_) | Error::Csv(_) => SliptStatus::Io,
    }
}

struct Failure(SliptStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SliptStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SliptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SliptStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SliptStatus::Panic
        }
    }
}

unsafe fn channel_ref<'a>(ch: *const SliptChannel) -> Result<&'a SliptChannel, Failure> {
    ch.as_ref().ok_or_else(|| null("channel"))
}

unsafe fn report_ref<'a>(r: *const SliptReport) -> Result<&'a SliptReport, Failure> {
    r.as_ref().ok_or_else(|| null("report"))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Failure(SliptStatus::InvalidUtf8, e.to_string()))
}

/// Message of the last failing call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn slipt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from a `slipt_*_to_json` call and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn slipt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_channel_reference(out: *mut *mut SliptChannel) -> SliptStatus {
    guard(|| {
        let h = Box::new(SliptChannel {
            spec: ChannelSpec::reference(),
        });
        write(out, Box::into_raw(h))
    })
}

/// Parses a channel document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_channel_from_json(json: *const c_char, out: *mut *mut SliptChannel) -> SliptStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(SliptStatus::InvalidUtf8, e.to_string()))?;
        let spec: ChannelSpec = serde_json::from_str(text).map_err(Error::from)?;
        write(out, Box::into_raw(Box::new(SliptChannel { spec })))
    })
}

/// Serializes the channel; free the result with [`slipt_string_free`].
///
/// # Safety
/// `ch` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_channel_to_json(ch: *const SliptChannel, out: *mut *mut c_char) -> SliptStatus {
    guard(|| {
        let ch = channel_ref(ch)?;
        let s = serde_json::to_string(&ch.spec).map_err(Error::from)?;
        write(out, to_c_string(s)?)
    })
}

/// # Safety
/// `ch` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slipt_channel_free(ch: *mut SliptChannel) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// # Safety
/// `ch` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn slipt_channel_set_model(ch: *mut SliptChannel, model: SliptModel) -> SliptStatus {
    guard(|| {
        let ch = ch.as_mut().ok_or_else(|| null("channel"))?;
        let m = match model {
            SliptModel::Lognormal => ChannelModel::Lognormal,
            SliptModel::Gaussian => ChannelModel::Gaussian,
        };
        ch.spec = ch.spec.with_model(m);
        Ok(())
    })
}

/// Path gains of both links and the harvesting coefficients `b`, `c`.
///
/// # Safety
/// `ch` must be a live handle and every output pointer valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_channel_gains(
    ch: *const SliptChannel,
    h1l: *mut f64,
    h2l: *mut f64,
    b: *mut f64,
    c: *mut f64,
) -> SliptStatus {
    guard(|| {
        let s = &channel_ref(ch)?.spec;
        write(h1l, s.h1l())?;
        write(h2l, s.h2l())?;
        write(b, s.b())?;
        write(c, s.c())
    })
}

/// Harvested energy (J) at amplitude `x`.
///
/// # Safety
/// `ch` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_eh_energy(ch: *const SliptChannel, x: f64, out: *mut f64) -> SliptStatus {
    guard(|| {
        let s = &channel_ref(ch)?.spec;
        write(out, slipt_core::channel::eh_energy(x, s)?)
    })
}

/// `p(y|x)` of the channel's model.
///
/// # Safety
/// `ch` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_conditional_pdf(ch: *const SliptChannel, y: f64, x: f64, out: *mut f64) -> SliptStatus {
    guard(|| {
        let s = &channel_ref(ch)?.spec;
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("input amplitude must be non-negative, got {x}")).into());
        }
        write(out, s.conditional_pdf(y, x, &Default::default())?)
    })
}

/// # Safety
/// `ch` must be a live handle and both outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_feasibility(
    ch: *const SliptChannel,
    a: f64,
    epsilon: f64,
    e_th: f64,
    feasible: *mut bool,
    max_eh: *mut f64,
) -> SliptStatus {
    guard(|| {
        let s = &channel_ref(ch)?.spec;
        let c = ConstraintSet::new(a, epsilon, e_th)?;
        let f = solver::feasibility_check(&c, &InputGrid::new(a, 2)?, s)?;
        write(feasible, f.feasible)?;
        write(max_eh, f.max_eh)
    })
}

/// Mutual information (bits) of `pmf` on the `len`-point grid over `[0, a]`.
///
/// # Safety
/// `pmf` must point to `len` readable values; `ch` must be live and `out`
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_mutual_information(
    ch: *const SliptChannel,
    a: f64,
    pmf: *const f64,
    len: usize,
    out: *mut f64,
) -> SliptStatus {
    guard(|| {
        let s = &channel_ref(ch)?.spec;
        if pmf.is_null() {
            return Err(null("pmf"));
        }
        let p = std::slice::from_raw_parts(pmf, len).to_vec();
        let d = InputDistribution::new(InputGrid::new(a, len)?, p)?;
        write(out, measure::mutual_information(&d, s)?)
    })
}

/// Solves the capacity problem on an `n`-point grid. With `enforce_kkt` set,
/// a solve whose refined-grid optimality residual exceeds `1e-3` bits fails
/// with [`SliptStatus::NonConvergence`].
///
/// # Safety
/// `ch` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_solve(
    ch: *const SliptChannel,
    a: f64,
    epsilon: f64,
    e_th: f64,
    n: usize,
    enforce_kkt: bool,
    out: *mut *mut SliptReport,
) -> SliptStatus {
    guard(|| {
        let s = &channel_ref(ch)?.spec;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let c = ConstraintSet::new(a, epsilon, e_th)?;
        let grid = InputGrid::new(a, n)?;
        let opts = SolveOptions {
            grid_points: n,
            enforce_kkt,
            ..SolveOptions::default()
        };
        let report = solver::solve_capacity(&c, &grid, s, &opts)?;
        write(out, Box::into_raw(Box::new(SliptReport { report })))
    })
}

/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slipt_report_free(r: *mut SliptReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Capacity (bits), refined-grid residual (bits) and support size.
///
/// # Safety
/// `r` must be a live handle and every output valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_report_summary(
    r: *const SliptReport,
    capacity_bits: *mut f64,
    kkt_residual: *mut f64,
    support_count: *mut usize,
) -> SliptStatus {
    guard(|| {
        let r = &report_ref(r)?.report;
        write(capacity_bits, r.capacity_bits)?;
        write(kkt_residual, r.kkt_residual)?;
        write(support_count, r.support_count())
    })
}

/// # Safety
/// `r` must be a live handle and every output valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_report_multipliers(
    r: *const SliptReport,
    lambda1: *mut f64,
    lambda2: *mut f64,
    lambda3: *mut f64,
) -> SliptStatus {
    guard(|| {
        let m = report_ref(r)?.report.multipliers;
        write(lambda1, m.lambda1)?;
        write(lambda2, m.lambda2)?;
        write(lambda3, m.lambda3)
    })
}

/// Location and mass of support point `index`.
///
/// # Safety
/// `r` must be a live handle and both outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_report_support_point(
    r: *const SliptReport,
    index: usize,
    location: *mut f64,
    mass: *mut f64,
) -> SliptStatus {
    guard(|| {
        let r = &report_ref(r)?.report;
        let p = r.support.get(index).ok_or_else(|| {
            Failure(
                SliptStatus::OutOfRange,
                format!("support index {index} out of range ({} points)", r.support.len()),
            )
        })?;
        write(location, p.location)?;
        write(mass, p.mass)
    })
}

/// Copies the solved pmf into `buf`. `len` must equal the grid size; query
/// it with `buf = NULL`, which writes the size to `needed`.
///
/// # Safety
/// `buf` must be null or point to `len` writable values; `needed` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_report_pmf(
    r: *const SliptReport,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> SliptStatus {
    guard(|| {
        let pmf = report_ref(r)?.report.dist.pmf();
        write(needed, pmf.len())?;
        if buf.is_null() {
            return Ok(());
        }
        if len != pmf.len() {
            return Err(Failure(
                SliptStatus::Shape,
                format!("buffer holds {len} values, pmf has {}", pmf.len()),
            ));
        }
        ptr::copy_nonoverlapping(pmf.as_ptr(), buf, len);
        Ok(())
    })
}

/// Serializes the report; free the result with [`slipt_string_free`].
///
/// # Safety
/// `r` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn slipt_report_to_json(r: *const SliptReport, out: *mut *mut c_char) -> SliptStatus {
    guard(|| {
        let r = &report_ref(r)?.report;
        let s = serde_json::to_string(r).map_err(Error::from)?;
        write(out, to_c_string(s)?)
    })
}
