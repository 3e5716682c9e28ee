//! C ABI over the `ratiolimit` crate.
//!
//! Every fallible call returns an [`RlStatus`]; on failure the message is kept
//! per thread and read with [`rl_last_error_message`]. Handles are opaque and
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ratiolimit::cli::{execute, Cli, Command, Flags};
use ratiolimit::ratio::{closed_form_h_free_isotropic, estimate_h};
use ratiolimit::spectral::Spectrum;
use ratiolimit::walk::{build_powers, transition, PowerOptions, PowerTable, ScaledMeasure};
use ratiolimit::{Error, GroupDescriptor, GroupElement};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Periodic = 5,
    Coverage = 6,
    NotConverged = 7,
    Budget = 8,
    DepthExceeded = 9,
    Config = 10,
    Io = 11,
    Other = 12,
    Panic = 13,
}

impl From<&Error> for RlStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parse { .. } | Error::DescriptorMismatch { .. } | Error::InvalidDescriptor(_) => RlStatus::Parse,
            Error::InvalidArgument(_) | Error::InvalidMeasure(_) | Error::NotIsotropic(_) => {
                RlStatus::InvalidArgument
            }
            Error::Periodic { .. } | Error::PeriodInconclusive { .. } => RlStatus::Periodic,
            Error::Coverage(_) | Error::Unreachable { .. } | Error::NotRetained { .. } | Error::Underflow { .. } => {
                RlStatus::Coverage
            }
            Error::NotConverged(_) => RlStatus::NotConverged,
            Error::Budget { .. } | Error::RadiusExhausted { .. } => RlStatus::Budget,
            Error::DepthExceeded { .. } => RlStatus::DepthExceeded,
            Error::Config(_) => RlStatus::Config,
            Error::Io(_) | Error::Json(_) => RlStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn fail(status: RlStatus, msg: impl Into<String>) -> RlStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), RlStatus>) -> RlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RlStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(RlStatus::Panic, "panic inside ratiolimit"),
    }
}

fn lift<T>(r: ratiolimit::Result<T>) -> Result<T, RlStatus> {
    r.map_err(|e| fail(RlStatus::from(&e), e.to_string()))
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, RlStatus> {
    if p.is_null() {
        return Err(fail(RlStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RlStatus::InvalidUtf8, "argument is not UTF-8"))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, RlStatus> {
    p.as_mut().ok_or_else(|| fail(RlStatus::NullPointer, "null output pointer"))
}

/// A group descriptor.
pub struct RlGroup {
    group: GroupDescriptor,
}

/// A step measure with its convolution powers.
pub struct RlWalk {
    table: Box<dyn PowerTable>,
    spectrum: Option<Spectrum>,
}

impl RlWalk {
    fn spectrum(&mut self) -> Result<&Spectrum, RlStatus> {
        if self.spectrum.is_none() {
            self.spectrum = Some(lift(Spectrum::estimate(self.table.as_ref()))?);
        }
        Ok(self.spectrum.as_ref().expect("spectrum set"))
    }

    fn element(&self, s: &str) -> Result<GroupElement, RlStatus> {
        lift(self.table.group().parse_element(s))
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn rl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Crate version as a static string.
#[no_mangle]
pub extern "C" fn rl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSON descriptor such as `{"family":"free","rank":2}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_group` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_group_new(json: *const c_char, out_group: *mut *mut RlGroup) -> RlStatus {
    guard(|| {
        let slot = out(out_group)?;
        let group: GroupDescriptor = serde_json::from_str(text(json)?)
            .map_err(|e| fail(RlStatus::Parse, format!("descriptor: {e}")))?;
        lift(group.validate())?;
        *slot = Box::into_raw(Box::new(RlGroup { group }));
        Ok(())
    })
}

/// # Safety
/// `group` must come from [`rl_group_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn rl_group_free(group: *mut RlGroup) {
    if !group.is_null() {
        drop(Box::from_raw(group));
    }
}

/// Number of elements of word length at most `radius`.
///
/// # Safety
/// `group` must be a live handle and `out_size` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_group_ball_size(group: *const RlGroup, radius: usize, out_size: *mut usize) -> RlStatus {
    guard(|| {
        let g = group.as_ref().ok_or_else(|| fail(RlStatus::NullPointer, "null group"))?;
        let slot = out(out_size)?;
        *slot = lift(g.group.ball(radius))?.len();
        Ok(())
    })
}

/// Builds convolution powers of a measure (measure-file text) up to `depth`.
///
/// # Safety
/// `group` must be a live handle, `measure` a NUL-terminated string and
/// `out_walk` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_walk_new(
    group: *const RlGroup,
    measure: *const c_char,
    depth: usize,
    out_walk: *mut *mut RlWalk,
) -> RlStatus {
    guard(|| {
        let g = group.as_ref().ok_or_else(|| fail(RlStatus::NullPointer, "null group"))?;
        let slot = out(out_walk)?;
        let step = lift(ScaledMeasure::parse(&g.group, text(measure)?))?;
        let table = lift(build_powers(&step, depth, PowerOptions::default()))?;
        if let Some(e) = table.exhausted() {
            return Err(fail(RlStatus::Budget, e.to_string()));
        }
        *slot = Box::into_raw(Box::new(RlWalk { table, spectrum: None }));
        Ok(())
    })
}

/// # Safety
/// `walk` must come from [`rl_walk_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn rl_walk_free(walk: *mut RlWalk) {
    if !walk.is_null() {
        drop(Box::from_raw(walk));
    }
}

/// `P^{(n)}_{x,y}`.
///
/// # Safety
/// `walk` must be a live handle, `x` and `y` NUL-terminated strings and
/// `out_p` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_walk_transition(
    walk: *const RlWalk,
    n: usize,
    x: *const c_char,
    y: *const c_char,
    out_p: *mut f64,
) -> RlStatus {
    guard(|| {
        let w = walk.as_ref().ok_or_else(|| fail(RlStatus::NullPointer, "null walk"))?;
        let slot = out(out_p)?;
        let (x, y) = (w.element(text(x)?)?, w.element(text(y)?)?);
        *slot = lift(transition(w.table.as_ref(), n, &x, &y))?.map_or(0.0, f64::exp);
        Ok(())
    })
}

/// Spectral radius estimate with its band.
///
/// # Safety
/// `walk` must be a live handle and the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rl_walk_spectral_radius(
    walk: *mut RlWalk,
    out_rho: *mut f64,
    out_lo: *mut f64,
    out_hi: *mut f64,
) -> RlStatus {
    guard(|| {
        let w = walk.as_mut().ok_or_else(|| fail(RlStatus::NullPointer, "null walk"))?;
        let (a, b, c) = (out(out_rho)?, out(out_lo)?, out(out_hi)?);
        let r = &w.spectrum()?.radius;
        (*a, *b, *c) = (r.rho_hat, r.lo, r.hi);
        Ok(())
    })
}

/// Accelerated ratio-limit kernel `Ĥ(x,y)` with its band.
///
/// # Safety
/// `walk` must be a live handle, `x` and `y` NUL-terminated strings and the
/// outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rl_walk_ratio_kernel(
    walk: *const RlWalk,
    x: *const c_char,
    y: *const c_char,
    out_estimate: *mut f64,
    out_lo: *mut f64,
    out_hi: *mut f64,
) -> RlStatus {
    guard(|| {
        let w = walk.as_ref().ok_or_else(|| fail(RlStatus::NullPointer, "null walk"))?;
        let (a, b, c) = (out(out_estimate)?, out(out_lo)?, out(out_hi)?);
        let (x, y) = (w.element(text(x)?)?, w.element(text(y)?)?);
        let v = lift(estimate_h(w.table.as_ref(), &x, &y))?.value;
        (*a, *b, *c) = (v.estimate, v.lo, v.hi);
        Ok(())
    })
}

/// Closed-form `H(x,y)` for isotropic walks on `F_rank`.
///
/// # Safety
/// `x` and `y` must be NUL-terminated strings and `out_h` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_free_closed_form(
    rank: usize,
    x: *const c_char,
    y: *const c_char,
    out_h: *mut f64,
) -> RlStatus {
    guard(|| {
        let slot = out(out_h)?;
        let g = GroupDescriptor::free(rank);
        lift(g.validate())?;
        let (x, y) = (lift(g.parse_element(text(x)?))?, lift(g.parse_element(text(y)?))?);
        *slot = lift(closed_form_h_free_isotropic(rank, &x, &y))?;
        Ok(())
    })
}

/// Runs every job of a config into `out_dir`; `out_passed` is 1 when all
/// reports passed.
///
/// # Safety
/// `config` and `out_dir` must be NUL-terminated strings and `out_passed` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_run_report(config: *const c_char, out_dir: *const c_char, out_passed: *mut i32) -> RlStatus {
    guard(|| {
        let slot = out(out_passed)?;
        let cli = Cli {
            command: Command::Report(Flags {
                config: text(config)?.into(),
                out: Some(text(out_dir)?.into()),
                max_depth: None,
                tolerance: None,
                closed_form_compare: false,
                seed: None,
            }),
        };
        *slot = lift(execute(&cli))? as i32;
        Ok(())
    })
}

