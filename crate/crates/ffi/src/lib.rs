//! C ABI over `cdknlab`.
//!
//! Spaces are opaque `CdkSpace` handles created by `cdk_space_from_json` and
//! released with `cdk_space_free`. Every fallible call returns a `CdkStatus`;
//! the message of the last failure on the calling thread is available through
//! `cdk_last_error`. Measures cross the boundary as arrays of cell masses on
//! the grid of the space they are passed with.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cdknlab::cdcheck::{geometric_nprime_grid, uniform_t_grid, verify_cd, CdOptions};
use cdknlab::distortion::{sigma_kappa, tau_kn};
use cdknlab::ikrw::{extrinsic_gap, ikrw_fm};
use cdknlab::measure::{renyi_entropy, DiscreteMeasure};
use cdknlab::mmspace::{build_model_space, k_cut, total_mass, ModelSpec, PointedSpace1D};
use cdknlab::transport::{wc_distance, CostSpec};
use cdknlab::{Error, ExtendedReal};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidParams = 3,
    InvalidGrid = 4,
    DomainError = 5,
    NotAbsolutelyContinuous = 6,
    EmptyCut = 7,
    InfiniteMass = 8,
    Transport = 9,
    Mismatch = 10,
    Parse = 11,
    Io = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdkCostKind {
    W2 = 0,
    Tanh = 1,
    Cap1 = 2,
}

impl From<CdkCostKind> for CostSpec {
    fn from(c: CdkCostKind) -> CostSpec {
        match c {
            CdkCostKind::W2 => CostSpec::SquaredDistance,
            CdkCostKind::Tanh => CostSpec::TANH,
            CdkCostKind::Cap1 => CostSpec::CAP1,
        }
    }
}

/// Value in `[0, ∞]`; `value` is meaningful only when `is_infinite` is false.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdkExtReal {
    pub value: f64,
    pub is_infinite: bool,
}

impl From<ExtendedReal> for CdkExtReal {
    fn from(x: ExtendedReal) -> CdkExtReal {
        match x {
            ExtendedReal::Finite(v) => CdkExtReal { value: v, is_infinite: false },
            ExtendedReal::PositiveInfinity => CdkExtReal { value: f64::INFINITY, is_infinite: true },
        }
    }
}

/// Counts and worst normalized margin of one CD report.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdkCdSummary {
    pub min_margin: f64,
    pub worst_t: f64,
    pub worst_nprime: f64,
    pub n_ok: usize,
    pub n_violated: usize,
    pub n_vacuous: usize,
    pub n_skipped: usize,
    pub passes: bool,
}

/// Opaque discretized pointed space.
pub struct CdkSpace {
    inner: PointedSpace1D,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> CdkStatus {
    match e {
        Error::InvalidParams(_) | Error::InvalidTestFunction(_) | Error::SamplerEntropyViolation(_) => {
            CdkStatus::InvalidParams
        }
        Error::InvalidGrid(_) | Error::SingularPointOffGrid(_) | Error::NotRefinable | Error::GridMismatch => {
            CdkStatus::InvalidGrid
        }
        Error::DomainError(_) => CdkStatus::DomainError,
        Error::NotAbsolutelyContinuous { .. } | Error::SupportViolation { .. } => CdkStatus::NotAbsolutelyContinuous,
        Error::EmptyCut { .. } => CdkStatus::EmptyCut,
        Error::InfiniteMass => CdkStatus::InfiniteMass,
        Error::UnbalancedMasses(..)
        | Error::SizeCap { .. }
        | Error::GridTooCoarse(_)
        | Error::DegenerateJacobian(_)
        | Error::MarginalMismatch { .. } => CdkStatus::Transport,
        Error::MismatchedInputs(_) | Error::RegularityMismatch(_) | Error::MissingEntry(_) => CdkStatus::Mismatch,
        Error::Json(_) | Error::Csv(_) => CdkStatus::Parse,
        Error::Io(_) => CdkStatus::Io,
    }
}

struct Fail(CdkStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, records failures, and turns panics into `CdkStatus::Panic`.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> CdkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CdkStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CdkStatus::Panic
        }
    }
}

fn null() -> Fail {
    Fail(CdkStatus::NullPointer, "null pointer argument".into())
}

unsafe fn space_ref<'a>(s: *const CdkSpace) -> Result<&'a PointedSpace1D, Fail> {
    s.as_ref().map(|s| &s.inner).ok_or_else(null)
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(null)
}

unsafe fn measure(space: &PointedSpace1D, p: *const f64, len: usize) -> Result<DiscreteMeasure, Fail> {
    if len != space.len() {
        return Err(Fail(
            CdkStatus::Mismatch,
            format!("{len} masses for a space of {} cells", space.len()),
        ));
    }
    Ok(DiscreteMeasure::new(space.grid().clone(), slice(p, len)?.to_vec())?)
}

/// NUL-terminated library version.
#[no_mangle]
pub extern "C" fn cdk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cdk_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a model space from its JSON descriptor.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cdk_space_from_json(json: *const c_char, out_space: *mut *mut CdkSpace) -> CdkStatus {
    guard(|| {
        if json.is_null() {
            return Err(null());
        }
        let dst = out(out_space)?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(CdkStatus::InvalidUtf8, e.to_string()))?;
        let space = build_model_space(&ModelSpec::from_json(text)?)?;
        *dst = Box::into_raw(Box::new(CdkSpace { inner: space }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `space` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cdk_space_free(space: *mut CdkSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// # Safety
/// `space` must be a live handle; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cdk_space_cell_count(space: *const CdkSpace, count: *mut usize) -> CdkStatus {
    guard(|| {
        *out(count)? = space_ref(space)?.len();
        Ok(())
    })
}

/// Writes the cell centers; `len` must be at least the cell count.
///
/// # Safety
/// `space` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cdk_space_centers(space: *const CdkSpace, buf: *mut f64, len: usize) -> CdkStatus {
    guard(|| {
        let s = space_ref(space)?;
        if buf.is_null() {
            return Err(null());
        }
        if len < s.len() {
            return Err(Fail(CdkStatus::BufferTooSmall, format!("need {} doubles", s.len())));
        }
        let dst = std::slice::from_raw_parts_mut(buf, s.len());
        dst.copy_from_slice(&s.grid().centers());
        Ok(())
    })
}

/// Writes the cell masses of `𝔪` (`INFINITY` on cells touching the singular set).
///
/// # Safety
/// `space` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cdk_space_cell_masses(space: *const CdkSpace, buf: *mut f64, len: usize) -> CdkStatus {
    guard(|| {
        let s = space_ref(space)?;
        if buf.is_null() {
            return Err(null());
        }
        if len < s.len() {
            return Err(Fail(CdkStatus::BufferTooSmall, format!("need {} doubles", s.len())));
        }
        std::slice::from_raw_parts_mut(buf, s.len()).copy_from_slice(&s.cell_masses());
        Ok(())
    })
}

/// # Safety
/// `space` must be a live handle; `mass` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cdk_space_total_mass(space: *const CdkSpace, mass: *mut CdkExtReal) -> CdkStatus {
    guard(|| {
        *out(mass)? = total_mass(space_ref(space)?).into();
        Ok(())
    })
}

/// New handle holding the k-th cut of `space`.
///
/// # Safety
/// `space` must be a live handle; `cut` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cdk_space_k_cut(space: *const CdkSpace, k: i32, cut: *mut *mut CdkSpace) -> CdkStatus {
    guard(|| {
        let dst = out(cut)?;
        let c = k_cut(space_ref(space)?, k)?;
        *dst = Box::into_raw(Box::new(CdkSpace { inner: c }));
        Ok(())
    })
}

/// `σ_κ^{(t)}(θ)`.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cdk_sigma(kappa: f64, t: f64, theta: f64, value: *mut CdkExtReal) -> CdkStatus {
    guard(|| {
        *out(value)? = sigma_kappa(kappa, t, theta)?.into();
        Ok(())
    })
}

/// `τ_{K,N}^{(t)}(θ)`.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cdk_tau(k: f64, n: f64, t: f64, theta: f64, value: *mut CdkExtReal) -> CdkStatus {
    guard(|| {
        *out(value)? = tau_kn(k, n, t, theta)?.into();
        Ok(())
    })
}

/// `S_{N,𝔪}(μ)` for cell masses `mu` on the grid of `space`.
///
/// # Safety
/// `space` must be a live handle; `mu` must hold `len` doubles; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cdk_renyi_entropy(
    space: *const CdkSpace,
    mu: *const f64,
    len: usize,
    n: f64,
    value: *mut CdkExtReal,
) -> CdkStatus {
    guard(|| {
        let s = space_ref(space)?;
        let m = measure(s, mu, len)?;
        *out(value)? = renyi_entropy(&m, s, n)?.into();
        Ok(())
    })
}

/// `W_c(μ, ν)` between two mass vectors on the grid of `space`.
///
/// # Safety
/// `space` must be a live handle; `mu` and `nu` must hold `len` doubles; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cdk_wc_distance(
    space: *const CdkSpace,
    mu: *const f64,
    nu: *const f64,
    len: usize,
    cost: CdkCostKind,
    value: *mut f64,
) -> CdkStatus {
    guard(|| {
        let s = space_ref(space)?;
        let (a, b) = (measure(s, mu, len)?, measure(s, nu, len)?);
        *out(value)? = wc_distance(&a, &b, cost.into())?;
        Ok(())
    })
}

/// Runs the CD verifier for one marginal pair on `t_points` equally spaced times
/// and `nprime_points` geometric exponents in `[N, −1e-3]`.
///
/// # Safety
/// `space` must be a live handle; `mu0` and `mu1` must hold `len` doubles; `summary` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cdk_verify_cd(
    space: *const CdkSpace,
    mu0: *const f64,
    mu1: *const f64,
    len: usize,
    k: f64,
    n: f64,
    t_points: usize,
    nprime_points: usize,
    tolerance: f64,
    summary: *mut CdkCdSummary,
) -> CdkStatus {
    guard(|| {
        let s = space_ref(space)?;
        let dst = out(summary)?;
        let (a, b) = (measure(s, mu0, len)?, measure(s, mu1, len)?);
        let opts = CdOptions {
            t_grid: uniform_t_grid(t_points),
            nprime_grid: geometric_nprime_grid(n, nprime_points)?,
            restrict_to_regular_k: None,
            refine: 4,
            tolerance,
        };
        let r = verify_cd(s, &a, &b, k, n, &opts)?;
        *dst = CdkCdSummary {
            min_margin: r.summary.min_margin,
            worst_t: r.summary.worst_t,
            worst_nprime: r.summary.worst_nprime,
            n_ok: r.summary.n_ok,
            n_violated: r.summary.n_violated,
            n_vacuous: r.summary.n_vacuous,
            n_skipped: r.summary.n_skipped,
            passes: r.passes(),
        };
        Ok(())
    })
}

/// `d^fm` between two finite-mass spaces at the identity embedding.
///
/// # Safety
/// `a` and `b` must be live handles; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cdk_ikrw_fm(
    a: *const CdkSpace,
    b: *const CdkSpace,
    cost: CdkCostKind,
    value: *mut CdkExtReal,
) -> CdkStatus {
    guard(|| {
        *out(value)? = ikrw_fm(space_ref(a)?, space_ref(b)?, cost.into())?.into();
        Ok(())
    })
}

/// Extrinsic gap between the k-th cuts of two spaces.
///
/// # Safety
/// `a` and `b` must be live handles; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cdk_extrinsic_gap(
    a: *const CdkSpace,
    b: *const CdkSpace,
    k: i32,
    cost: CdkCostKind,
    value: *mut f64,
) -> CdkStatus {
    guard(|| {
        *out(value)? = extrinsic_gap(space_ref(a)?, space_ref(b)?, k, cost.into())?;
        Ok(())
    })
}
