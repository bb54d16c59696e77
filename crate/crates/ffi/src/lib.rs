//! C ABI over the starcyl numerics.
//!
//! Every fallible call returns a [`StarcylStatus`]; on failure the message is kept per thread and
//! read back with [`starcyl_last_error`]. Handles are opaque and owned by the caller, who releases
//! them with the matching `_free` function. Complex arrays are interleaved `re, im` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use starcyl::cli::{run_experiment, CliError, Config};
use starcyl::clifford::build_gammas;
use starcyl::fourier::{FourierFunction, Geometry, Signature};
use starcyl::star::{involution, star_cylinder, DeformationParams};
use starcyl::Complex64;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StarcylStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Panic = 5,
}

/// A function on the cylinder ℝ × 𝕋, stored by its Fourier coefficients.
pub struct StarcylFunction(FourierFunction);

/// Experiment configuration; starts from the shipped defaults.
pub struct StarcylConfig(Config);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (StarcylStatus, String);

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> StarcylStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StarcylStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            StarcylStatus::Panic
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    (StarcylStatus::InvalidArgument, e.to_string())
}

fn numerical(e: impl std::fmt::Display) -> Failure {
    (StarcylStatus::Numerical, e.to_string())
}

fn null(what: &str) -> Failure {
    (StarcylStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

fn cylinder(box_length: f64, grid_x: usize, grid_t: usize) -> Result<Geometry, Failure> {
    Geometry::with_grid(1, 1, box_length, vec![grid_x, grid_t], Signature::Euclidean)
        .map_err(invalid)
}

fn boxed<T>(out: *mut *mut T, v: T) {
    // callers check `out` before doing any work
    unsafe { *out = Box::into_raw(Box::new(v)) };
}

/// Message of the last failed call on this thread, or NULL. Valid until the next failure.
#[no_mangle]
pub extern "C" fn starcyl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Number of Fourier modes of a cylinder grid `grid_x × grid_t`.
///
/// # Safety
/// `out` must be a valid pointer to writable memory.
#[no_mangle]
pub unsafe extern "C" fn starcyl_cylinder_modes(
    box_length: f64,
    grid_x: usize,
    grid_t: usize,
    out: *mut usize,
) -> StarcylStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = cylinder(box_length, grid_x, grid_t)?.modes().len();
        Ok(())
    })
}

/// Builds a function from `n_modes` interleaved coefficients, ordered by label with the circle
/// index fastest and each axis running from `-cutoff` to `cutoff`.
///
/// # Safety
/// `coeffs` must point to `2 * n_modes` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn starcyl_function_new(
    box_length: f64,
    grid_x: usize,
    grid_t: usize,
    coeffs: *const f64,
    n_modes: usize,
    out: *mut *mut StarcylFunction,
) -> StarcylStatus {
    guard(|| {
        if coeffs.is_null() {
            return Err(null("coeffs"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let g = cylinder(box_length, grid_x, grid_t)?;
        let raw = std::slice::from_raw_parts(coeffs, 2 * n_modes);
        let c = raw
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        boxed(
            out,
            StarcylFunction(FourierFunction::new(g, c).map_err(invalid)?),
        );
        Ok(())
    })
}

/// Copies the coefficients of `f` into `out` (`2 * n_modes` doubles).
///
/// # Safety
/// `f` must be a live handle; `out` must point to `2 * n_modes` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn starcyl_function_coeffs(
    f: *const StarcylFunction,
    out: *mut f64,
    n_modes: usize,
) -> StarcylStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("f"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = f.0.coeffs();
        if c.len() != n_modes {
            return Err(invalid(format!(
                "function has {} modes, buffer holds {n_modes}",
                c.len()
            )));
        }
        let dst = std::slice::from_raw_parts_mut(out, 2 * n_modes);
        for (d, z) in dst.chunks_exact_mut(2).zip(c) {
            d[0] = z.re;
            d[1] = z.im;
        }
        Ok(())
    })
}

/// # Safety
/// `f` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn starcyl_function_free(f: *mut StarcylFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Deformed product `a ⋆ b` at deformation parameter `hbar`.
///
/// # Safety
/// `a`, `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn starcyl_star_product(
    a: *const StarcylFunction,
    b: *const StarcylFunction,
    hbar: f64,
    out: *mut *mut StarcylFunction,
) -> StarcylStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !hbar.is_finite() {
            return Err(invalid("hbar must be finite"));
        }
        let p =
            star_cylinder(&a.0, &b.0, &DeformationParams::cylinder(hbar, 1)).map_err(numerical)?;
        boxed(out, StarcylFunction(p));
        Ok(())
    })
}

/// # Safety
/// `a` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn starcyl_involution(
    a: *const StarcylFunction,
    out: *mut *mut StarcylFunction,
) -> StarcylStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        boxed(out, StarcylFunction(involution(&a.0)));
        Ok(())
    })
}

/// Largest deviation of `{γ_a, γ_b}` from `2η_ab` for signature `(p, q)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn starcyl_clifford_residual(
    p: usize,
    q: usize,
    out: *mut f64,
) -> StarcylStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = build_gammas(p, q)
            .map_err(invalid)?
            .anticommutator_residual();
        Ok(())
    })
}

/// Loads a config file, or the defaults when `path` is NULL.
///
/// # Safety
/// `path` must be NULL or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn starcyl_config_new(
    path: *const c_char,
    out: *mut *mut StarcylConfig,
) -> StarcylStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = if path.is_null() {
            Config::default()
        } else {
            Config::load(Path::new(text(path, "path")?)).map_err(invalid)?
        };
        boxed(out, StarcylConfig(cfg));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn starcyl_config_set(
    cfg: *mut StarcylConfig,
    key: *const c_char,
    value: *const c_char,
) -> StarcylStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0
            .set(text(key, "key")?, text(value, "value")?)
            .map_err(invalid)
    })
}

/// # Safety
/// `cfg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn starcyl_config_free(cfg: *mut StarcylConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs one experiment. `passed` receives the overall verdict; when `report_json` is not NULL it
/// receives the report as JSON, to be released with [`starcyl_string_free`].
///
/// # Safety
/// `cfg` must be a live handle, `name` a NUL-terminated string, `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn starcyl_run_experiment(
    cfg: *const StarcylConfig,
    name: *const c_char,
    passed: *mut bool,
    report_json: *mut *mut c_char,
) -> StarcylStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let name = text(name, "name")?;
        if passed.is_null() {
            return Err(null("passed"));
        }
        let report = run_experiment(name, &cfg.0).map_err(|e| match e {
            CliError::Config(_) | CliError::UnknownExperiment(_) => invalid(e),
            CliError::Report(_) | CliError::Io { .. } => (StarcylStatus::Io, e.to_string()),
            _ => numerical(e),
        })?;
        *passed = report.passed();
        if !report_json.is_null() {
            let json = serde_json::to_string(&report).map_err(numerical)?;
            *report_json = CString::new(json).map_err(numerical)?.into_raw();
        }
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn starcyl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
