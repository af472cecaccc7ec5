//! C ABI over the vessel1d solver.
//!
//! Every entry point returns a [`V1dStatus`]. On failure the message is kept
//! per thread and can be copied out with [`v1d_last_error_message`]. Handles
//! are opaque and released with their `_free` function; passing NULL to a
//! `_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vessel1d::dg::Solver;
use vessel1d::harness::RunConfig;
use vessel1d::postprocess::coriolis_integral;
use vessel1d::{Severity, VesselGeometry};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V1dStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    Postprocess = 5,
    Panic = 6,
}

/// Reference geometry handle.
pub struct V1dGeometry(VesselGeometry);

/// Solver handle; owns its geometry and state.
pub struct V1dSolver(Solver);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: V1dStatus, msg: impl Into<String>) -> V1dStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> V1dStatus) -> V1dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(V1dStatus::Panic, format!("panic: {msg}"))
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(V1dStatus::NullPointer, concat!("`", stringify!($p), "` is NULL"));
        })+
    };
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap` bytes). Returns the buffer size needed for the full
/// message including the terminator; 1 when there is no error.
///
/// # Safety
/// `buf` must be NULL or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn v1d_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn v1d_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Benchmark stenosis of `severity` percent (23, 40 or 50).
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn v1d_geometry_stenosis(
    severity: u32,
    r_max: f64,
    r_min: f64,
    out: *mut *mut V1dGeometry,
) -> V1dStatus {
    guard(|| {
        non_null!(out);
        let sev = match Severity::try_from(severity) {
            Ok(s) => s,
            Err(e) => return fail(V1dStatus::InvalidArgument, e),
        };
        match VesselGeometry::stenosis(sev, r_max, r_min) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(V1dGeometry(g)));
                V1dStatus::Ok
            }
            Err(e) => fail(V1dStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn v1d_geometry_straight(length: f64, radius: f64, out: *mut *mut V1dGeometry) -> V1dStatus {
    guard(|| {
        non_null!(out);
        match VesselGeometry::straight(length, radius) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(V1dGeometry(g)));
                V1dStatus::Ok
            }
            Err(e) => fail(V1dStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Reference radius and its first two derivatives at `z`.
///
/// # Safety
/// `geometry` must come from a `v1d_geometry_*` constructor; the outputs
/// must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn v1d_geometry_radius(
    geometry: *const V1dGeometry,
    z: f64,
    r0: *mut f64,
    dr0_dz: *mut f64,
    d2r0_dz2: *mut f64,
) -> V1dStatus {
    guard(|| {
        non_null!(geometry, r0, dr0_dz, d2r0_dz2);
        match (*geometry).0.derivatives_at(z) {
            Ok(d) => {
                *r0 = d.r0;
                *dr0_dz = d.dr0_dz;
                *d2r0_dz2 = d.d2r0_dz2;
                V1dStatus::Ok
            }
            Err(e) => fail(V1dStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `geometry` must be NULL or come from a `v1d_geometry_*` constructor and
/// not have been freed.
#[no_mangle]
pub unsafe extern "C" fn v1d_geometry_free(geometry: *mut V1dGeometry) {
    if !geometry.is_null() {
        drop(Box::from_raw(geometry));
    }
}

/// Builds a solver from TOML run-configuration text (same keys as the CLI).
///
/// # Safety
/// `config_toml` must be a NUL-terminated UTF-8 string; `out` must be valid
/// for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn v1d_solver_new(config_toml: *const c_char, out: *mut *mut V1dSolver) -> V1dStatus {
    guard(|| {
        non_null!(config_toml, out);
        let text = match CStr::from_ptr(config_toml).to_str() {
            Ok(t) => t,
            Err(e) => return fail(V1dStatus::InvalidArgument, format!("config is not UTF-8: {e}")),
        };
        let cfg = match RunConfig::from_toml_str(text, None) {
            Ok(c) => c,
            Err(e) => return fail(V1dStatus::Config, e.to_string()),
        };
        let geometry = match cfg.geometry() {
            Ok(g) => g,
            Err(e) => return fail(V1dStatus::Config, e.to_string()),
        };
        match Solver::new(&geometry, cfg.physics, cfg.boundary, cfg.solver, cfg.initial) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(V1dSolver(s)));
                V1dStatus::Ok
            }
            Err(e) => fail(V1dStatus::Solver, e.to_string()),
        }
    })
}

/// Advances up to `max_steps` CFL-limited steps, never past `t_stop`.
/// `taken` receives the number of steps actually taken.
///
/// # Safety
/// `solver` must come from [`v1d_solver_new`]; `taken` must be NULL or
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn v1d_solver_advance(
    solver: *mut V1dSolver,
    t_stop: f64,
    max_steps: usize,
    taken: *mut usize,
) -> V1dStatus {
    guard(|| {
        non_null!(solver);
        let s = &mut (*solver).0;
        let mut n = 0;
        let status = loop {
            let remaining = t_stop - s.time();
            if n == max_steps || remaining <= 1e-14 * t_stop.abs().max(1.0) {
                break V1dStatus::Ok;
            }
            let dt = match s.stable_dt() {
                Ok(dt) => dt.min(remaining),
                Err(e) => break fail(V1dStatus::Solver, e.to_string()),
            };
            if let Err(e) = s.step(dt) {
                break fail(V1dStatus::Solver, e.to_string());
            }
            n += 1;
        };
        if !taken.is_null() {
            *taken = n;
        }
        status
    })
}

/// Current time, step count and steady residual.
///
/// # Safety
/// `solver` must come from [`v1d_solver_new`]; each output must be NULL or
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn v1d_solver_status(
    solver: *const V1dSolver,
    time: *mut f64,
    steps: *mut usize,
    residual: *mut f64,
) -> V1dStatus {
    guard(|| {
        non_null!(solver);
        let s = &(*solver).0;
        if !time.is_null() {
            *time = s.time();
        }
        if !steps.is_null() {
            *steps = s.steps();
        }
        if !residual.is_null() {
            *residual = s.last_residual();
        }
        V1dStatus::Ok
    })
}

/// Samples the solution on `n >= 2` uniform points including both ends.
/// Any output array may be NULL; the others must hold `n` doubles.
///
/// # Safety
/// `solver` must come from [`v1d_solver_new`]; non-NULL arrays must be valid
/// for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn v1d_solver_sample(
    solver: *const V1dSolver,
    n: usize,
    z: *mut f64,
    a: *mut f64,
    q: *mut f64,
    u: *mut f64,
    p: *mut f64,
) -> V1dStatus {
    guard(|| {
        non_null!(solver);
        if n < 2 {
            return fail(V1dStatus::InvalidArgument, "need at least 2 sample points");
        }
        let rec = match (*solver).0.sample_at(n) {
            Ok(r) => r,
            Err(e) => return fail(V1dStatus::Solver, e.to_string()),
        };
        for (dst, src) in [(z, &rec.z), (a, &rec.a), (q, &rec.q), (u, &rec.u), (p, &rec.p)] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, n);
            }
        }
        V1dStatus::Ok
    })
}

/// # Safety
/// `solver` must be NULL or come from [`v1d_solver_new`] and not have been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn v1d_solver_free(solver: *mut V1dSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// `(2 / (R^2 U^2)) * int_0^R r u_z^2 dr` for the gamma profile.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn v1d_coriolis_integral(gamma: f64, out: *mut f64) -> V1dStatus {
    guard(|| {
        non_null!(out);
        if !(gamma > 0.0 && gamma.is_finite()) {
            return fail(V1dStatus::InvalidArgument, "gamma must be positive and finite");
        }
        match coriolis_integral(gamma, 64) {
            Ok(v) => {
                *out = v;
                V1dStatus::Ok
            }
            Err(e) => fail(V1dStatus::Postprocess, e.to_string()),
        }
    })
}
