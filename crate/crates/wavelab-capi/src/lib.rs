//! C ABI over the core spectral types: opaque handles, integer status codes,
//! and a thread-local last-error message.
//!
//! Conventions: every function returns `WlStatus` and writes results through
//! out-pointers; any non-`Ok` status leaves the out-pointers untouched and
//! stores a message retrievable with `wl_last_error_message`.  Handles are
//! created and released in pairs (`*_new`/`*_free`); passing a handle to a
//! free function twice, or using it afterwards, is undefined behaviour just
//! as with `free`.  All functions are callable from any thread; the error
//! message is per-thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use wavelab::galerkin::{self, EnergyTrace, GalerkinConfig, SolveOutput};
use wavelab::lp::{self, NormSpec};
use wavelab::propagator::{evolve_linear, WavePair};
use wavelab::randomization::{CoefficientDistribution, RandomizationSpec};
use wavelab::{Error, SpectralField, TorusGrid};

/// Status code of every ABI call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    GridMismatch = 4,
    SizeMismatch = 5,
    NotHermitian = 6,
    SingularSymbol = 7,
    NonFinite = 8,
    IllConditioned = 9,
    DegenerateFit = 10,
    Blowup = 11,
    MalformedCheckpoint = 12,
    Io = 13,
    Utf8 = 14,
    Panic = 15,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_message(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(err: &Error) -> WlStatus {
    set_message(&err.to_string());
    match err {
        Error::InvalidGrid(_) => WlStatus::InvalidGrid,
        Error::GridMismatch(_) => WlStatus::GridMismatch,
        Error::SizeMismatch { .. } => WlStatus::SizeMismatch,
        Error::NotHermitian { .. } => WlStatus::NotHermitian,
        Error::SingularSymbol { .. } => WlStatus::SingularSymbol,
        Error::NonFinite(_) => WlStatus::NonFinite,
        Error::InvalidArgument(_) => WlStatus::InvalidArgument,
        Error::IllConditioned(_) => WlStatus::IllConditioned,
        Error::DegenerateFit(_) => WlStatus::DegenerateFit,
        Error::Blowup { .. } => WlStatus::Blowup,
        Error::MalformedCheckpoint(_) => WlStatus::MalformedCheckpoint,
        Error::Io(_) => WlStatus::Io,
        Error::Json(_) => WlStatus::MalformedCheckpoint,
    }
}

fn null_arg(name: &str) -> WlStatus {
    set_message(&format!("null pointer passed for `{name}`"));
    WlStatus::NullPointer
}

/// Run a closure with a panic boundary; unwinding must never cross the ABI.
fn guarded(f: impl FnOnce() -> WlStatus) -> WlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_message("internal panic; state may be inconsistent");
            WlStatus::Panic
        }
    }
}

macro_rules! deref {
    ($ptr:ident) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => return null_arg(stringify!($ptr)),
        }
    };
}

macro_rules! out_slot {
    ($ptr:ident) => {
        match unsafe { $ptr.as_mut() } {
            Some(r) => r,
            None => return null_arg(stringify!($ptr)),
        }
    };
}

/// Opaque torus grid handle.
pub struct WlGrid {
    inner: TorusGrid,
}

/// Opaque spectral field handle.
pub struct WlField {
    inner: SpectralField,
}

/// Opaque energy trace handle.
pub struct WlTrace {
    inner: EnergyTrace,
}

/// Opaque solver output handle.
pub struct WlSolveOutput {
    inner: SolveOutput,
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len` bytes) and return the full length including the NUL.
/// `buf` may be null to query the length alone.
#[no_mangle]
pub extern "C" fn wl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                // always terminate, even when truncating
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len()
    })
}

/// Create a torus grid with `modes_per_axis` retained modes per axis in
/// `dimension` axes and an `oversample`-times finer physical grid.
#[no_mangle]
pub extern "C" fn wl_grid_new(
    dimension: usize,
    modes_per_axis: usize,
    oversample: usize,
    out: *mut *mut WlGrid,
) -> WlStatus {
    guarded(|| {
        let slot = out_slot!(out);
        match TorusGrid::new(dimension, modes_per_axis, oversample) {
            Ok(grid) => {
                *slot = Box::into_raw(Box::new(WlGrid { inner: grid }));
                WlStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a grid handle.  Null is a no-op.
#[no_mangle]
pub extern "C" fn wl_grid_free(grid: *mut WlGrid) {
    if !grid.is_null() {
        drop(unsafe { Box::from_raw(grid) });
    }
}

#[no_mangle]
pub extern "C" fn wl_grid_dimension(grid: *const WlGrid, out: *mut usize) -> WlStatus {
    let g = deref!(grid);
    let slot = out_slot!(out);
    *slot = g.inner.dim();
    WlStatus::Ok
}

#[no_mangle]
pub extern "C" fn wl_grid_modes_per_axis(grid: *const WlGrid, out: *mut usize) -> WlStatus {
    let g = deref!(grid);
    let slot = out_slot!(out);
    *slot = g.inner.modes_per_axis();
    WlStatus::Ok
}

/// Number of complex coefficients a field on this grid carries.
#[no_mangle]
pub extern "C" fn wl_grid_spectral_len(grid: *const WlGrid, out: *mut usize) -> WlStatus {
    let g = deref!(grid);
    let slot = out_slot!(out);
    *slot = g.inner.spectral_len();
    WlStatus::Ok
}

/// The zero field.
#[no_mangle]
pub extern "C" fn wl_field_zero(grid: *const WlGrid, out: *mut *mut WlField) -> WlStatus {
    guarded(|| {
        let g = deref!(grid);
        let slot = out_slot!(out);
        *slot = Box::into_raw(Box::new(WlField { inner: SpectralField::zero(g.inner) }));
        WlStatus::Ok
    })
}

/// The real harmonic `a e_n + conj(a) e_{-n}` at wavenumber
/// `(kx, ky, kz)` with `a = re + i im`; unused trailing axes must be 0.
#[no_mangle]
pub extern "C" fn wl_field_harmonic(
    grid: *const WlGrid,
    kx: i64,
    ky: i64,
    kz: i64,
    re: f64,
    im: f64,
    out: *mut *mut WlField,
) -> WlStatus {
    guarded(|| {
        let g = deref!(grid);
        let slot = out_slot!(out);
        match SpectralField::harmonic(g.inner, [kx, ky, kz], num_complex::Complex64::new(re, im)) {
            Ok(field) => {
                *slot = Box::into_raw(Box::new(WlField { inner: field }));
                WlStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Build a field from `2 * spectral_len` interleaved re/im values in
/// row-major wavenumber order; the coefficients must be Hermitian-symmetric.
#[no_mangle]
pub extern "C" fn wl_field_from_coeffs(
    grid: *const WlGrid,
    interleaved: *const f64,
    len: usize,
    out: *mut *mut WlField,
) -> WlStatus {
    guarded(|| {
        let g = deref!(grid);
        if interleaved.is_null() {
            return null_arg("interleaved");
        }
        let slot = out_slot!(out);
        let raw = unsafe { std::slice::from_raw_parts(interleaved, len) };
        if len != 2 * g.inner.spectral_len() {
            return fail(&Error::SizeMismatch { expected: 2 * g.inner.spectral_len(), got: len });
        }
        let coeffs = raw
            .chunks_exact(2)
            .map(|c| num_complex::Complex64::new(c[0], c[1]))
            .collect();
        match SpectralField::from_coeffs(g.inner, coeffs) {
            Ok(field) => {
                *slot = Box::into_raw(Box::new(WlField { inner: field }));
                WlStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Copy the coefficients out as interleaved re/im values; `len` must equal
/// `2 * spectral_len`.
#[no_mangle]
pub extern "C" fn wl_field_coeffs(field: *const WlField, buf: *mut f64, len: usize) -> WlStatus {
    guarded(|| {
        let f = deref!(field);
        if buf.is_null() {
            return null_arg("buf");
        }
        let expected = 2 * f.inner.grid().spectral_len();
        if len != expected {
            return fail(&Error::SizeMismatch { expected, got: len });
        }
        let out = unsafe { std::slice::from_raw_parts_mut(buf, len) };
        for (slot, c) in out.chunks_exact_mut(2).zip(f.inner.coeffs()) {
            slot[0] = c.re;
            slot[1] = c.im;
        }
        WlStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn wl_field_clone(field: *const WlField, out: *mut *mut WlField) -> WlStatus {
    guarded(|| {
        let f = deref!(field);
        let slot = out_slot!(out);
        *slot = Box::into_raw(Box::new(WlField { inner: f.inner.clone() }));
        WlStatus::Ok
    })
}

/// Release a field handle.  Null is a no-op.
#[no_mangle]
pub extern "C" fn wl_field_free(field: *mut WlField) {
    if !field.is_null() {
        drop(unsafe { Box::from_raw(field) });
    }
}

#[no_mangle]
pub extern "C" fn wl_field_l2_norm(field: *const WlField, out: *mut f64) -> WlStatus {
    guarded(|| {
        let f = deref!(field);
        let slot = out_slot!(out);
        *slot = f.inner.l2_norm();
        WlStatus::Ok
    })
}

/// `L^q` norm on the physical grid; `q` may be infinite.
#[no_mangle]
pub extern "C" fn wl_field_lebesgue_norm(field: *const WlField, q: f64, out: *mut f64) -> WlStatus {
    guarded(|| {
        let f = deref!(field);
        let slot = out_slot!(out);
        match f.inner.lebesgue_norm(q) {
            Ok(v) => {
                *slot = v;
                WlStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Besov norm `B^s_{p,r}`; pass `homogeneous != 0` to drop the mean mode.
#[no_mangle]
pub extern "C" fn wl_field_besov_norm(
    field: *const WlField,
    s: f64,
    p: f64,
    r: f64,
    homogeneous: i32,
    out: *mut f64,
) -> WlStatus {
    guarded(|| {
        let f = deref!(field);
        let slot = out_slot!(out);
        let spec = if homogeneous != 0 {
            NormSpec::homogeneous(s, p, r)
        } else {
            NormSpec::new(s, p, r)
        };
        match lp::besov_norm(&f.inner, &spec) {
            Ok(v) => {
                *slot = v;
                WlStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

fn path_from(ptr: *const c_char) -> Result<&'static str, WlStatus> {
    if ptr.is_null() {
        return Err(null_arg("path"));
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_message("path is not valid UTF-8");
        WlStatus::Utf8
    })
}

/// Save a field as a JSON checkpoint.
#[no_mangle]
pub extern "C" fn wl_field_save_json(field: *const WlField, path: *const c_char) -> WlStatus {
    guarded(|| {
        let f = deref!(field);
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match wavelab::io::save_field_json(&f.inner, path) {
            Ok(()) => WlStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Load a field from a JSON checkpoint.
#[no_mangle]
pub extern "C" fn wl_field_load_json(path: *const c_char, out: *mut *mut WlField) -> WlStatus {
    guarded(|| {
        let slot = out_slot!(out);
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match wavelab::io::load_field_json(path) {
            Ok(field) => {
                *slot = Box::into_raw(Box::new(WlField { inner: field }));
                WlStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Position component of the free wave flow at time `t` from `(u0, u1)`.
#[no_mangle]
pub extern "C" fn wl_evolve_linear(
    u0: *const WlField,
    u1: *const WlField,
    t: f64,
    out: *mut *mut WlField,
) -> WlStatus {
    guarded(|| {
        let a = deref!(u0);
        let b = deref!(u1);
        let slot = out_slot!(out);
        match WavePair::new(a.inner.clone(), b.inner.clone()) {
            Ok(pair) => {
                *slot = Box::into_raw(Box::new(WlField { inner: evolve_linear(&pair, t) }));
                WlStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Draw sample `sample_index` of the coefficient randomization of `(u0, u1)`.
/// `family`: 0 gaussian, 1 rademacher, 2 uniform.
#[no_mangle]
pub extern "C" fn wl_randomized_sample(
    u0: *const WlField,
    u1: *const WlField,
    family: i32,
    base_seed: u64,
    sample_index: u64,
    out_u0: *mut *mut WlField,
    out_u1: *mut *mut WlField,
) -> WlStatus {
    guarded(|| {
        let a = deref!(u0);
        let b = deref!(u1);
        let slot0 = out_slot!(out_u0);
        let slot1 = out_slot!(out_u1);
        let family = match family {
            0 => CoefficientDistribution::Gaussian,
            1 => CoefficientDistribution::Rademacher,
            2 => CoefficientDistribution::UniformSymmetric,
            other => {
                return fail(&Error::InvalidArgument(format!(
                    "unknown distribution family {other} (expected 0, 1, or 2)"
                )))
            }
        };
        match RandomizationSpec::new(a.inner.clone(), b.inner.clone(), family, base_seed) {
            Ok(spec) => {
                let (ru0, ru1) = spec.sample(sample_index);
                *slot0 = Box::into_raw(Box::new(WlField { inner: ru0 }));
                *slot1 = Box::into_raw(Box::new(WlField { inner: ru1 }));
                WlStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Solve the regularized equation directly from `(u0, u1)`.  A guard trip is
/// reported as `Blowup` and leaves no output.
#[no_mangle]
pub extern "C" fn wl_solve_direct(
    grid: *const WlGrid,
    p: f64,
    cutoff_j: usize,
    dt: f64,
    t_end: f64,
    blowup_guard: f64,
    u0: *const WlField,
    u1: *const WlField,
    out: *mut *mut WlSolveOutput,
) -> WlStatus {
    guarded(|| {
        let g = deref!(grid);
        let a = deref!(u0);
        let b = deref!(u1);
        let slot = out_slot!(out);
        let config = GalerkinConfig {
            grid: g.inner,
            p,
            cutoff_j,
            dt,
            t_end,
            blowup_guard,
            snapshot_every: 0,
            nonlinearity: true,
        };
        let pair = match WavePair::new(a.inner.clone(), b.inner.clone()) {
            Ok(pair) => pair,
            Err(e) => return fail(&e),
        };
        match galerkin::solve_regularized_direct(&config, &pair) {
            Ok(output) => match output.termination {
                galerkin::Termination::Completed => {
                    *slot = Box::into_raw(Box::new(WlSolveOutput { inner: output }));
                    WlStatus::Ok
                }
                galerkin::Termination::BlowupGuard { step, t, jump } => {
                    fail(&Error::Blowup { step, t, jump })
                }
            },
            Err(e) => fail(&e),
        }
    })
}

/// Release a solver output handle.  Null is a no-op.
#[no_mangle]
pub extern "C" fn wl_solve_output_free(output: *mut WlSolveOutput) {
    if !output.is_null() {
        drop(unsafe { Box::from_raw(output) });
    }
}

/// Clone the final `(position, velocity)` state out of a solve.
#[no_mangle]
pub extern "C" fn wl_solve_output_final_state(
    output: *const WlSolveOutput,
    out_u: *mut *mut WlField,
    out_ut: *mut *mut WlField,
) -> WlStatus {
    guarded(|| {
        let o = deref!(output);
        let slot_u = out_slot!(out_u);
        let slot_ut = out_slot!(out_ut);
        let state = o.inner.final_state();
        *slot_u = Box::into_raw(Box::new(WlField { inner: state.v.clone() }));
        *slot_ut = Box::into_raw(Box::new(WlField { inner: state.w.clone() }));
        WlStatus::Ok
    })
}

/// Clone the energy trace out of a solve.
#[no_mangle]
pub extern "C" fn wl_solve_output_trace(
    output: *const WlSolveOutput,
    out: *mut *mut WlTrace,
) -> WlStatus {
    guarded(|| {
        let o = deref!(output);
        let slot = out_slot!(out);
        *slot = Box::into_raw(Box::new(WlTrace { inner: o.inner.trace.clone() }));
        WlStatus::Ok
    })
}

/// Release a trace handle.  Null is a no-op.
#[no_mangle]
pub extern "C" fn wl_trace_free(trace: *mut WlTrace) {
    if !trace.is_null() {
        drop(unsafe { Box::from_raw(trace) });
    }
}

#[no_mangle]
pub extern "C" fn wl_trace_len(trace: *const WlTrace, out: *mut usize) -> WlStatus {
    let t = deref!(trace);
    let slot = out_slot!(out);
    *slot = t.inner.times.len();
    WlStatus::Ok
}

/// One trace row: `(t, kinetic, gradient, potential, l2, linf)`.
#[no_mangle]
pub extern "C" fn wl_trace_row(
    trace: *const WlTrace,
    index: usize,
    out_t: *mut f64,
    out_kinetic: *mut f64,
    out_gradient: *mut f64,
    out_potential: *mut f64,
    out_l2: *mut f64,
    out_linf: *mut f64,
) -> WlStatus {
    guarded(|| {
        let t = deref!(trace);
        if index >= t.inner.times.len() {
            return fail(&Error::InvalidArgument(format!(
                "trace row {index} out of range (len {})",
                t.inner.times.len()
            )));
        }
        for (ptr, value) in [
            (out_t, t.inner.times[index]),
            (out_kinetic, t.inner.kinetic[index]),
            (out_gradient, t.inner.gradient[index]),
            (out_potential, t.inner.potential[index]),
            (out_l2, t.inner.l2[index]),
            (out_linf, t.inner.linf[index]),
        ] {
            let slot = match unsafe { ptr.as_mut() } {
                Some(r) => r,
                None => return null_arg("trace row out pointer"),
            };
            *slot = value;
        }
        WlStatus::Ok
    })
}

/// Largest relative deviation of the total energy from its initial value.
#[no_mangle]
pub extern "C" fn wl_trace_relative_drift(trace: *const WlTrace, out: *mut f64) -> WlStatus {
    let t = deref!(trace);
    let slot = out_slot!(out);
    *slot = t.inner.relative_drift();
    WlStatus::Ok
}

/// Critical Sobolev index `s_p = (p - 3) / (p - 1)` of the cubic-range
/// classification.
#[no_mangle]
pub extern "C" fn wl_critical_index(p: f64, out: *mut f64) -> WlStatus {
    guarded(|| {
        let slot = out_slot!(out);
        match wavelab::yudovich::critical_index(p) {
            Ok(v) => {
                *slot = v;
                WlStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
