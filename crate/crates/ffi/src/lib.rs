//! C ABI over `qudit-rabi`.
//!
//! Every function returns a `QrStatus`; results go through out-pointers.
//! On failure the message is kept per thread and read back with
//! `qr_last_error_message`. Handles are opaque and freed with their
//! `_free` function; freeing NULL is a no-op.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64 as C64;
use qudit_rabi::coherent::matelem;
use qudit_rabi::gates::{controlled_shift_target, elementary_count, ControlWire};
use qudit_rabi::model::ModelConfig;
use qudit_rabi::rwa::{
    channel_enumerate, integrate_reduced, linear_grid, rabi_frequency, resonance_solve, rwa_two_level_evolve, theta,
    IntegratorOptions, ReducedMode, Trajectory,
};
use qudit_rabi::{AlgebraSpec, Error, StateVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Range = 3,
    Dimension = 4,
    IndexOutOfRange = 5,
    Tolerance = 6,
    Config = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrAlgebraKind {
    Oscillator = 0,
    Su11 = 1,
    Su2 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrReducedMode {
    FullTerms = 0,
    RwaOnly = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrControlWire {
    Lower = 0,
    Upper = 1,
}

/// Opaque model configuration.
pub struct QrModel {
    cfg: ModelConfig,
}

/// Opaque integration result.
pub struct QrTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> QrStatus {
    match err {
        Error::Domain(_) => QrStatus::Domain,
        Error::Range(_) => QrStatus::Range,
        Error::Dimension(_) => QrStatus::Dimension,
        Error::IndexOutOfRange { .. } => QrStatus::IndexOutOfRange,
        Error::Tolerance { .. } => QrStatus::Tolerance,
        Error::Config(_) => QrStatus::Config,
    }
}

struct Fail(QrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(QrStatus::NullPointer, format!("{name} is NULL"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            QrStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QrStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn model<'a>(p: *const QrModel) -> Result<&'a ModelConfig, Fail> {
    p.as_ref().map(|m| &m.cfg).ok_or_else(|| null("model"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn algebra(kind: QrAlgebraKind, param: f64) -> Result<AlgebraSpec, Fail> {
    Ok(match kind {
        QrAlgebraKind::Oscillator => AlgebraSpec::Oscillator,
        QrAlgebraKind::Su11 => AlgebraSpec::su11(param / 2.0)?,
        QrAlgebraKind::Su2 => {
            if !(param >= 1.0 && param.fract() == 0.0 && param <= u32::MAX as f64) {
                return Err(Fail(QrStatus::Domain, format!("2J must be a positive integer, got {param}")));
            }
            AlgebraSpec::su2(param as u32)?
        }
    })
}

/// Copies the last error message of this thread, NUL-terminated, into
/// `buf` (truncating to `len - 1` bytes). Returns the full message length.
#[no_mangle]
pub unsafe extern "C" fn qr_last_error_message(buf: *mut c_char, len: usize) -> usize {
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

/// Creates a model. `param` is `2K` for su(1,1), `2J` for su(2), unused for
/// the oscillator.
#[no_mangle]
pub unsafe extern "C" fn qr_model_new(
    n: usize,
    kind: QrAlgebraKind,
    param: f64,
    omega: f64,
    g: f64,
    delta_abs: f64,
    delta_phase: f64,
    trunc_dim: usize,
    out_model: *mut *mut QrModel,
) -> QrStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        let cfg = ModelConfig::new(n, algebra(kind, param)?, omega, g, delta_abs, delta_phase, trunc_dim)?;
        *slot = Box::into_raw(Box::new(QrModel { cfg }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qr_model_free(model: *mut QrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Copy of `model` with `|D|` replaced.
#[no_mangle]
pub unsafe extern "C" fn qr_model_with_delta_abs(
    src: *const QrModel,
    delta_abs: f64,
    out_model: *mut *mut QrModel,
) -> QrStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        let cfg = model(src)?.with_delta_abs(delta_abs);
        cfg.validate()?;
        *slot = Box::into_raw(Box::new(QrModel { cfg }));
        Ok(())
    })
}

/// `<n| D(z) |m>` from the closed forms.
#[no_mangle]
pub unsafe extern "C" fn qr_matelem(
    kind: QrAlgebraKind,
    param: f64,
    n: u32,
    m: u32,
    z_re: f64,
    z_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> QrStatus {
    guard(|| {
        let (re, im) = (out(out_re, "out_re")?, out(out_im, "out_im")?);
        let v = matelem(algebra(kind, param)?, n, m, C64::new(z_re, z_im))?;
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qr_theta(model_: *const QrModel, m: usize, j: usize, out_value: *mut f64) -> QrStatus {
    guard(|| {
        let o = out(out_value, "out_value")?;
        *o = theta(model(model_)?, m, j)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qr_rabi_frequency(
    model_: *const QrModel,
    m: usize,
    r: usize,
    j: usize,
    j_prime: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> QrStatus {
    guard(|| {
        let (re, im) = (out(out_re, "out_re")?, out(out_im, "out_im")?);
        let v = rabi_frequency(model(model_)?, m, r, j, j_prime)?;
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

/// Resonant `|D|`; `*out_found` is 0 when there is no positive solution.
#[no_mangle]
pub unsafe extern "C" fn qr_resonance_solve(
    model_: *const QrModel,
    m: usize,
    r: usize,
    j: usize,
    j_prime: usize,
    out_found: *mut i32,
    out_delta_abs: *mut f64,
    out_residual: *mut f64,
) -> QrStatus {
    guard(|| {
        let found = out(out_found, "out_found")?;
        let delta = out(out_delta_abs, "out_delta_abs")?;
        let residual = out(out_residual, "out_residual")?;
        match resonance_solve(model(model_)?, m, r, j, j_prime)? {
            Some(sol) => {
                *found = 1;
                *delta = sol.delta_abs;
                *residual = sol.residual;
            }
            None => {
                *found = 0;
                *delta = f64::NAN;
                *residual = f64::NAN;
            }
        }
        Ok(())
    })
}

/// Writes the `n` channels as `(j', j)` pairs into `out_pairs[2n]`.
#[no_mangle]
pub unsafe extern "C" fn qr_channel_enumerate(
    n: usize,
    m: usize,
    r: usize,
    out_pairs: *mut usize,
    capacity: usize,
) -> QrStatus {
    guard(|| {
        if n < 2 || m >= r {
            return Err(Fail(QrStatus::Domain, format!("need n >= 2 and m < r, got n = {n}, m = {m}, r = {r}")));
        }
        if capacity < 2 * n {
            return Err(Fail(QrStatus::BufferTooSmall, format!("need {} entries, got {capacity}", 2 * n)));
        }
        let buf = slice_mut(out_pairs, 2 * n, "out_pairs")?;
        for (i, (jp, j)) in channel_enumerate(n, m, r).into_iter().enumerate() {
            buf[2 * i] = jp;
            buf[2 * i + 1] = j;
        }
        Ok(())
    })
}

/// `a0` and `out_a` hold `(re, im)` of the two amplitudes.
#[no_mangle]
pub unsafe extern "C" fn qr_rwa_two_level_evolve(
    rabi_re: f64,
    rabi_im: f64,
    t: f64,
    a0: *const f64,
    out_a: *mut f64,
) -> QrStatus {
    guard(|| {
        let a = slice(a0, 4, "a0")?;
        let res = rwa_two_level_evolve(C64::new(rabi_re, rabi_im), t, [C64::new(a[0], a[1]), C64::new(a[2], a[3])]);
        let o = slice_mut(out_a, 4, "out_a")?;
        o.copy_from_slice(&[res[0].re, res[0].im, res[1].re, res[1].im]);
        Ok(())
    })
}

/// Integrates the reduced equations on `steps` equal intervals of
/// `[t_start, t_stop]`. `a0` holds `n * n_levels` amplitudes as `(re, im)`.
#[no_mangle]
pub unsafe extern "C" fn qr_integrate_reduced(
    model_: *const QrModel,
    levels: *const usize,
    n_levels: usize,
    t_start: f64,
    t_stop: f64,
    steps: usize,
    a0: *const f64,
    mode: QrReducedMode,
    tol: f64,
    out_trajectory: *mut *mut QrTrajectory,
) -> QrStatus {
    guard(|| {
        let slot = out(out_trajectory, "out_trajectory")?;
        *slot = ptr::null_mut();
        let cfg = model(model_)?;
        let levels = slice(levels, n_levels, "levels")?;
        let width = cfg.n * n_levels;
        let raw = slice(a0, 2 * width, "a0")?;
        let a0: StateVector = raw.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        if steps == 0 {
            return Err(Fail(QrStatus::Domain, "steps must be positive".into()));
        }
        let mode = match mode {
            QrReducedMode::FullTerms => ReducedMode::FullTerms,
            QrReducedMode::RwaOnly => ReducedMode::RwaOnly,
        };
        let opts = IntegratorOptions { tol, ..Default::default() };
        let inner = integrate_reduced(cfg, levels, &linear_grid(t_start, t_stop, steps), &a0, mode, opts)?;
        *slot = Box::into_raw(Box::new(QrTrajectory { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qr_trajectory_free(trajectory: *mut QrTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// Number of time points and amplitudes per point.
#[no_mangle]
pub unsafe extern "C" fn qr_trajectory_shape(
    trajectory: *const QrTrajectory,
    out_times: *mut usize,
    out_width: *mut usize,
) -> QrStatus {
    guard(|| {
        let t = &trajectory.as_ref().ok_or_else(|| null("trajectory"))?.inner;
        *out(out_times, "out_times")? = t.times.len();
        *out(out_width, "out_width")? = t.labels.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qr_trajectory_norm_drift(trajectory: *const QrTrajectory, out_value: *mut f64) -> QrStatus {
    guard(|| {
        let t = &trajectory.as_ref().ok_or_else(|| null("trajectory"))?.inner;
        *out(out_value, "out_value")? = t.norm_drift;
        Ok(())
    })
}

/// Time and amplitudes (`(re, im)` pairs, `2 * width` doubles) at `index`.
#[no_mangle]
pub unsafe extern "C" fn qr_trajectory_point(
    trajectory: *const QrTrajectory,
    index: usize,
    out_time: *mut f64,
    out_amplitudes: *mut f64,
    capacity: usize,
) -> QrStatus {
    guard(|| {
        let t = &trajectory.as_ref().ok_or_else(|| null("trajectory"))?.inner;
        if index >= t.times.len() {
            return Err(Error::IndexOutOfRange { index, max: t.times.len() - 1 }.into());
        }
        let width = t.labels.len();
        if capacity < 2 * width {
            return Err(Fail(QrStatus::BufferTooSmall, format!("need {} doubles, got {capacity}", 2 * width)));
        }
        *out(out_time, "out_time")? = t.times[index];
        let buf = slice_mut(out_amplitudes, 2 * width, "out_amplitudes")?;
        for (i, z) in t.amplitudes[index].iter().enumerate() {
            buf[2 * i] = z.re;
            buf[2 * i + 1] = z.im;
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn qr_elementary_count(n: usize) -> usize {
    elementary_count(n)
}

/// Row-major real `n^2 x n^2` permutation matrix of the controlled shift.
#[no_mangle]
pub unsafe extern "C" fn qr_controlled_shift_target(
    n: usize,
    control: QrControlWire,
    out_matrix: *mut f64,
    capacity: usize,
) -> QrStatus {
    guard(|| {
        if n < 2 {
            return Err(Fail(QrStatus::Domain, format!("need n >= 2, got {n}")));
        }
        let dim = n * n;
        if capacity < dim * dim {
            return Err(Fail(QrStatus::BufferTooSmall, format!("need {} doubles, got {capacity}", dim * dim)));
        }
        let wire = match control {
            QrControlWire::Lower => ControlWire::Lower,
            QrControlWire::Upper => ControlWire::Upper,
        };
        let m = controlled_shift_target(n, wire);
        let buf = slice_mut(out_matrix, dim * dim, "out_matrix")?;
        for (dst, src) in buf.iter_mut().zip(m.to_row_major()) {
            *dst = src.re;
        }
        Ok(())
    })
}
