//! C ABI over `qflip`.
//!
//! Objects cross the boundary as opaque handles created by `qflip_*_new`,
//! `qflip_*_load` or a design function and released with the matching
//! `qflip_*_free`. Every fallible function returns a [`QflipStatus`]; on
//! failure `qflip_last_error_message` describes the most recent error on the
//! calling thread. Panics are caught and reported as `QFLIP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use qflip::dynamics::{evolve, flip_probability, ErrorModel, PulseSequence, PulseStep, QubitState};
use qflip::ppo::{load_checkpoint, PolicyNetwork};
use qflip::rl_env::{nominal_sequence, EnvConfig};
use qflip::sta::{self, ErrorChannel};
use qflip::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QflipStatus {
    Ok = 0,
    InvalidArgument = 1,
    Numerical = 2,
    Io = 3,
    NullPointer = 4,
    Panic = 5,
}

/// Error channel targeted by an STA design.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QflipChannel {
    Detuning = 0,
    Rabi = 1,
}

/// Environment shape used to roll out a policy.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QflipEnvParams {
    /// Rabi frequency (rad/s).
    pub omega: f64,
    /// Program duration (s).
    pub total_time: f64,
    /// Detuning range half-width (rad/s).
    pub delta_max: f64,
    pub n_steps: usize,
}

/// Opaque piecewise-constant detuning program.
pub struct QflipSequence(PulseSequence);

/// Opaque trained policy.
pub struct QflipPolicy(PolicyNetwork);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QflipStatus {
    match e.exit_code() {
        2 => QflipStatus::Numerical,
        3 => QflipStatus::Io,
        _ => QflipStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (QflipStatus, String)>) -> QflipStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QflipStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            QflipStatus::Panic
        }
    }
}

fn lib<T>(r: qflip::Result<T>) -> Result<T, (QflipStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (QflipStatus, String) {
    (QflipStatus::NullPointer, format!("{name} is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (QflipStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), (QflipStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qflip_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qflip_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Defaults of the hybrid-error environment at Rabi frequency `omega`.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one `QflipEnvParams`.
#[no_mangle]
pub unsafe extern "C" fn qflip_env_params_default(omega: f64, out: *mut QflipEnvParams) -> QflipStatus {
    guard(|| {
        if !(omega.is_finite() && omega > 0.0) {
            return Err((QflipStatus::InvalidArgument, "omega must be positive".into()));
        }
        let e = EnvConfig::hybrid(omega);
        write_out(
            out,
            QflipEnvParams {
                omega: e.omega,
                total_time: e.total_time,
                delta_max: e.delta_max,
                n_steps: e.n_steps,
            },
            "out",
        )
    })
}

/// Builds a program from `n` detunings (rad/s) and durations (s).
///
/// # Safety
/// `deltas` and `durations` must each point to `n` readable doubles; `out`
/// must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qflip_sequence_new(
    omega: f64,
    deltas: *const f64,
    durations: *const f64,
    n: usize,
    out: *mut *mut QflipSequence,
) -> QflipStatus {
    guard(|| {
        if deltas.is_null() || durations.is_null() {
            return Err(null("deltas/durations"));
        }
        let d = std::slice::from_raw_parts(deltas, n);
        let t = std::slice::from_raw_parts(durations, n);
        let steps = lib(d.iter().zip(t).map(|(&d, &t)| PulseStep::new(d, t)).collect())?;
        let seq = lib(PulseSequence::new(omega, steps))?;
        write_out(out, Box::into_raw(Box::new(QflipSequence(seq))), "out")
    })
}

/// Resonant π pulse at Rabi frequency `omega`.
///
/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qflip_pi_pulse(omega: f64, out: *mut *mut QflipSequence) -> QflipStatus {
    guard(|| {
        let seq = lib(qflip::bench::pi_pulse(omega))?;
        write_out(out, Box::into_raw(Box::new(QflipSequence(seq))), "out")
    })
}

/// Solves the STA ansatz for `channel` and discretizes it into `n_steps`
/// steps. `a_out`, `duration_out` and `max_delta_out` may be NULL.
///
/// # Safety
/// `out` must point to writable storage for one handle; the optional
/// outputs must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn qflip_sta_design(
    channel: QflipChannel,
    omega: f64,
    n_steps: usize,
    out: *mut *mut QflipSequence,
    a_out: *mut f64,
    duration_out: *mut f64,
    max_delta_out: *mut f64,
) -> QflipStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ch = match channel {
            QflipChannel::Detuning => ErrorChannel::Detuning,
            QflipChannel::Rabi => ErrorChannel::Rabi,
        };
        let d = lib(sta::design(ch, omega, n_steps))?;
        for (p, v) in [
            (a_out, d.ansatz.a()),
            (duration_out, d.ansatz.duration()),
            (max_delta_out, d.max_detuning),
        ] {
            if !p.is_null() {
                p.write(v);
            }
        }
        out.write(Box::into_raw(Box::new(QflipSequence(d.sequence))));
        Ok(())
    })
}

/// Number of steps in `seq`, or 0 for NULL.
///
/// # Safety
/// `seq` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qflip_sequence_len(seq: *const QflipSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.len())
}

/// Detuning (rad/s) and duration (s) of step `index`.
///
/// # Safety
/// `seq` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn qflip_sequence_step(
    seq: *const QflipSequence,
    index: usize,
    delta_out: *mut f64,
    duration_out: *mut f64,
) -> QflipStatus {
    guard(|| {
        let s = &deref(seq, "seq")?.0;
        let step = s.steps.get(index).ok_or_else(|| {
            (
                QflipStatus::InvalidArgument,
                format!("step {index} out of range for {} steps", s.len()),
            )
        })?;
        write_out(delta_out, step.delta, "delta_out")?;
        write_out(duration_out, step.duration, "duration_out")
    })
}

/// # Safety
/// `seq` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qflip_sequence_free(seq: *mut QflipSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Probability of ending in `|1⟩` from `|0⟩` under relative Rabi error
/// `delta_omega`, detuning error `delta_delta` (units of Ω) and dephasing
/// time `t2` (s; zero or negative disables dephasing).
///
/// # Safety
/// `seq` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qflip_flip_probability(
    seq: *const QflipSequence,
    delta_omega: f64,
    delta_delta: f64,
    t2: f64,
    substeps: usize,
    out: *mut f64,
) -> QflipStatus {
    guard(|| {
        let s = &deref(seq, "seq")?.0;
        let err = ErrorModel::systematic(delta_omega, delta_delta).with_t2((t2 > 0.0).then_some(t2));
        let state = lib(evolve(&QubitState::ground(), s, &err, substeps))?;
        write_out(out, flip_probability(&state), "out")
    })
}

/// Loads a policy checkpoint written by `qflip train`.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qflip_policy_load(path: *const c_char, out: *mut *mut QflipPolicy) -> QflipStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (QflipStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
        let (net, _) = lib(load_checkpoint(&PathBuf::from(p)))?;
        write_out(out, Box::into_raw(Box::new(QflipPolicy(net))), "out")
    })
}

/// Deterministic error-free rollout of `policy`, returned as a program.
///
/// # Safety
/// `policy` and `params` must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qflip_policy_rollout(
    policy: *const QflipPolicy,
    params: *const QflipEnvParams,
    out: *mut *mut QflipSequence,
) -> QflipStatus {
    guard(|| {
        let net = &deref(policy, "policy")?.0;
        let p = deref(params, "params")?;
        let cfg = EnvConfig {
            n_steps: p.n_steps,
            total_time: p.total_time,
            delta_max: p.delta_max,
            ..EnvConfig::hybrid(p.omega)
        };
        lib(cfg.validate())?;
        let seq = lib(nominal_sequence(net, &cfg))?;
        write_out(out, Box::into_raw(Box::new(QflipSequence(seq))), "out")
    })
}

/// # Safety
/// `policy` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qflip_policy_free(policy: *mut QflipPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}
