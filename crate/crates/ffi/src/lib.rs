//! C ABI for `advexp`.
//!
//! Every fallible call returns an [`AdvStatus`]; on anything but
//! `ADV_STATUS_OK` a message is available from [`adv_last_error`] on the same
//! thread. Handles are opaque and must be released with their `_free`
//! function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use advexp::collectors::shape_reward;
use advexp::env::{Env, EnvId, EnvState};
use advexp::experiment::{run_trial, write_trial, TrialConfig};
use advexp::inverse::InverseModel;
use advexp::rng::{stream, LabRng, Stream};
use advexp::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    PastHorizon = 4,
    Io = 5,
    Format = 6,
    /// The trial ran but a component failed; its partial log was written.
    TrialFailed = 7,
    Internal = 8,
}

/// Environment instance with its own state and reset stream.
pub struct AdvEnv {
    env: Env,
    state: EnvState,
    rng: LabRng,
}

/// Inverse dynamics model with its recurrent state.
pub struct AdvModel {
    model: InverseModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> AdvStatus {
    match err {
        Error::Shape { .. } => AdvStatus::Shape,
        Error::PastHorizon { .. } => AdvStatus::PastHorizon,
        Error::Io(_) => AdvStatus::Io,
        Error::Format(_) | Error::Json(_) => AdvStatus::Format,
        _ => AdvStatus::InvalidArgument,
    }
}

fn fail(status: AdvStatus, msg: impl Into<String>) -> AdvStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), AdvStatus>) -> AdvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AdvStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(AdvStatus::Internal, "panic inside advexp"),
    }
}

fn lift<T>(r: advexp::Result<T>) -> Result<T, AdvStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, AdvStatus> {
    if p.is_null() {
        return Err(fail(AdvStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(AdvStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, want: usize, what: &str) -> Result<&'a [f64], AdvStatus> {
    if p.is_null() {
        return Err(fail(AdvStatus::NullPointer, format!("{what} is null")));
    }
    if len != want {
        return Err(fail(
            AdvStatus::Shape,
            format!("{what}: expected {want} values, got {len}"),
        ));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, want: usize, what: &str) -> Result<&'a mut [f64], AdvStatus> {
    if p.is_null() {
        return Err(fail(AdvStatus::NullPointer, format!("{what} is null")));
    }
    if len < want {
        return Err(fail(
            AdvStatus::Shape,
            format!("{what}: room for {len} values, need {want}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, want))
}

unsafe fn handle<'a, T>(p: *mut T) -> Result<&'a mut T, AdvStatus> {
    p.as_mut().ok_or_else(|| fail(AdvStatus::NullPointer, "handle is null"))
}

/// Message for the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn adv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// `−|loss − delta|`.
#[no_mangle]
pub extern "C" fn adv_shape_reward(loss: f64, delta: f64) -> f64 {
    shape_reward(loss, delta)
}

/// Creates an environment by name (`point_reach`, `arm_reach`,
/// `push_block`, `chain_reach`) and resets it.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn adv_env_new(name: *const c_char, seed: u64, out: *mut *mut AdvEnv) -> AdvStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(AdvStatus::NullPointer, "out is null"));
        }
        let id: EnvId = lift(str_arg(name, "name")?.parse())?;
        let env = Env::new(id);
        let mut rng = stream(seed, Stream::Env);
        let state = env.reset(&mut rng);
        *out = Box::into_raw(Box::new(AdvEnv { env, state, rng }));
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`adv_env_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adv_env_free(env: *mut AdvEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adv_env_state_dim(env: *const AdvEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.spec().state_dim)
}

/// Action dimension, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adv_env_action_dim(env: *const AdvEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.spec().action_dim)
}

/// Episode length, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adv_env_horizon(env: *const AdvEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.spec().horizon)
}

/// Starts a new episode and writes its first state.
///
/// # Safety
/// `env` must be live; `state_out` must hold `state_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn adv_env_reset(env: *mut AdvEnv, state_out: *mut f64, state_len: usize) -> AdvStatus {
    guard(|| {
        let e = handle(env)?;
        let out = out_slice(state_out, state_len, e.env.spec().state_dim, "state_out")?;
        e.state = e.env.reset(&mut e.rng);
        out.copy_from_slice(&e.state.vector);
        Ok(())
    })
}

/// Copies the current state.
///
/// # Safety
/// `env` must be live; `state_out` must hold `state_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn adv_env_state(env: *const AdvEnv, state_out: *mut f64, state_len: usize) -> AdvStatus {
    guard(|| {
        let e = env
            .as_ref()
            .ok_or_else(|| fail(AdvStatus::NullPointer, "handle is null"))?;
        out_slice(state_out, state_len, e.env.spec().state_dim, "state_out")?.copy_from_slice(&e.state.vector);
        Ok(())
    })
}

/// Applies one action (clamped to `[-1, 1]`), writes the new state and
/// whether the episode has reached its horizon.
///
/// # Safety
/// `env` must be live; `action` must hold `action_len` doubles,
/// `state_out` `state_len` doubles; `done` may be null.
#[no_mangle]
pub unsafe extern "C" fn adv_env_step(
    env: *mut AdvEnv,
    action: *const f64,
    action_len: usize,
    state_out: *mut f64,
    state_len: usize,
    done: *mut bool,
) -> AdvStatus {
    guard(|| {
        let e = handle(env)?;
        let spec = *e.env.spec();
        let a = slice_arg(action, action_len, spec.action_dim, "action")?;
        let out = out_slice(state_out, state_len, spec.state_dim, "state_out")?;
        e.state = lift(e.env.step(&e.state, a))?;
        out.copy_from_slice(&e.state.vector);
        if !done.is_null() {
            *done = e.state.t >= spec.horizon;
        }
        Ok(())
    })
}

/// Task-coordinate distance to the goal for the current state.
///
/// # Safety
/// `env` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn adv_env_goal_distance(env: *const AdvEnv, out: *mut f64) -> AdvStatus {
    guard(|| {
        let e = env
            .as_ref()
            .ok_or_else(|| fail(AdvStatus::NullPointer, "handle is null"))?;
        if out.is_null() {
            return Err(fail(AdvStatus::NullPointer, "out is null"));
        }
        *out = e.env.goal_distance(&e.state);
        Ok(())
    })
}

/// Loads an inverse model checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn adv_model_load(path: *const c_char, out: *mut *mut AdvModel) -> AdvStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(AdvStatus::NullPointer, "out is null"));
        }
        let model = lift(InverseModel::load_file(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(AdvModel { model }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`adv_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adv_model_free(model: *mut AdvModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Clears the recurrent state; call at every episode start.
///
/// # Safety
/// `model` must be live.
#[no_mangle]
pub unsafe extern "C" fn adv_model_reset(model: *mut AdvModel) -> AdvStatus {
    guard(|| {
        handle(model)?.model.reset_episode();
        Ok(())
    })
}

/// Predicts the action taking `x` to `x_next` and advances the recurrent
/// state.
///
/// # Safety
/// `model` must be live; `x` and `x_next` must hold `state_len` doubles and
/// `action_out` `action_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn adv_model_predict(
    model: *mut AdvModel,
    x: *const f64,
    x_next: *const f64,
    state_len: usize,
    action_out: *mut f64,
    action_len: usize,
) -> AdvStatus {
    guard(|| {
        let m = &mut handle(model)?.model;
        let arch = *m.arch();
        let x = slice_arg(x, state_len, arch.state_dim, "x")?;
        let xn = slice_arg(x_next, state_len, arch.state_dim, "x_next")?;
        let out = out_slice(action_out, action_len, arch.action_dim, "action_out")?;
        out.copy_from_slice(&lift(m.predict(x, xn))?);
        Ok(())
    })
}

/// Runs one trial from a JSON config and writes its files into `out_dir`.
/// Writes the final success rate to `final_success` when non-null.
///
/// # Safety
/// `config_json` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn adv_run_trial_json(
    config_json: *const c_char,
    out_dir: *const c_char,
    final_success: *mut f64,
) -> AdvStatus {
    guard(|| {
        let config: TrialConfig = serde_json::from_str(str_arg(config_json, "config_json")?)
            .map_err(|e| fail(AdvStatus::Format, e.to_string()))?;
        let dir = Path::new(str_arg(out_dir, "out_dir")?);
        let log = lift(run_trial(&config))?;
        lift(write_trial(dir, &log))?;
        if !final_success.is_null() {
            *final_success = log.final_success().unwrap_or(f64::NAN);
        }
        match log.error {
            Some(e) => Err(fail(AdvStatus::TrialFailed, e)),
            None => Ok(()),
        }
    })
}
