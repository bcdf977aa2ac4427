//! C ABI over `shade-core`.
//!
//! Objects are opaque handles created by `*_new`/`*_load` functions and
//! released with the matching `*_free`. Every fallible function returns a
//! [`ShadeStatus`]; on failure a message is available from
//! [`shade_last_error`] until the next failing call on the same thread.
//! Panics never cross the boundary: they are reported as
//! `SHADE_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use shade_core::experiment::verify::{run_scope, Scope};
use shade_core::experiment::Checkpoint;
use shade_core::nn::Network;
use shade_core::shade::{unit_loss, unit_loss_derivative, ShadeState};
use shade_core::{Error, Rng, Tensor};

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShadeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    State = 4,
    Format = 5,
    Numeric = 6,
    Verification = 7,
    Io = 8,
    Json = 9,
    Panic = 10,
}

/// A neural network (opaque).
pub struct ShadeNetwork(Network);

/// SHADE moving averages and weights for one network (opaque).
pub struct ShadeRegularizer(ShadeState);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ShadeStatus {
    match e {
        Error::Shape { .. } => ShadeStatus::Shape,
        Error::InvalidArgument(_) => ShadeStatus::InvalidArgument,
        Error::State(_) => ShadeStatus::State,
        Error::Format { .. } => ShadeStatus::Format,
        Error::Numeric(_) => ShadeStatus::Numeric,
        Error::Verification(_) => ShadeStatus::Verification,
        Error::Io(_) => ShadeStatus::Io,
        Error::Json(_) => ShadeStatus::Json,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ShadeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ShadeStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            ShadeStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            ShadeStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(Error::InvalidArgument(format!("{what} is not UTF-8"))))
}

unsafe fn as_slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn shade_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn shade_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Per-unit penalty `sum_z p(z|y) (y - mu_z)^2`.
#[no_mangle]
pub extern "C" fn shade_unit_loss(y: f64, mu0: f64, mu1: f64) -> f64 {
    unit_loss(y, mu0, mu1)
}

/// Derivative of [`shade_unit_loss`] with respect to `y`.
#[no_mangle]
pub extern "C" fn shade_unit_loss_derivative(y: f64, mu0: f64, mu1: f64) -> f64 {
    unit_loss_derivative(y, mu0, mu1)
}

/// Creates a dense ReLU network `inputs -> hidden... -> classes` with
/// weights drawn from `seed`.
///
/// # Safety
/// `hidden` must point to `n_hidden` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shade_network_new_mlp(
    inputs: usize,
    hidden: *const usize,
    n_hidden: usize,
    classes: usize,
    seed: u64,
    out: *mut *mut ShadeNetwork,
) -> ShadeStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let hidden = as_slice(hidden, n_hidden, "hidden")?;
        let net = Network::mlp(inputs, hidden, classes, &mut Rng::new(seed))?;
        *out = Box::into_raw(Box::new(ShadeNetwork(net)));
        Ok(())
    })
}

/// Loads a checkpoint written by the `shade` command-line tool. Either
/// output may be null when not wanted.
///
/// # Safety
/// `path` must be a NUL-terminated string; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn shade_checkpoint_load(
    path: *const c_char,
    network: *mut *mut ShadeNetwork,
    regularizer: *mut *mut ShadeRegularizer,
) -> ShadeStatus {
    guard(|| {
        let path = as_str(path, "path")?;
        let ck = Checkpoint::load(Path::new(path))?;
        if let Some(n) = network.as_mut() {
            *n = Box::into_raw(Box::new(ShadeNetwork(ck.network)));
        }
        if let Some(r) = regularizer.as_mut() {
            *r = Box::into_raw(Box::new(ShadeRegularizer(ck.shade)));
        }
        Ok(())
    })
}

/// # Safety
/// `net` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn shade_network_free(net: *mut ShadeNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of input features per sample (product of the input shape).
///
/// # Safety
/// `net` must be a valid handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn shade_network_input_len(net: *const ShadeNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.input_shape().iter().product())
}

/// # Safety
/// `net` must be a valid handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn shade_network_classes(net: *const ShadeNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.classes())
}

/// Number of observed (regularized) hidden layers.
///
/// # Safety
/// `net` must be a valid handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn shade_network_observed_layers(net: *const ShadeNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.observed_layers().len())
}

unsafe fn batch(net: &Network, inputs: *const f64, rows: usize) -> Result<Tensor, Fail> {
    let len: usize = net.input_shape().iter().product();
    let data = as_slice(inputs, rows * len, "inputs")?;
    let mut shape = vec![rows];
    shape.extend_from_slice(net.input_shape());
    Ok(Tensor::new(shape, data.to_vec())?)
}

/// Evaluation-mode logits for `rows` row-major samples. `logits` must hold
/// `rows * classes` values.
///
/// # Safety
/// `inputs` must hold `rows * input_len` values; `logits` must hold
/// `logits_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn shade_network_predict(
    net: *const ShadeNetwork,
    inputs: *const f64,
    rows: usize,
    logits: *mut f64,
    logits_len: usize,
) -> ShadeStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let out = net.predict(&batch(net, inputs, rows)?)?;
        if logits_len != out.logits.len() {
            return Err(Error::InvalidArgument(format!(
                "logits buffer holds {logits_len} values, {} needed",
                out.logits.len()
            ))
            .into());
        }
        if logits_len > 0 {
            if logits.is_null() {
                return Err(Fail::Null("logits"));
            }
            slice::from_raw_parts_mut(logits, logits_len).copy_from_slice(out.logits.data());
        }
        Ok(())
    })
}

/// Fresh moving averages for every observed layer of `net`.
///
/// # Safety
/// `net` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shade_regularizer_new(
    net: *const ShadeNetwork,
    decay: f64,
    beta: f64,
    out: *mut *mut ShadeRegularizer,
) -> ShadeStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let out = as_mut(out, "out")?;
        let state = ShadeState::new(&net.observed_units(), decay, beta)?;
        *out = Box::into_raw(Box::new(ShadeRegularizer(state)));
        Ok(())
    })
}

/// # Safety
/// `reg` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn shade_regularizer_free(reg: *mut ShadeRegularizer) {
    if !reg.is_null() {
        drop(Box::from_raw(reg));
    }
}

/// Runs `net` on a batch and folds its pre-activations into the moving averages.
///
/// # Safety
/// Handles must be valid; `inputs` must hold `rows * input_len` values.
#[no_mangle]
pub unsafe extern "C" fn shade_regularizer_update(
    reg: *mut ShadeRegularizer,
    net: *const ShadeNetwork,
    inputs: *const f64,
    rows: usize,
) -> ShadeStatus {
    guard(|| {
        let reg = &mut as_mut(reg, "reg")?.0;
        let net = &as_ref(net, "net")?.0;
        let out = net.predict(&batch(net, inputs, rows)?)?;
        reg.update_moving_averages(&out.pre_activations)?;
        Ok(())
    })
}

/// Penalty of a batch under the current moving averages (without `beta`).
///
/// # Safety
/// Handles must be valid; `inputs` must hold `rows * input_len` values;
/// `loss` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shade_regularizer_loss(
    reg: *const ShadeRegularizer,
    net: *const ShadeNetwork,
    inputs: *const f64,
    rows: usize,
    loss: *mut f64,
) -> ShadeStatus {
    guard(|| {
        let reg = &as_ref(reg, "reg")?.0;
        let net = &as_ref(net, "net")?.0;
        let loss = as_mut(loss, "loss")?;
        let out = net.predict(&batch(net, inputs, rows)?)?;
        *loss = reg.loss(&out.pre_activations)?;
        Ok(())
    })
}

/// Copies one unit's moving averages `(mu0, mu1, p0, p1)` into `out[0..4]`.
///
/// # Safety
/// `reg` must be valid; `out` must hold 4 writable values.
#[no_mangle]
pub unsafe extern "C" fn shade_regularizer_unit(
    reg: *const ShadeRegularizer,
    layer: usize,
    unit: usize,
    out: *mut f64,
) -> ShadeStatus {
    guard(|| {
        let reg = &as_ref(reg, "reg")?.0;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let l = reg
            .layers
            .get(layer)
            .filter(|l| unit < l.units())
            .ok_or_else(|| Error::InvalidArgument(format!("no unit {unit} in layer {layer}")))?;
        slice::from_raw_parts_mut(out, 4).copy_from_slice(&[l.mu0[unit], l.mu1[unit], l.p0[unit], l.p1[unit]]);
        Ok(())
    })
}

/// Runs one verification suite (`bounds`, `gradients`, `dpi`,
/// `reconstruction` or `algorithm1`). Returns `SHADE_STATUS_VERIFICATION`
/// when a check fails.
///
/// # Safety
/// `scope` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn shade_verify(scope: *const c_char) -> ShadeStatus {
    guard(|| {
        let name = as_str(scope, "scope")?;
        let scope = Scope::parse(name).ok_or_else(|| Error::InvalidArgument(format!("unknown scope '{name}'")))?;
        let report = run_scope(scope)?;
        if report.passed() {
            Ok(())
        } else {
            Err(Error::Verification(report.to_string()).into())
        }
    })
}

