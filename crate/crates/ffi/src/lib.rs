//! C ABI over the pulseforge pipeline.
//!
//! Every fallible entry point returns a [`PfStatus`]. On failure the
//! calling thread's last error message is set and can be read with
//! [`pf_last_error_message`]. Models are opaque [`PfModel`] handles owned
//! by the caller and released with [`pf_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pulseforge::dsp::{butterworth_bandpass, BandConfig, FilterSpec};
use pulseforge::model::{Model, ModelError};
use pulseforge::synth::gen_bvp;
use pulseforge::tensor::{no_grad, DiffTensor, Scalar, TensorError};
use pulseforge::train::{checkpoint_precision, estimate_clip_hr, PostConfig, Precision, TrainError};

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Numeric = 4,
    ShapeMismatch = 5,
    Panic = 6,
}

enum Inner {
    F32(Model<f32>),
    F64(Model<f64>),
}

/// A loaded checkpoint.
pub struct PfModel {
    inner: Inner,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(PfStatus, String);

impl From<TensorError> for Failure {
    fn from(e: TensorError) -> Self {
        let code = match e {
            TensorError::NonFinite { .. } => PfStatus::Numeric,
            TensorError::ShapeMismatch { .. } | TensorError::DataLength { .. } => PfStatus::ShapeMismatch,
            _ => PfStatus::InvalidArgument,
        };
        Failure(code, e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Tensor(t) => t.into(),
            ModelError::Io(_) | ModelError::Checkpoint(_) => Failure(PfStatus::Io, e.to_string()),
            other => Failure(PfStatus::InvalidArgument, other.to_string()),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Model(m) => m.into(),
            TrainError::Tensor(t) => t.into(),
            TrainError::Io { .. } => Failure(PfStatus::Io, e.to_string()),
            TrainError::NonFinite { .. } => Failure(PfStatus::Numeric, e.to_string()),
            other => Failure(PfStatus::InvalidArgument, other.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PfStatus::InvalidArgument, msg.into())
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PfStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            PfStatus::Panic
        }
    }
}

fn null_check<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(PfStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    null_check(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    null_check(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Message for the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a checkpoint directory into a new handle written to `*out`.
///
/// # Safety
/// `dir` must be a NUL-terminated UTF-8 path and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_model_load(dir: *const c_char, out: *mut *mut PfModel) -> PfStatus {
    guard(|| {
        null_check(dir, "dir")?;
        null_check(out, "out")?;
        *out = ptr::null_mut();
        let dir = CStr::from_ptr(dir).to_str().map_err(|_| invalid("dir is not valid UTF-8"))?;
        let dir = Path::new(dir);
        let inner = match checkpoint_precision(dir)? {
            Precision::F32 => Inner::F32(Model::load(dir)?.0),
            Precision::F64 => Inner::F64(Model::load(dir)?.0),
        };
        *out = Box::into_raw(Box::new(PfModel { inner }));
        Ok(())
    })
}

/// Releases a handle from [`pf_model_load`]. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pf_model_free(model: *mut PfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of trainable scalars.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_model_param_count(model: *const PfModel, out: *mut usize) -> PfStatus {
    guard(|| {
        null_check(model, "model")?;
        null_check(out, "out")?;
        *out = match &(*model).inner {
            Inner::F32(m) => m.param_count(),
            Inner::F64(m) => m.param_count(),
        };
        Ok(())
    })
}

/// Clip geometry the model expects: frames, height and width.
///
/// # Safety
/// `model` must be a live handle and the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pf_model_input_shape(
    model: *const PfModel,
    frames: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> PfStatus {
    guard(|| {
        null_check(model, "model")?;
        null_check(frames, "frames")?;
        null_check(height, "height")?;
        null_check(width, "width")?;
        let cfg = match &(*model).inner {
            Inner::F32(m) => &m.config,
            Inner::F64(m) => &m.config,
        };
        (*frames, *height, *width) = (cfg.frames, cfg.height, cfg.width);
        Ok(())
    })
}

fn predict<T: Scalar>(model: &Model<T>, clip: &[f32], out: &mut [f32]) -> Result<(), Failure> {
    let c = &model.config;
    let x = DiffTensor::<T>::new(clip.iter().map(|&v| T::of(v as f64)).collect(), [1, 3, c.frames, c.height, c.width])?;
    let y = no_grad(|| model.predict(&x))?;
    for (o, v) in out.iter_mut().zip(y.to_f64_vec()) {
        *o = v as f32;
    }
    Ok(())
}

/// Predicts the pulse waveform of one clip.
///
/// `clip` holds `3 * frames * height * width` values laid out
/// channel, frame, row, column. `out` receives `frames` samples.
///
/// # Safety
/// `model` must be a live handle and the buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn pf_model_infer(
    model: *const PfModel,
    clip: *const f32,
    clip_len: usize,
    out: *mut f32,
    out_len: usize,
) -> PfStatus {
    guard(|| {
        null_check(model, "model")?;
        let m = &*model;
        let cfg = match &m.inner {
            Inner::F32(m) => &m.config,
            Inner::F64(m) => &m.config,
        };
        let want = 3 * cfg.frames * cfg.height * cfg.width;
        if clip_len != want || out_len != cfg.frames {
            return Err(Failure(
                PfStatus::ShapeMismatch,
                format!("expected clip_len {want} and out_len {}, got {clip_len} and {out_len}", cfg.frames),
            ));
        }
        let clip = slice(clip, clip_len, "clip")?;
        let out = slice_mut(out, out_len, "out")?;
        match &m.inner {
            Inner::F32(model) => predict(model, clip, out),
            Inner::F64(model) => predict(model, clip, out),
        }
    })
}

/// Zero-phase Butterworth band-pass of `x` into `out`, both of length `n`.
///
/// # Safety
/// `x` and `out` must each hold `n` values. They may alias.
#[no_mangle]
pub unsafe extern "C" fn pf_bandpass(
    x: *const f64,
    n: usize,
    fs: f64,
    f_lo: f64,
    f_hi: f64,
    out: *mut f64,
) -> PfStatus {
    guard(|| {
        let input = slice(x, n, "x")?.to_vec();
        let spec = FilterSpec::bandpass(BandConfig { f_lo, f_hi }, fs).map_err(|e| invalid(e.to_string()))?;
        let y = butterworth_bandpass(&input, &spec).map_err(|e| invalid(e.to_string()))?;
        slice_mut(out, n, "out")?.copy_from_slice(&y);
        Ok(())
    })
}

/// Heart rate in bpm by band-pass filtering, Welch PSD and peak picking,
/// with the default evaluation settings.
///
/// # Safety
/// `x` must hold `n` values and `out_bpm` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_estimate_hr(x: *const f64, n: usize, fs: f64, out_bpm: *mut f64) -> PfStatus {
    guard(|| {
        let input = slice(x, n, "x")?;
        null_check(out_bpm, "out_bpm")?;
        *out_bpm = estimate_clip_hr(input, fs, &PostConfig::default())?;
        Ok(())
    })
}

/// Synthetic pulse waveform at `hr_bpm`, `frames` samples at `fps`.
///
/// # Safety
/// `out` must hold `frames` values.
#[no_mangle]
pub unsafe extern "C" fn pf_gen_bvp(hr_bpm: f64, fps: f64, frames: usize, seed: u64, out: *mut f64) -> PfStatus {
    guard(|| {
        let out = slice_mut(out, frames, "out")?;
        let w = gen_bvp(hr_bpm, fps, frames, seed).map_err(|e| invalid(e.to_string()))?;
        out.copy_from_slice(&w.samples);
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
