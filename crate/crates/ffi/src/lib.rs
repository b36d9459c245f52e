//! C ABI over the semedge core.
//!
//! Every fallible function returns a [`SemedgeStatus`]. On failure a message
//! is kept per thread and can be copied out with
//! [`semedge_last_error_message`]. Models are opaque handles created by
//! [`semedge_model_load`] and released with [`semedge_model_free`].
//!
//! Panics never cross the boundary; they are reported as
//! `SEMEDGE_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use semedge::channel::digital::{dac, quantize_index, soft_round};
use semedge::channel::{ChannelSpec, QuantizerSpec, TransmissionMode};
use semedge::datapipe::Image;
use semedge::losses::{gaussian_kernel, warmup_delta};
use semedge::model::{forward_sample, load_checkpoint, Link, ModelParams};
use semedge::rng::{mix, substream, Stream};
use semedge::trainer::{lr_anneal, EVAL_PHASE};
use semedge::Error;

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemedgeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Dimension = 3,
    Empty = 4,
    OutOfRange = 5,
    MalformedLength = 6,
    Config = 7,
    Data = 8,
    NonFinite = 9,
    Format = 10,
    Io = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

impl From<&Error> for SemedgeStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) => SemedgeStatus::Dimension,
            Error::Empty(_) => SemedgeStatus::Empty,
            Error::OutOfRange(_) => SemedgeStatus::OutOfRange,
            Error::MalformedLength(_) => SemedgeStatus::MalformedLength,
            Error::Config(_) => SemedgeStatus::Config,
            Error::Data(_) => SemedgeStatus::Data,
            Error::NonFinite(_) => SemedgeStatus::NonFinite,
            Error::Format { .. } => SemedgeStatus::Format,
            Error::Io { .. } => SemedgeStatus::Io,
        }
    }
}

/// Opaque trained model.
pub struct SemedgeModel {
    params: ModelParams,
    seed: u64,
}

/// Static description of a loaded model.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SemedgeModelInfo {
    pub k_devices: usize,
    /// Shape of one device view (channels, height, width), row-major.
    pub view_channels: usize,
    pub view_height: usize,
    pub view_width: usize,
    pub a_in: usize,
    pub a_out: usize,
    pub classes: usize,
    /// 1 for the digital transceiver, 0 for analog transmission.
    pub digital: u8,
    pub z_min: f64,
    pub z_max: f64,
    /// Seed stored with the checkpoint.
    pub seed: u64,
}

/// Link condition for inference. `q_b` and `r` are only read by digital
/// models.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SemedgeChannel {
    pub snr_db: f64,
    pub q_b: u32,
    pub r: u32,
    /// Non-zero disables channel noise.
    pub noiseless: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: SemedgeStatus, msg: impl Into<String>) -> SemedgeStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), SemedgeStatus>) -> SemedgeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SemedgeStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(SemedgeStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, SemedgeStatus>;
}

impl<T> OrStatus<T> for semedge::Result<T> {
    fn or_status(self) -> Result<T, SemedgeStatus> {
        self.map_err(|e| fail(SemedgeStatus::from(&e), e.to_string()))
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), SemedgeStatus> {
    if p.is_null() {
        Err(fail(SemedgeStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Slice view of a caller buffer; a null pointer is allowed only with `len == 0`.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], SemedgeStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], SemedgeStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn semedge_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the calling thread's last error message, without the
/// terminating NUL. Zero after a successful call.
#[no_mangle]
pub extern "C" fn semedge_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message into `buf` (NUL-terminated).
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn semedge_last_error_message(buf: *mut c_char, len: usize) -> SemedgeStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    if buf.is_null() {
        return SemedgeStatus::NullPointer;
    }
    if len < msg.len() + 1 {
        return SemedgeStatus::BufferTooSmall;
    }
    let out = std::slice::from_raw_parts_mut(buf.cast::<u8>(), len);
    out[..msg.len()].copy_from_slice(msg.as_bytes());
    out[msg.len()] = 0;
    SemedgeStatus::Ok
}

/// Loads a checkpoint written by `semedge train-uda` or `finetune-kd`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer. On
/// success `*out` owns a model that must be released with
/// [`semedge_model_free`].
#[no_mangle]
pub unsafe extern "C" fn semedge_model_load(path: *const c_char, out: *mut *mut SemedgeModel) -> SemedgeStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        *out = std::ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(SemedgeStatus::InvalidUtf8, "path is not UTF-8"))?;
        let (params, seed) = load_checkpoint(&PathBuf::from(path)).or_status()?;
        *out = Box::into_raw(Box::new(SemedgeModel { params, seed }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`semedge_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn semedge_model_free(model: *mut SemedgeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn semedge_model_info(model: *const SemedgeModel, out: *mut SemedgeModelInfo) -> SemedgeStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let m = &*model;
        let c = &m.params.config;
        *out = SemedgeModelInfo {
            k_devices: c.k_devices,
            view_channels: c.view_shape.0,
            view_height: c.view_shape.1,
            view_width: c.view_shape.2,
            a_in: c.a_in,
            a_out: c.a_out(),
            classes: c.classes,
            digital: u8::from(c.mode == TransmissionMode::Digital),
            z_min: c.z_min,
            z_max: c.z_max,
            seed: m.seed,
        };
        Ok(())
    })
}

/// Classifies one multi-view sample sent over `channel`.
///
/// `views` holds the K device views back to back, each in
/// channel/height/width order (`k_devices * c * h * w` values). The class
/// distribution is written to `probs` (`classes` values) and the argmax to
/// `label` when it is not null. The noise realisation is fixed by `seed`.
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn semedge_model_predict(
    model: *const SemedgeModel,
    views: *const f64,
    views_len: usize,
    channel: *const SemedgeChannel,
    seed: u64,
    probs: *mut f64,
    probs_len: usize,
    label: *mut usize,
) -> SemedgeStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(channel, "channel")?;
        let params = &(*model).params;
        let c = &params.config;
        let ch = *channel;
        let view_len = c.view_len();
        if views_len != c.k_devices * view_len {
            return Err(fail(
                SemedgeStatus::Dimension,
                format!("expected {} view values, got {views_len}", c.k_devices * view_len),
            ));
        }
        if probs_len < c.classes {
            return Err(fail(SemedgeStatus::BufferTooSmall, format!("probs needs {} entries", c.classes)));
        }
        let data = slice(views, views_len, "views")?;
        let (vc, vh, vw) = c.view_shape;
        let images = data
            .chunks(view_len)
            .map(|v| Image::new(vc, vh, vw, v.to_vec()))
            .collect::<semedge::Result<Vec<_>>>()
            .or_status()?;
        let quantizer = (c.mode == TransmissionMode::Digital).then(|| QuantizerSpec {
            q_b: ch.q_b,
            z_min: c.z_min,
            z_max: c.z_max,
            r: ch.r,
        });
        let spec = ChannelSpec::uniform(ch.snr_db, c.k_devices, c.mode, quantizer)
            .or_status()?
            .with_bypass(ch.noiseless != 0);
        let base = mix(seed, 0);
        let mut rngs: Vec<_> = (0..c.k_devices)
            .map(|d| {
                substream(
                    base,
                    Stream::Channel {
                        phase: EVAL_PHASE,
                        device: d as u32,
                    },
                )
            })
            .collect();
        let trace = forward_sample(params, &images, &spec, Link::Infer(&mut rngs)).or_status()?;
        let p = trace.prediction.probs();
        slice_mut(probs, probs_len, "probs")?[..p.len()].copy_from_slice(p);
        if !label.is_null() {
            *label = trace.prediction.label();
        }
        Ok(())
    })
}

fn quantizer(q_b: u32, z_min: f64, z_max: f64) -> Result<QuantizerSpec, SemedgeStatus> {
    let spec = QuantizerSpec {
        q_b,
        z_min,
        z_max,
        ..QuantizerSpec::default()
    };
    spec.validate().or_status()?;
    Ok(spec)
}

/// Quantization indices of `n` values in `[z_min, z_max]`.
///
/// # Safety
/// `z` and `out` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn semedge_quantize(
    z: *const f64,
    n: usize,
    q_b: u32,
    z_min: f64,
    z_max: f64,
    out: *mut u32,
) -> SemedgeStatus {
    guard(|| {
        let spec = quantizer(q_b, z_min, z_max)?;
        let idx = quantize_index(slice(z, n, "z")?, &spec).or_status()?;
        slice_mut(out, n, "out")?.copy_from_slice(&idx);
        Ok(())
    })
}

/// Reconstruction values of `n` quantization indices.
///
/// # Safety
/// `indices` and `out` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn semedge_dac(
    indices: *const u32,
    n: usize,
    q_b: u32,
    z_min: f64,
    z_max: f64,
    out: *mut f64,
) -> SemedgeStatus {
    guard(|| {
        let spec = quantizer(q_b, z_min, z_max)?;
        let idx = slice(indices, n, "indices")?;
        if let Some(&bad) = idx.iter().find(|&&i| i > spec.max_index()) {
            return Err(fail(SemedgeStatus::OutOfRange, format!("index {bad} exceeds {}", spec.max_index())));
        }
        let as_real: Vec<f64> = idx.iter().map(|&i| f64::from(i)).collect();
        slice_mut(out, n, "out")?.copy_from_slice(&dac(&as_real, &spec));
        Ok(())
    })
}

/// Differentiable rounding surrogate of depth `r`.
#[no_mangle]
pub extern "C" fn semedge_soft_round(x: f64, r: u32) -> f64 {
    soft_round(x, r)
}

/// Gaussian kernel between two `n`-dimensional points.
///
/// # Safety
/// `x1` and `x2` must hold `n` elements and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn semedge_gaussian_kernel(
    x1: *const f64,
    x2: *const f64,
    n: usize,
    bandwidth: f64,
    out: *mut f64,
) -> SemedgeStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = gaussian_kernel(slice(x1, n, "x1")?, slice(x2, n, "x2")?, bandwidth).or_status()?;
        Ok(())
    })
}

/// Adaptation warm-up factor at epoch `e` of `total`.
#[no_mangle]
pub extern "C" fn semedge_warmup_delta(e: usize, total: usize) -> f64 {
    warmup_delta(e, total)
}

/// Annealed learning rate at epoch `e` of `total`.
#[no_mangle]
pub extern "C" fn semedge_lr_anneal(eta0: f64, e: usize, total: usize) -> f64 {
    lr_anneal(eta0, e, total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes_are_distinct() {
        let errs = [
            Error::Dimension(String::new()),
            Error::Empty(String::new()),
            Error::OutOfRange(String::new()),
            Error::MalformedLength(String::new()),
            Error::Config(String::new()),
            Error::Data(String::new()),
            Error::NonFinite(String::new()),
        ];
        let mut codes: Vec<i32> = errs.iter().map(|e| SemedgeStatus::from(e) as i32).collect();
        codes.dedup();
        assert_eq!(codes.len(), errs.len());
        assert!(!codes.contains(&0));
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), SemedgeStatus::Panic);
        assert_eq!(semedge_last_error_length(), "internal panic".len());
        assert_eq!(guard(|| Ok(())), SemedgeStatus::Ok);
        assert_eq!(semedge_last_error_length(), 0);
    }
}
