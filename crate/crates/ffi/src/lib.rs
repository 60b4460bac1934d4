//! C ABI over `regunet-core`.
//!
//! Objects are opaque handles created by `rg_*_open`/`rg_*_load` and released
//! with the matching `rg_*_free`. Every fallible call returns an [`RgStatus`];
//! on failure, `rg_last_error_message` describes the most recent error on the
//! calling thread. Output arrays are caller-allocated; calls that fill one
//! take its capacity in doubles and fail with `RG_STATUS_BUFFER_TOO_SMALL`
//! (writing nothing) when it is too short.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use regunet_core::config::KvConfig;
use regunet_core::diffcore::GradCheckOptions;
use regunet_core::evalcli::{error_accumulation, load_checkpoint};
use regunet_core::meshgraph::{deserialize_sample, GraphSequence};
use regunet_core::model::{rollout, Model, ModelVariant, RolloutMode};
use regunet_core::synthdata::{build_dataset, split_seeds, Dataset, DatasetSpec, Split};
use regunet_core::trainer::toy_gradcheck;
use regunet_core::Error;

pub const RG_SPLIT_TRAIN: u32 = 0;
pub const RG_SPLIT_VAL: u32 = 1;
pub const RG_SPLIT_TEST: u32 = 2;

pub const RG_VARIANT_REGUNET: u32 = 0;
pub const RG_VARIANT_BASELINE1: u32 = 1;
pub const RG_VARIANT_BASELINE2: u32 = 2;
pub const RG_VARIANT_BASELINE3: u32 = 3;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RgStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Bad argument value, configuration or shape.
    InvalidInput = 2,
    Io = 3,
    /// Malformed dataset, sample or checkpoint file.
    Format = 4,
    /// Numerical failure (divergence, non-finite values, failed check).
    Runtime = 5,
    BufferTooSmall = 6,
    /// A bug inside the library; the handle involved should be discarded.
    Panic = 7,
}

pub struct RgDataset {
    inner: Dataset,
}

pub struct RgSample {
    inner: GraphSequence,
}

pub struct RgModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut s = msg.into();
    s.retain(|c| c != '\0');
    let c = CString::new(s).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RgStatus {
    match e {
        Error::InvalidInput(_) | Error::Config(_) | Error::Shape { .. } => RgStatus::InvalidInput,
        Error::Format { .. } => RgStatus::Format,
        Error::Io { .. } => RgStatus::Io,
        _ => RgStatus::Runtime,
    }
}

struct Fail(RgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

type Res<T> = std::result::Result<T, Fail>;

fn guard(f: impl FnOnce() -> Res<()>) -> RgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RgStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            RgStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(RgStatus::NullArgument, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Res<PathBuf> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RgStatus::InvalidInput, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Res<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a>(p: *mut f64, cap: usize, need: usize) -> Res<&'a mut [f64]> {
    if p.is_null() {
        return Err(null("output buffer"));
    }
    if cap < need {
        return Err(Fail(
            RgStatus::BufferTooSmall,
            format!("output needs {need} doubles, capacity is {cap}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

fn split_arg(split: u32) -> Res<Split> {
    Split::ALL
        .get(split as usize)
        .copied()
        .ok_or_else(|| Fail(RgStatus::InvalidInput, format!("unknown split code {split}")))
}

fn put<T>(out: *mut *mut T, v: T) -> Res<()> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    unsafe { *out = Box::into_raw(Box::new(v)) };
    Ok(())
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(s) => s.as_ptr(),
        None => c"".as_ptr(),
    })
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn rg_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"",
    };
    V.as_ptr()
}

/// Writes a synthetic dataset to `out_dir`. `config_path` may be null for the
/// desk preset; `seed` overrides its seeds when `use_seed` is non-zero.
///
/// # Safety
/// Strings must be NUL-terminated; `out` (optional) receives a new handle.
#[no_mangle]
pub unsafe extern "C" fn rg_dataset_generate(
    config_path: *const c_char,
    out_dir: *const c_char,
    seed: u64,
    use_seed: i32,
    out: *mut *mut RgDataset,
) -> RgStatus {
    guard(|| {
        let dir = path_arg(out_dir, "out_dir")?;
        let mut spec = DatasetSpec::default();
        if !config_path.is_null() {
            let mut kv = KvConfig::load(&path_arg(config_path, "config_path")?)?;
            spec.apply(&mut kv)?;
            kv.finish()?;
        }
        if use_seed != 0 {
            spec.seeds = split_seeds(seed);
        }
        let ds = build_dataset(&spec, &dir)?;
        if !out.is_null() {
            put(out, RgDataset { inner: ds })?;
        }
        Ok(())
    })
}

/// # Safety
/// `dir` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_dataset_open(dir: *const c_char, out: *mut *mut RgDataset) -> RgStatus {
    guard(|| {
        let ds = Dataset::open(&path_arg(dir, "dir")?)?;
        put(out, RgDataset { inner: ds })
    })
}

/// Number of samples in `split`.
///
/// # Safety
/// `ds` must come from this library; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_dataset_count(ds: *const RgDataset, split: u32, count: *mut usize) -> RgStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let s = split_arg(split)?;
        let c = count.as_mut().ok_or_else(|| null("count"))?;
        *c = ds.inner.files(s).len();
        Ok(())
    })
}

/// Loads sample `index` of `split`.
///
/// # Safety
/// `ds` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_dataset_sample(
    ds: *const RgDataset,
    split: u32,
    index: usize,
    out: *mut *mut RgSample,
) -> RgStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let files = ds.inner.files(split_arg(split)?);
        let path = files.get(index).ok_or_else(|| {
            Fail(
                RgStatus::InvalidInput,
                format!("sample index {index} out of range ({} samples)", files.len()),
            )
        })?;
        put(out, RgSample { inner: deserialize_sample(path)?.sequence })
    })
}

/// # Safety
/// `ds` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn rg_dataset_free(ds: *mut RgDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Reads an `RGSQ` sample file.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_sample_load(path: *const c_char, out: *mut *mut RgSample) -> RgStatus {
    guard(|| {
        let s = deserialize_sample(&path_arg(path, "path")?)?;
        put(out, RgSample { inner: s.sequence })
    })
}

/// # Safety
/// `s` must come from this library; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_sample_shape(s: *const RgSample, nodes: *mut usize, steps: *mut usize) -> RgStatus {
    guard(|| {
        let s = handle(s, "sample")?;
        *nodes.as_mut().ok_or_else(|| null("nodes"))? = s.inner.num_nodes();
        *steps.as_mut().ok_or_else(|| null("steps"))? = s.inner.num_steps();
        Ok(())
    })
}

/// Ground-truth positions, `steps x nodes x 3` doubles in row-major order.
///
/// # Safety
/// `s` must come from this library; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn rg_sample_positions(s: *const RgSample, buf: *mut f64, cap: usize) -> RgStatus {
    guard(|| {
        let s = handle(s, "sample")?;
        let flat: Vec<f64> = s.inner.positions.iter().flatten().flatten().copied().collect();
        out_slice(buf, cap, flat.len())?.copy_from_slice(&flat);
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn rg_sample_free(s: *mut RgSample) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Loads a checkpoint against the benchmark hierarchy of `ds`. `variant` is
/// one of the `RG_VARIANT_*` codes, or `UINT32_MAX` to accept any.
///
/// # Safety
/// `path` must be NUL-terminated, `ds` from this library, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_model_load(
    path: *const c_char,
    ds: *const RgDataset,
    variant: u32,
    out: *mut *mut RgModel,
) -> RgStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let expect = match variant {
            u32::MAX => None,
            v => Some(*ModelVariant::ALL.get(v as usize).ok_or_else(|| {
                Fail(RgStatus::InvalidInput, format!("unknown variant code {v}"))
            })?),
        };
        let m = load_checkpoint(&path_arg(path, "path")?, &ds.inner.scenario, expect)?;
        put(out, RgModel { inner: m })
    })
}

/// # Safety
/// `m` must come from this library; `variant` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_model_variant(m: *const RgModel, variant: *mut u32) -> RgStatus {
    guard(|| {
        let m = handle(m, "model")?;
        let code = ModelVariant::ALL.iter().position(|v| *v == m.inner.variant).unwrap_or(0);
        *variant.as_mut().ok_or_else(|| null("variant"))? = code as u32;
        Ok(())
    })
}

/// Autoregressive rollout from the sample's first snapshot; writes predicted
/// positions, `steps x nodes x 3` doubles.
///
/// # Safety
/// Handles must come from this library; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn rg_model_rollout(
    m: *const RgModel,
    s: *const RgSample,
    buf: *mut f64,
    cap: usize,
) -> RgStatus {
    guard(|| {
        let (m, s) = (handle(m, "model")?, handle(s, "sample")?);
        let need = s.inner.num_steps() * s.inner.num_nodes() * 3;
        let out = out_slice(buf, cap, need)?;
        let r = rollout(&m.inner, &s.inner, RolloutMode::Autoregressive)?;
        let flat: Vec<f64> = r.positions.iter().flatten().flatten().copied().collect();
        out.copy_from_slice(&flat);
        Ok(())
    })
}

/// Mean autoregressive error per snapshot over `split`, in mm; `steps`
/// receives the curve length.
///
/// # Safety
/// Handles must come from this library; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn rg_error_accumulation(
    m: *const RgModel,
    ds: *const RgDataset,
    split: u32,
    buf: *mut f64,
    cap: usize,
    steps: *mut usize,
) -> RgStatus {
    guard(|| {
        let (m, ds) = (handle(m, "model")?, handle(ds, "dataset")?);
        let seqs: Vec<GraphSequence> = ds.inner.load(split_arg(split)?)?.into_iter().map(|s| s.sequence).collect();
        let curve = error_accumulation(&m.inner, &seqs)?;
        let n = steps.as_mut().ok_or_else(|| null("steps"))?;
        *n = curve.len();
        out_slice(buf, cap, curve.len())?.copy_from_slice(&curve);
        Ok(())
    })
}

/// # Safety
/// `m` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn rg_model_free(m: *mut RgModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Finite-difference check of the toy ReGUNet gradient with default
/// settings. Returns `RG_STATUS_RUNTIME` when the tolerance is missed; the
/// error is written either way.
///
/// # Safety
/// `max_relative_error` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_gradcheck(seed: u64, max_relative_error: *mut f64) -> RgStatus {
    guard(|| {
        let out = max_relative_error.as_mut().ok_or_else(|| null("max_relative_error"))?;
        let r = toy_gradcheck(seed, GradCheckOptions::default())?;
        *out = r.max_relative_error;
        if !r.passed() {
            return Err(Fail(
                RgStatus::Runtime,
                format!("max relative gradient error {:e} exceeds {:e}", r.max_relative_error, r.tolerance),
            ));
        }
        Ok(())
    })
}
