//! C interface to `c2f-core`.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `c2f_*_new`/`load` function and released by the matching `c2f_*_free`.
//! Functions return a [`C2fStatus`]; on failure a message is stored per
//! thread and can be fetched with [`c2f_last_error`]. Panics never unwind
//! into the caller, they become [`C2fStatus::Panic`].
//!
//! Tensors are column-major: the first index varies fastest. Images are
//! `height x width x 3` with values in `[0, 1]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use c2f_core::c2f::{complete_coarse, run_c2f, run_shortcut, C2FPlan, C2FResult};
use c2f_core::io::{generate_mask, load_image, save_image, MaskFile, MaskMode};
use c2f_core::metrics::{psnr, rse};
use c2f_core::{DenseTensor, Error, ObservationMask, SolverConfig, SolverKind};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum C2fStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Io = 4,
    SolverFailed = 5,
    Panic = 6,
}

/// Completion method selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum C2fSolver {
    TraceNorm = 0,
    Tv2 = 1,
}

/// Dense column-major tensor.
pub struct C2fTensor {
    inner: DenseTensor,
}

/// Set of observed entries.
pub struct C2fMask {
    inner: ObservationMask,
}

/// Restoration plan with its solver settings.
pub struct C2fPlan {
    inner: C2FPlan,
}

/// Output of a coarse-to-fine run.
pub struct C2fResult {
    inner: C2FResult,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> C2fStatus {
    match e {
        Error::Io(_) | Error::Image(_) | Error::MaskFormat(_) => C2fStatus::Io,
        Error::ShapeMismatch(_) | Error::DataLength { .. } | Error::EmptyTensor(_) => {
            C2fStatus::ShapeMismatch
        }
        Error::InvalidConfig(_)
        | Error::InvalidPlan(_)
        | Error::InvalidRatio(_)
        | Error::InvalidMask(_)
        | Error::Config(_)
        | Error::NegativeThreshold(_)
        | Error::ModeOutOfRange { .. }
        | Error::RankOutOfRange { .. }
        | Error::GridTooFine { .. }
        | Error::ZeroReference
        | Error::EmptyObservation
        | Error::NonFinite(_) => C2fStatus::InvalidArgument,
        _ => C2fStatus::SolverFailed,
    }
}

struct Fail(C2fStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(C2fStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(C2fStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> C2fStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            C2fStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            C2fStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn drop_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `cap` bytes, into `buf`. Returns the full message length
/// without the terminator. `buf` may be null when `cap` is 0.
///
/// # Safety
/// `buf` must be writable for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn c2f_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a tensor from `ndims` extents and `prod(dims)` column-major values.
///
/// # Safety
/// `dims` and `data` must point to arrays of the stated lengths; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn c2f_tensor_new(
    dims: *const usize,
    ndims: usize,
    data: *const f64,
    len: usize,
    out: *mut *mut C2fTensor,
) -> C2fStatus {
    guard(|| {
        let dims = slice(dims, ndims, "dims")?.to_vec();
        let data = slice(data, len, "data")?.to_vec();
        put(
            out,
            C2fTensor {
                inner: DenseTensor::new(dims, data)?,
            },
        )
    })
}

/// # Safety
/// `t` must be null or a live tensor handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn c2f_tensor_free(t: *mut C2fTensor) {
    drop_handle(t);
}

/// Number of modes, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn c2f_tensor_ndims(t: *const C2fTensor) -> usize {
    t.as_ref().map_or(0, |t| t.inner.order())
}

/// Number of entries, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn c2f_tensor_len(t: *const C2fTensor) -> usize {
    t.as_ref().map_or(0, |t| t.inner.len())
}

/// Writes the extents into `dims`, which holds `cap` entries.
///
/// # Safety
/// `t` must be a live handle and `dims` writable for `cap` entries.
#[no_mangle]
pub unsafe extern "C" fn c2f_tensor_dims(
    t: *const C2fTensor,
    dims: *mut usize,
    cap: usize,
) -> C2fStatus {
    guard(|| {
        let t = borrow(t, "tensor")?;
        let d = t.inner.dims();
        if cap < d.len() {
            return Err(invalid(format!(
                "dims buffer holds {cap}, need {}",
                d.len()
            )));
        }
        if dims.is_null() {
            return Err(null("dims"));
        }
        ptr::copy_nonoverlapping(d.as_ptr(), dims, d.len());
        Ok(())
    })
}

/// Copies all entries, column-major, into `data`, which holds `cap` values.
///
/// # Safety
/// `t` must be a live handle and `data` writable for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn c2f_tensor_data(
    t: *const C2fTensor,
    data: *mut f64,
    cap: usize,
) -> C2fStatus {
    guard(|| {
        let t = borrow(t, "tensor")?;
        let src = t.inner.data();
        if cap < src.len() {
            return Err(invalid(format!(
                "data buffer holds {cap}, need {}",
                src.len()
            )));
        }
        if data.is_null() {
            return Err(null("data"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), data, src.len());
        Ok(())
    })
}

/// Loads an 8-bit RGB PNG or PPM as an `H x W x 3` tensor.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn c2f_image_load(
    path: *const c_char,
    out: *mut *mut C2fTensor,
) -> C2fStatus {
    guard(|| {
        let path = string(path, "path")?;
        put(
            out,
            C2fTensor {
                inner: load_image(path)?,
            },
        )
    })
}

/// Saves an `H x W x 3` tensor, clamped to `[0, 1]`, as PNG or PPM by
/// extension.
///
/// # Safety
/// `t` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn c2f_image_save(t: *const C2fTensor, path: *const c_char) -> C2fStatus {
    guard(|| {
        let t = borrow(t, "tensor")?;
        save_image(&t.inner, string(path, "path")?)?;
        Ok(())
    })
}

/// Builds a mask from one byte per entry (nonzero means observed).
///
/// # Safety
/// `dims` must hold `ndims` entries, `observed` `prod(dims)` bytes.
#[no_mangle]
pub unsafe extern "C" fn c2f_mask_from_indicator(
    dims: *const usize,
    ndims: usize,
    observed: *const u8,
    len: usize,
    out: *mut *mut C2fMask,
) -> C2fStatus {
    guard(|| {
        let dims = slice(dims, ndims, "dims")?;
        let flags = slice(observed, len, "observed")?
            .iter()
            .map(|&b| b != 0)
            .collect();
        put(
            out,
            C2fMask {
                inner: ObservationMask::from_indicator(dims, flags)?,
            },
        )
    })
}

/// Draws a mask hiding `floor(ratio * entries)` entries (or spatial sites
/// when `per_pixel` is nonzero), deterministic in `seed`.
///
/// # Safety
/// `dims` must hold `ndims` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn c2f_mask_generate(
    dims: *const usize,
    ndims: usize,
    ratio: f64,
    seed: u64,
    per_pixel: bool,
    out: *mut *mut C2fMask,
) -> C2fStatus {
    guard(|| {
        let dims = slice(dims, ndims, "dims")?;
        let mode = if per_pixel {
            MaskMode::PerPixel
        } else {
            MaskMode::PerEntry
        };
        put(
            out,
            C2fMask {
                inner: generate_mask(dims, ratio, seed, mode)?,
            },
        )
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn c2f_mask_load(path: *const c_char, out: *mut *mut C2fMask) -> C2fStatus {
    guard(|| {
        let file = MaskFile::load(string(path, "path")?)?;
        put(out, C2fMask { inner: file.mask })
    })
}

/// Writes the mask file format with the given provenance fields.
///
/// # Safety
/// `m` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn c2f_mask_save(
    m: *const C2fMask,
    seed: u64,
    ratio: f64,
    path: *const c_char,
) -> C2fStatus {
    guard(|| {
        let m = borrow(m, "mask")?;
        let file = MaskFile {
            seed,
            missing_ratio: ratio,
            mask: m.inner.clone(),
        };
        file.save(string(path, "path")?)?;
        Ok(())
    })
}

/// Number of observed entries, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live mask handle.
#[no_mangle]
pub unsafe extern "C" fn c2f_mask_observed_count(m: *const C2fMask) -> usize {
    m.as_ref().map_or(0, |m| m.inner.observed_count())
}

/// Tensor equal to `truth` on the observed entries and zero elsewhere.
///
/// # Safety
/// `m` and `truth` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn c2f_mask_apply(
    m: *const C2fMask,
    truth: *const C2fTensor,
    out: *mut *mut C2fTensor,
) -> C2fStatus {
    guard(|| {
        let m = borrow(m, "mask")?;
        let t = borrow(truth, "tensor")?;
        put(
            out,
            C2fTensor {
                inner: m.inner.observed_or_zero(&t.inner)?,
            },
        )
    })
}

/// # Safety
/// `m` must be null or a live mask handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn c2f_mask_free(m: *mut C2fMask) {
    drop_handle(m);
}

/// Default plan for `solver` and a tensor with `order` modes.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn c2f_plan_new(
    solver: C2fSolver,
    order: usize,
    out: *mut *mut C2fPlan,
) -> C2fStatus {
    guard(|| {
        let solver = match solver {
            C2fSolver::TraceNorm => SolverKind::TraceNorm,
            C2fSolver::Tv2 => SolverKind::Tv2,
        };
        let plan = C2FPlan {
            solver,
            config: SolverConfig::for_order(order),
            ..C2FPlan::default()
        };
        put(out, C2fPlan { inner: plan })
    })
}

/// Sets the stage count, initial threshold and per-stage multiplier.
///
/// # Safety
/// `p` must be a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn c2f_plan_set_schedule(
    p: *mut C2fPlan,
    stages: usize,
    epsilon0: f64,
    mu: f64,
) -> C2fStatus {
    guard(|| {
        let p = borrow_mut(p, "plan")?;
        p.inner.stages = stages;
        p.inner.epsilon0 = epsilon0;
        p.inner.mu = mu;
        Ok(())
    })
}

/// Sets per-stage overlaps; the last value repeats for later stages.
///
/// # Safety
/// `p` must be a live plan handle and `overlap` hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn c2f_plan_set_overlap(
    p: *mut C2fPlan,
    overlap: *const usize,
    len: usize,
) -> C2fStatus {
    guard(|| {
        let p = borrow_mut(p, "plan")?;
        if len == 0 {
            return Err(invalid("overlap list is empty"));
        }
        p.inner.overlap = slice(overlap, len, "overlap")?.to_vec();
        Ok(())
    })
}

/// Selects the short-cut variant (coarse stage plus the finest stage).
///
/// # Safety
/// `p` must be a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn c2f_plan_set_shortcut(p: *mut C2fPlan, shortcut: bool) -> C2fStatus {
    guard(|| {
        borrow_mut(p, "plan")?.inner.shortcut = shortcut;
        Ok(())
    })
}

/// Replaces the solver settings with a TOML document; absent keys take
/// their defaults.
///
/// # Safety
/// `p` must be a live plan handle and `toml` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn c2f_plan_set_config_toml(
    p: *mut C2fPlan,
    toml: *const c_char,
) -> C2fStatus {
    guard(|| {
        let p = borrow_mut(p, "plan")?;
        let text = string(toml, "toml")?;
        p.inner.config = SolverConfig::from_toml(text)?;
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a live plan handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn c2f_plan_free(p: *mut C2fPlan) {
    drop_handle(p);
}

/// Coarse completion only.
///
/// # Safety
/// All handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn c2f_complete(
    y: *const C2fTensor,
    m: *const C2fMask,
    p: *const C2fPlan,
    out: *mut *mut C2fTensor,
) -> C2fStatus {
    guard(|| {
        let (y, m, p) = (borrow(y, "tensor")?, borrow(m, "mask")?, borrow(p, "plan")?);
        let coarse = complete_coarse(&y.inner, &m.inner, &p.inner)?;
        put(
            out,
            C2fTensor {
                inner: coarse.restored,
            },
        )
    })
}

/// Coarse-to-fine restoration; the plan's short-cut flag picks the variant.
///
/// # Safety
/// All handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn c2f_run(
    y: *const C2fTensor,
    m: *const C2fMask,
    p: *const C2fPlan,
    out: *mut *mut C2fResult,
) -> C2fStatus {
    guard(|| {
        let (y, m, p) = (borrow(y, "tensor")?, borrow(m, "mask")?, borrow(p, "plan")?);
        let result = if p.inner.shortcut {
            run_shortcut(&y.inner, &m.inner, &p.inner)?
        } else {
            run_c2f(&y.inner, &m.inner, &p.inner)?
        };
        put(out, C2fResult { inner: result })
    })
}

/// New tensor holding the restored estimate.
///
/// # Safety
/// `r` must be a live result handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn c2f_result_restored(
    r: *const C2fResult,
    out: *mut *mut C2fTensor,
) -> C2fStatus {
    guard(|| {
        let r = borrow(r, "result")?;
        put(
            out,
            C2fTensor {
                inner: r.inner.restored.clone(),
            },
        )
    })
}

/// Number of fine stages that ran, or 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn c2f_result_stage_count(r: *const C2fResult) -> usize {
    r.as_ref().map_or(0, |r| r.inner.stage_records.len())
}

/// Grid stage, patch count and replaced-patch count of the `index`-th
/// stage record.
///
/// # Safety
/// `r` must be a live result handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn c2f_result_stage(
    r: *const C2fResult,
    index: usize,
    stage: *mut usize,
    patches: *mut usize,
    replaced: *mut usize,
) -> C2fStatus {
    guard(|| {
        let r = borrow(r, "result")?;
        let rec = r
            .inner
            .stage_records
            .get(index)
            .ok_or_else(|| invalid(format!("no stage record {index}")))?;
        let stage = borrow_mut(stage, "stage")?;
        let patches = borrow_mut(patches, "patches")?;
        let replaced = borrow_mut(replaced, "replaced")?;
        *stage = rec.stage;
        *patches = rec.gaps.len();
        *replaced = rec.replaced.iter().filter(|&&x| x).count();
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a live result handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn c2f_result_free(r: *mut C2fResult) {
    drop_handle(r);
}

/// PSNR of `z` against `truth` in dB; `+inf` for an exact match.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn c2f_psnr(
    z: *const C2fTensor,
    truth: *const C2fTensor,
    out: *mut f64,
) -> C2fStatus {
    guard(|| {
        let v = psnr(
            &borrow(z, "estimate")?.inner,
            &borrow(truth, "truth")?.inner,
        )?;
        *borrow_mut(out, "output")? = v;
        Ok(())
    })
}

/// Relative squared error `||z - truth|| / ||truth||`.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn c2f_rse(
    z: *const C2fTensor,
    truth: *const C2fTensor,
    out: *mut f64,
) -> C2fStatus {
    guard(|| {
        let v = rse(
            &borrow(z, "estimate")?.inner,
            &borrow(truth, "truth")?.inner,
        )?;
        *borrow_mut(out, "output")? = v;
        Ok(())
    })
}
