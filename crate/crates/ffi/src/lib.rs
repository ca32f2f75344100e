//! C ABI over the `gaborcnn` library.
//!
//! Objects are opaque handles created by `gc_*_new` / `gc_*_load` and
//! released by the matching `gc_*_free`. Fallible functions return a
//! [`GcStatus`]; on failure [`gc_last_error`] describes the problem for the
//! calling thread. Images cross the boundary as row-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use gaborcnn::cascade::{iou, nms, BBox, Cascade, CascadeConfig, Detection};
use gaborcnn::convolve::{apply_bank, BorderMode};
use gaborcnn::data::load_image;
use gaborcnn::fusion::{fuse, stack, FusionWeights};
use gaborcnn::gabor::{make_bank, FilterBank, Preset};
use gaborcnn::nn::checkpoint::read_checkpoint;
use gaborcnn::nn::{Network, Tensor};
use gaborcnn::{Error, Image};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Io = 4,
    Format = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

/// Bank preset selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcPreset {
    AgeGender = 0,
    Detection = 1,
    Fer = 2,
}

/// Border handling for bank responses.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcBorder {
    Zero = 0,
    Replicate = 1,
}

/// Axis-aligned box, top-left corner and extent.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcDetection {
    pub bbox: GcBox,
    pub score: f64,
}

/// Grayscale image.
pub struct GcImage(Image);

/// Eight-kernel Gabor filter bank.
pub struct GcBank(FilterBank);

/// Trained network loaded from a checkpoint.
pub struct GcNetwork(Network);

/// Three-stage detector.
pub struct GcCascade(Cascade);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

fn status_of(e: &Error) -> GcStatus {
    match e {
        Error::InvalidParam(_) | Error::Empty(_) | Error::NonFinite(_) | Error::StaleCache => GcStatus::InvalidArgument,
        Error::Shape(_) | Error::Layer { .. } => GcStatus::Shape,
        Error::Io(_) => GcStatus::Io,
        Error::Format(_) | Error::Json(_) => GcStatus::Format,
    }
}

struct Fail(GcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: GcStatus, msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(status, msg.into()))
}

/// Run `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            GcStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GcStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    // SAFETY: caller passes a handle from this library or null
    unsafe { p.as_ref() }.ok_or_else(|| Fail(GcStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(GcStatus::NullPointer, format!("{what} is null"));
    }
    // SAFETY: caller guarantees `len` readable values
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(GcStatus::NullPointer, format!("{what} is null"));
    }
    // SAFETY: caller guarantees `len` writable values
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

unsafe fn to_path<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return fail(GcStatus::NullPointer, "path is null");
    }
    // SAFETY: caller passes a nul-terminated string
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Fail(GcStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(Path::new(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return fail(GcStatus::NullPointer, "output handle pointer is null");
    }
    // SAFETY: `out` is non-null and writable
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: `p` came from `Box::into_raw` in this library
        drop(unsafe { Box::from_raw(p) });
    }
}

fn to_bbox(b: &GcBox) -> Result<BBox, Fail> {
    Ok(BBox::new(b.x, b.y, b.w, b.h)?)
}

fn from_bbox(b: &BBox) -> GcBox {
    GcBox {
        x: b.x,
        y: b.y,
        w: b.w,
        h: b.h,
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Copy `height * width` row-major pixels into a new image.
///
/// # Safety
/// `pixels` must point to `height * width` readable values; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn gc_image_new(height: usize, width: usize, pixels: *const f64, out: *mut *mut GcImage) -> GcStatus {
    guard(|| {
        let n = height
            .checked_mul(width)
            .ok_or_else(|| Fail(GcStatus::InvalidArgument, "image too large".into()))?;
        let px = unsafe { slice(pixels, n, "pixels") }?;
        let img = Image::new(height, width, px.to_vec())?;
        unsafe { put(out, GcImage(img)) }
    })
}

/// Load a PGM or PPM file as a grayscale image in `[0, 1]`.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_image_load(path: *const c_char, out: *mut *mut GcImage) -> GcStatus {
    guard(|| {
        let img = load_image(unsafe { to_path(path) }?)?;
        unsafe { put(out, GcImage(img)) }
    })
}

/// # Safety
/// `image` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gc_image_height(image: *const GcImage) -> usize {
    unsafe { image.as_ref() }.map_or(0, |i| i.0.height())
}

/// # Safety
/// `image` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gc_image_width(image: *const GcImage) -> usize {
    unsafe { image.as_ref() }.map_or(0, |i| i.0.width())
}

/// Copy the pixels into `out`, which must hold `height * width` values.
///
/// # Safety
/// `image` must be a live handle; `out` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn gc_image_pixels(image: *const GcImage, out: *mut f64, len: usize) -> GcStatus {
    guard(|| {
        let img = unsafe { deref(image, "image") }?;
        let px = img.0.pixels();
        if len < px.len() {
            return fail(GcStatus::BufferTooSmall, format!("need {} values, buffer holds {len}", px.len()));
        }
        unsafe { slice_mut(out, px.len(), "out") }?.copy_from_slice(px);
        Ok(())
    })
}

/// # Safety
/// `image` must be a handle from this library, not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn gc_image_free(image: *mut GcImage) {
    unsafe { free(image) }
}

/// Bank of 8 kernels, orientation-major over 0, 45, 90, 135 degrees and
/// phase-minor over 0 and 90 degrees.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_bank_new(preset: GcPreset, out: *mut *mut GcBank) -> GcStatus {
    guard(|| {
        let p = match preset {
            GcPreset::AgeGender => Preset::AgeGender,
            GcPreset::Detection => Preset::Detection,
            GcPreset::Fer => Preset::Fer,
        };
        unsafe { put(out, GcBank(make_bank(p))) }
    })
}

/// # Safety
/// `bank` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gc_bank_len(bank: *const GcBank) -> usize {
    unsafe { bank.as_ref() }.map_or(0, |b| b.0.len())
}

/// Side length of the kernels, or 0 for a null handle.
///
/// # Safety
/// `bank` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gc_bank_kernel_size(bank: *const GcBank) -> usize {
    unsafe { bank.as_ref() }.map_or(0, |b| b.0.kernels().first().map_or(0, |k| k.size()))
}

/// Copy kernel `index` row-major into `out`.
///
/// # Safety
/// `bank` must be a live handle; `out` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn gc_bank_kernel(bank: *const GcBank, index: usize, out: *mut f64, len: usize) -> GcStatus {
    guard(|| {
        let b = unsafe { deref(bank, "bank") }?;
        let k = b
            .0
            .kernels()
            .get(index)
            .ok_or_else(|| Fail(GcStatus::InvalidArgument, format!("kernel {index} of {}", b.0.len())))?;
        let v = k.values();
        if len < v.len() {
            return fail(GcStatus::BufferTooSmall, format!("need {} values, buffer holds {len}", v.len()));
        }
        unsafe { slice_mut(out, v.len(), "out") }?.copy_from_slice(v);
        Ok(())
    })
}

/// # Safety
/// `bank` must be a handle from this library, not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn gc_bank_free(bank: *mut GcBank) {
    unsafe { free(bank) }
}

/// Responses of every kernel, written channel after channel, each
/// row-major: `out` needs `bank_len * height * width` values.
///
/// # Safety
/// Handles must be live; `out` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn gc_apply_bank(
    image: *const GcImage,
    bank: *const GcBank,
    border: GcBorder,
    out: *mut f64,
    len: usize,
) -> GcStatus {
    guard(|| {
        let img = unsafe { deref(image, "image") }?;
        let b = unsafe { deref(bank, "bank") }?;
        let mode = match border {
            GcBorder::Zero => BorderMode::Zero,
            GcBorder::Replicate => BorderMode::Replicate,
        };
        let r = apply_bank(&img.0, &b.0, mode);
        let plane = img.0.pixels().len();
        let need = plane * r.len();
        if len < need {
            return fail(GcStatus::BufferTooSmall, format!("need {need} values, buffer holds {len}"));
        }
        let dst = unsafe { slice_mut(out, need, "out") }?;
        for (chunk, ch) in dst.chunks_exact_mut(plane).zip(r.channels()) {
            chunk.copy_from_slice(ch.pixels());
        }
        Ok(())
    })
}

/// Fused image `w[0] * I + sum_k w[k] * F_k` with replicated borders.
/// `weights` holds `bank_len + 1` values.
///
/// # Safety
/// Handles must be live; `weights` must hold `n_weights` values; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_fuse(
    image: *const GcImage,
    bank: *const GcBank,
    weights: *const f64,
    n_weights: usize,
    out: *mut *mut GcImage,
) -> GcStatus {
    guard(|| {
        let img = unsafe { deref(image, "image") }?;
        let b = unsafe { deref(bank, "bank") }?;
        let w = FusionWeights::from_slice(unsafe { slice(weights, n_weights, "weights") }?)?;
        let t = stack(&img.0, &apply_bank(&img.0, &b.0, BorderMode::Replicate))?;
        unsafe { put(out, GcImage(fuse(&t, &w)?)) }
    })
}

/// Intersection over union; 0 for invalid boxes.
#[no_mangle]
pub extern "C" fn gc_iou(a: GcBox, b: GcBox) -> f64 {
    match (to_bbox(&a), to_bbox(&b)) {
        (Ok(a), Ok(b)) => iou(&a, &b),
        _ => 0.0,
    }
}

/// Greedy non-maximum suppression. Kept detections are written to `out`
/// in score order; `n_out` receives their count. `out` may alias `dets`.
///
/// # Safety
/// `dets` must hold `n` values; `out` must have room for `n` values;
/// `n_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_nms(
    dets: *const GcDetection,
    n: usize,
    iou_thresh: f64,
    out: *mut GcDetection,
    n_out: *mut usize,
) -> GcStatus {
    guard(|| {
        if n_out.is_null() {
            return fail(GcStatus::NullPointer, "n_out is null");
        }
        let input: Vec<Detection> = if n == 0 {
            Vec::new()
        } else {
            if dets.is_null() {
                return fail(GcStatus::NullPointer, "dets is null");
            }
            // SAFETY: caller guarantees `n` readable detections
            unsafe { std::slice::from_raw_parts(dets, n) }
                .iter()
                .map(|d| Ok(Detection::new(to_bbox(&d.bbox)?, d.score, [0.0; 4])?))
                .collect::<Result<_, Fail>>()?
        };
        let kept = nms(&input, iou_thresh);
        let dst = unsafe { slice_mut(out, kept.len(), "out") }?;
        for (o, d) in dst.iter_mut().zip(&kept) {
            *o = GcDetection {
                bbox: from_bbox(&d.bbox),
                score: d.score,
            };
        }
        unsafe { *n_out = kept.len() };
        Ok(())
    })
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_network_load(path: *const c_char, out: *mut *mut GcNetwork) -> GcStatus {
    guard(|| {
        let p = unsafe { to_path(path) }?;
        let bytes = std::fs::read(p).map_err(|e| Fail(GcStatus::Io, format!("{}: {e}", p.display())))?;
        let net = read_checkpoint(&mut bytes.as_slice())?;
        unsafe { put(out, GcNetwork(net)) }
    })
}

/// Values the network takes: height * width * channels, channel-last.
///
/// # Safety
/// `net` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gc_network_input_len(net: *const GcNetwork) -> usize {
    unsafe { net.as_ref() }.map_or(0, |n| n.0.input_shape().len())
}

/// # Safety
/// `net` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gc_network_output_len(net: *const GcNetwork) -> usize {
    unsafe { net.as_ref() }.map_or(0, |n| n.0.output_shape().len())
}

/// Evaluation-mode forward pass on a channel-last input.
///
/// # Safety
/// `net` must be a live handle; `input` must hold `input_len` values and
/// `out` have room for `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn gc_network_predict(
    net: *const GcNetwork,
    input: *const f64,
    input_len: usize,
    out: *mut f64,
    out_len: usize,
) -> GcStatus {
    guard(|| {
        let n = unsafe { deref(net, "network") }?;
        let shape = n.0.input_shape();
        let x = unsafe { slice(input, input_len, "input") }?;
        if x.len() != shape.len() {
            return fail(GcStatus::Shape, format!("network takes {shape} = {} values, got {}", shape.len(), x.len()));
        }
        let y = n.0.predict(&Tensor::new(shape, x.to_vec())?)?;
        if out_len < y.len() {
            return fail(GcStatus::BufferTooSmall, format!("need {} values, buffer holds {out_len}", y.len()));
        }
        unsafe { slice_mut(out, y.len(), "out") }?.copy_from_slice(y.data());
        Ok(())
    })
}

/// # Safety
/// `net` must be a handle from this library, not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn gc_network_free(net: *mut GcNetwork) {
    unsafe { free(net) }
}

/// Load `pnet.ckpt`, `rnet.ckpt` and `onet.ckpt` from `dir` with default
/// thresholds.
///
/// # Safety
/// `dir` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_cascade_load(dir: *const c_char, out: *mut *mut GcCascade) -> GcStatus {
    guard(|| {
        let d = unsafe { to_path(dir) }?;
        let load = |name: &str| -> Result<Network, Fail> {
            let p = d.join(name);
            let bytes = std::fs::read(&p).map_err(|e| Fail(GcStatus::Io, format!("{}: {e}", p.display())))?;
            Ok(read_checkpoint(&mut bytes.as_slice())?)
        };
        let c = Cascade::new(
            load("pnet.ckpt")?,
            load("rnet.ckpt")?,
            load("onet.ckpt")?,
            make_bank(Preset::Detection),
            CascadeConfig::default(),
        )?;
        unsafe { put(out, GcCascade(c)) }
    })
}

/// Detect faces. Writes up to `cap` detections in score order and stores
/// the total count in `n_out`; returns `GC_STATUS_BUFFER_TOO_SMALL` when
/// `cap` is short.
///
/// # Safety
/// Handles must be live; `out` must have room for `cap` values; `n_out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_cascade_detect(
    cascade: *const GcCascade,
    image: *const GcImage,
    out: *mut GcDetection,
    cap: usize,
    n_out: *mut usize,
) -> GcStatus {
    guard(|| {
        let c = unsafe { deref(cascade, "cascade") }?;
        let img = unsafe { deref(image, "image") }?;
        if n_out.is_null() {
            return fail(GcStatus::NullPointer, "n_out is null");
        }
        let dets = c.0.detect(&img.0)?;
        unsafe { *n_out = dets.len() };
        let dst = unsafe { slice_mut(out, dets.len().min(cap), "out") }?;
        for (o, d) in dst.iter_mut().zip(&dets) {
            *o = GcDetection {
                bbox: from_bbox(&d.bbox),
                score: d.score,
            };
        }
        if dets.len() > cap {
            return fail(GcStatus::BufferTooSmall, format!("{} detections, room for {cap}", dets.len()));
        }
        Ok(())
    })
}

/// # Safety
/// `cascade` must be a handle from this library, not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn gc_cascade_free(cascade: *mut GcCascade) {
    unsafe { free(cascade) }
}
