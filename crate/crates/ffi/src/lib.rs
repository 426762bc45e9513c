//! C ABI over `zbdetect`.
//!
//! Every fallible function returns a [`ZbStatus`]; on failure the message is
//! kept per thread and read back with [`zb_last_error_message`]. Handles are
//! opaque, created by a `*_new`/`*_load` function and released with the
//! matching `*_free`, which accepts null.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use zbdetect::detector::{predict_rates_from_accuracy, BernoulliModel, BinaryDetector, CutoffProfile};
use zbdetect::nn::{argmax, Matrix, Network};
use zbdetect::seqdetect::{llr, CusumDetector, EwmaDetector, SequentialDetector, WindowDetector};
use zbdetect::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Degenerate = 4,
    HeadMismatch = 5,
    Io = 6,
    Parse = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> ZbStatus {
    match err {
        Error::InvalidArgument(_) | Error::EmptySet(_) | Error::OverlappingClasses(_) => ZbStatus::InvalidArgument,
        Error::DimensionMismatch { .. } | Error::LayoutMismatch { .. } => ZbStatus::DimensionMismatch,
        Error::DegenerateBurst
        | Error::DegenerateDirection(_)
        | Error::DegenerateLikelihood { .. }
        | Error::DegeneratePosterior
        | Error::Divergence { .. }
        | Error::EmptyClass(_) => ZbStatus::Degenerate,
        Error::HeadMismatch(_) => ZbStatus::HeadMismatch,
        Error::Io { .. } => ZbStatus::Io,
        Error::Parse { .. } | Error::FormatVersion(_) | Error::Json(_) => ZbStatus::Parse,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (ZbStatus, String)>) -> ZbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ZbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside zbdetect".into());
            ZbStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, (ZbStatus, String)>;
}

impl<T> OrStatus<T> for zbdetect::Result<T> {
    fn or_status(self) -> Result<T, (ZbStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (ZbStatus, String) {
    (ZbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, (ZbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (ZbStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(Path::new(s))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (ZbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (ZbStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn zb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

pub struct ZbModel(Network);

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zb_model_load(path: *const c_char, out: *mut *mut ZbModel) -> ZbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let net = Network::load(path_arg(path, "path")?).or_status()?;
        *out = boxed(ZbModel(net));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`zb_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zb_model_free(model: *mut ZbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input feature length, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zb_model_input_dim(model: *const ZbModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.input_dim())
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zb_model_n_classes(model: *const ZbModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n_classes())
}

/// 1 for a zero-bias head, 0 for a regular dense head or a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zb_model_is_zero_bias(model: *const ZbModel) -> i32 {
    model.as_ref().map_or(0, |m| i32::from(m.0.zero_bias_head().is_some()))
}

/// Predicted class of one feature vector of length [`zb_model_input_dim`].
///
/// # Safety
/// `features` must be valid for `len` reads; `class_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn zb_model_predict(
    model: *const ZbModel,
    features: *const f64,
    len: usize,
    class_out: *mut usize,
) -> ZbStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let x = slice_arg(features, len, "features")?;
        let out = out_arg(class_out, "class_out")?;
        let batch = Matrix::from_vec(1, len, x.to_vec()).or_status()?;
        let logits = model.0.logits(&batch).or_status()?;
        *out = argmax(logits.row(0));
        Ok(())
    })
}

pub struct ZbDetector(BinaryDetector);

/// Loads a zero-bias model and its cut-off profile as a binary detector.
///
/// # Safety
/// Both paths must be NUL-terminated strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zb_detector_load(
    model_path: *const c_char,
    profile_path: *const c_char,
    out: *mut *mut ZbDetector,
) -> ZbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let net = Network::load(path_arg(model_path, "model_path")?).or_status()?;
        let profile = CutoffProfile::load(path_arg(profile_path, "profile_path")?).or_status()?;
        *out = boxed(ZbDetector(BinaryDetector::new(net, profile).or_status()?));
        Ok(())
    })
}

/// # Safety
/// `detector` must be null or a handle from [`zb_detector_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zb_detector_free(detector: *mut ZbDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Writes 1 to `alarm_out` when the record matches no known class, else 0.
///
/// # Safety
/// `features` must be valid for `len` reads; `alarm_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn zb_detector_detect(
    detector: *const ZbDetector,
    features: *const f64,
    len: usize,
    alarm_out: *mut u8,
) -> ZbStatus {
    guard(|| {
        let det = detector.as_ref().ok_or_else(|| null("detector"))?;
        let x = slice_arg(features, len, "features")?;
        let out = out_arg(alarm_out, "alarm_out")?;
        *out = det.0.detect(x).or_status()?;
        Ok(())
    })
}

/// Rates predicted from training accuracy.
///
/// # Safety
/// `fpr_out` and `tpr_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn zb_predict_rates_from_accuracy(acc: f64, fpr_out: *mut f64, tpr_out: *mut f64) -> ZbStatus {
    guard(|| {
        let fpr_out = out_arg(fpr_out, "fpr_out")?;
        let tpr_out = out_arg(tpr_out, "tpr_out")?;
        let m = predict_rates_from_accuracy(acc).or_status()?;
        *fpr_out = m.fpr;
        *tpr_out = m.tpr;
        Ok(())
    })
}

/// Log-likelihood ratio of detector output `bit` under the given rates.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zb_llr(bit: u8, fpr: f64, tpr: f64, out: *mut f64) -> ZbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = BernoulliModel::new(fpr, tpr).or_status()?;
        *out = llr(bit, &model).or_status()?;
        Ok(())
    })
}

/// A CUSUM, EWMA or sliding-window change detector.
pub struct ZbSequential(Box<dyn SequentialDetector + Send>);

unsafe fn new_sequential(
    out: *mut *mut ZbSequential,
    build: impl FnOnce() -> zbdetect::Result<Box<dyn SequentialDetector + Send>>,
) -> ZbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = boxed(ZbSequential(build().or_status()?));
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zb_cusum_new(fpr: f64, tpr: f64, h: f64, out: *mut *mut ZbSequential) -> ZbStatus {
    new_sequential(out, || {
        Ok(Box::new(CusumDetector::new(BernoulliModel::new(fpr, tpr)?, h)?))
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zb_ewma_new(
    fpr: f64,
    tpr: f64,
    lambda: f64,
    l: f64,
    out: *mut *mut ZbSequential,
) -> ZbStatus {
    new_sequential(out, || {
        Ok(Box::new(EwmaDetector::new(BernoulliModel::new(fpr, tpr)?, lambda, l)?))
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zb_window_new(length: usize, threshold: f64, out: *mut *mut ZbSequential) -> ZbStatus {
    new_sequential(out, || Ok(Box::new(WindowDetector::new(length, threshold)?)))
}

/// Feeds one detector output; writes 1 to `alarm_out` on alarm.
///
/// # Safety
/// `detector` must be a live handle and `alarm_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zb_sequential_step(detector: *mut ZbSequential, bit: u8, alarm_out: *mut u8) -> ZbStatus {
    guard(|| {
        let det = detector.as_mut().ok_or_else(|| null("detector"))?;
        let out = out_arg(alarm_out, "alarm_out")?;
        *out = u8::from(det.0.step(bit));
        Ok(())
    })
}

/// # Safety
/// `detector` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zb_sequential_reset(detector: *mut ZbSequential) {
    if let Some(det) = detector.as_mut() {
        det.0.reset();
    }
}

/// # Safety
/// `detector` must be null or a handle from a `zb_*_new` constructor not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zb_sequential_free(detector: *mut ZbSequential) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}
