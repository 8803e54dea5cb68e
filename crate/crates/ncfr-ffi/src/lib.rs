//! C ABI for `ncfr`.
//!
//! Realizations cross the boundary as opaque `NcfrRealization` handles.
//! Every entry point returns an `NcfrStatus`; on failure the message is kept
//! per thread and read back with [`ncfr_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ncfr::linalg::CMat;
use ncfr::sarason::{self, Verdict};
use ncfr::{fejerriesz, ncparse, Complex64, FMRealization, MatrixTuple, NcError, Word};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NcfrStatus {
    Ok = 0,
    OrderExceeded = 1,
    SingularPencil = 2,
    SingularAtZero = 3,
    NotPure = 4,
    Indeterminate = 5,
    NotContractive = 6,
    InnerSymbol = 7,
    NotPositive = 8,
    NotHermitian = 9,
    CapExceeded = 10,
    SyntaxError = 11,
    UnknownVariable = 12,
    DimensionMismatch = 13,
    InvalidInput = 14,
    NullPointer = 15,
    Panic = 16,
}

impl From<&NcError> for NcfrStatus {
    fn from(e: &NcError) -> Self {
        match e {
            NcError::OrderExceeded { .. } => NcfrStatus::OrderExceeded,
            NcError::SingularPencil { .. } => NcfrStatus::SingularPencil,
            NcError::SingularAtZero { .. } => NcfrStatus::SingularAtZero,
            NcError::NotPure(_) => NcfrStatus::NotPure,
            NcError::Indeterminate(_) => NcfrStatus::Indeterminate,
            NcError::NotContractive(_) => NcfrStatus::NotContractive,
            NcError::InnerSymbol => NcfrStatus::InnerSymbol,
            NcError::NotPositive { .. } => NcfrStatus::NotPositive,
            NcError::NotHermitian { .. } => NcfrStatus::NotHermitian,
            NcError::CapExceeded { .. } => NcfrStatus::CapExceeded,
            NcError::SyntaxError { .. } => NcfrStatus::SyntaxError,
            NcError::UnknownVariable { .. } => NcfrStatus::UnknownVariable,
            NcError::DimensionMismatch(_) => NcfrStatus::DimensionMismatch,
            NcError::InvalidInput(_) => NcfrStatus::InvalidInput,
        }
    }
}

/// Verdict of [`ncfr_classify`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NcfrVerdict {
    Inner = 0,
    NonCe = 1,
    NotContractive = 2,
    Indeterminate = 3,
}

/// Defects measured by [`ncfr_verify_column`] and [`ncfr_verify_factor`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NcfrReport {
    pub colligation_defect_iso: f64,
    pub colligation_defect_coiso: f64,
    pub coefficient_defect: f64,
    pub order: usize,
    pub pass: bool,
}

/// Opaque finite-dimensional realization `D + C (I − Σ Z_j ⊗ A_j)⁻¹ Σ Z_j ⊗ B_j`.
pub struct NcfrRealization(FMRealization);

struct LastError {
    message: CString,
    location: i64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn set_error(message: String, location: Option<usize>) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    let location = location.map_or(-1, |p| p as i64);
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(LastError { message, location }));
}

fn fail(status: NcfrStatus, message: impl Into<String>) -> NcfrStatus {
    set_error(message.into(), None);
    status
}

fn guard<F: FnOnce() -> Result<(), NcfrStatus>>(f: F) -> NcfrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NcfrStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(NcfrStatus::Panic, format!("panic: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, NcfrStatus>;
}

impl<T> OrStatus<T> for ncfr::Result<T> {
    fn or_status(self) -> Result<T, NcfrStatus> {
        self.map_err(|e| {
            set_error(e.to_string(), e.location());
            NcfrStatus::from(&e)
        })
    }
}

unsafe fn handle<'a>(r: *const NcfrRealization) -> Result<&'a FMRealization, NcfrStatus> {
    r.as_ref().map(|h| &h.0).ok_or_else(|| fail(NcfrStatus::NullPointer, "null realization handle"))
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, NcfrStatus> {
    if s.is_null() {
        return Err(fail(NcfrStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s).to_str().map_err(|e| fail(NcfrStatus::InvalidInput, format!("input is not UTF-8: {e}")))
}

fn non_null<T>(p: *mut T) -> Result<*mut T, NcfrStatus> {
    if p.is_null() {
        Err(fail(NcfrStatus::NullPointer, "null output pointer"))
    } else {
        Ok(p)
    }
}

unsafe fn emit(out: *mut *mut NcfrRealization, r: FMRealization) -> Result<(), NcfrStatus> {
    *out = Box::into_raw(Box::new(NcfrRealization(r)));
    Ok(())
}

fn report(r: &sarason::ColumnReport) -> NcfrReport {
    NcfrReport {
        colligation_defect_iso: r.colligation_defect_iso,
        colligation_defect_coiso: r.colligation_defect_coiso,
        coefficient_defect: r.coefficient_defect,
        order: r.order,
        pass: r.pass,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ncfr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL.
///
/// After [`ncfr_classify`] returns an uncertified verdict it holds the reason instead.
///
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn ncfr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |l| l.message.as_ptr()))
}

/// Byte offset into the input text of the last parse error, or -1.
#[no_mangle]
pub extern "C" fn ncfr_last_error_location() -> i64 {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(-1, |l| l.location))
}

/// Parses and realizes an expression in `z1..zd`.
///
/// # Safety
/// `text_ptr` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ncfr_parse(text_ptr: *const c_char, d: usize, out: *mut *mut NcfrRealization) -> NcfrStatus {
    guard(|| {
        let out = non_null(out)?;
        let src = text(text_ptr)?;
        emit(out, ncparse::realize_str(src, d).or_status()?)
    })
}

/// Reads a realization from its JSON form `{d, n, A, B, C, D}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ncfr_realization_from_json(json: *const c_char, out: *mut *mut NcfrRealization) -> NcfrStatus {
    guard(|| {
        let out = non_null(out)?;
        let v: serde_json::Value =
            serde_json::from_str(text(json)?).map_err(|e| fail(NcfrStatus::InvalidInput, e.to_string()))?;
        emit(out, FMRealization::from_json(&v).or_status()?)
    })
}

/// Writes the JSON form of `r` to `*out`; release it with [`ncfr_string_free`].
///
/// # Safety
/// `r` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ncfr_realization_to_json(r: *const NcfrRealization, out: *mut *mut c_char) -> NcfrStatus {
    guard(|| {
        let out = non_null(out)?;
        let s = handle(r)?.to_json().to_string();
        *out = CString::new(s).map_err(|e| fail(NcfrStatus::InvalidInput, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ncfr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `r` must be NULL or a handle returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ncfr_realization_free(r: *mut NcfrRealization) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Alphabet size `d` and state dimension `n`.
///
/// # Safety
/// `r` must be a live handle; `d` and `n` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ncfr_realization_dims(r: *const NcfrRealization, d: *mut usize, n: *mut usize) -> NcfrStatus {
    guard(|| {
        let f = handle(r)?;
        if !d.is_null() {
            *d = f.d();
        }
        if !n.is_null() {
            *n = f.n();
        }
        Ok(())
    })
}

/// Coefficient of the word `letters[0..len]` (letters are 1-based), written as `out[0] + i out[1]`.
///
/// # Safety
/// `letters` must point to `len` bytes (or be NULL when `len == 0`) and `out` to two doubles.
#[no_mangle]
pub unsafe extern "C" fn ncfr_coeff(
    r: *const NcfrRealization,
    letters: *const u8,
    len: usize,
    out: *mut f64,
) -> NcfrStatus {
    guard(|| {
        let f = handle(r)?;
        let out = non_null(out)?;
        let word = if len == 0 {
            Word::empty()
        } else if letters.is_null() {
            return Err(fail(NcfrStatus::NullPointer, "null word"));
        } else {
            Word::new(std::slice::from_raw_parts(letters, len).to_vec())
        };
        word.check(f.d()).or_status()?;
        let c = f.coeff(&word);
        *out = c.re;
        *out.add(1) = c.im;
        Ok(())
    })
}

/// Evaluates at a tuple of `d` square matrices of size `n`.
///
/// `z` holds `d·n·n` complex entries as interleaved `(re, im)` doubles, each
/// matrix row-major; `out` receives `n·n` complex entries in the same layout.
///
/// # Safety
/// `z` must point to `2·d·n·n` doubles and `out` to `2·n·n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ncfr_eval(r: *const NcfrRealization, z: *const f64, n: usize, out: *mut f64) -> NcfrStatus {
    guard(|| {
        let f = handle(r)?;
        let out = non_null(out)?;
        if z.is_null() {
            return Err(fail(NcfrStatus::NullPointer, "null point"));
        }
        if n == 0 {
            return Err(fail(NcfrStatus::InvalidInput, "matrix size must be positive"));
        }
        let raw = std::slice::from_raw_parts(z, 2 * f.d() * n * n);
        let mats = raw
            .chunks_exact(2 * n * n)
            .map(|m| CMat::from_row_iterator(n, n, m.chunks_exact(2).map(|p| Complex64::new(p[0], p[1]))))
            .collect();
        let value = f.eval(&MatrixTuple::new(mats).or_status()?).or_status()?;
        let dst = std::slice::from_raw_parts_mut(out, 2 * n * n);
        for i in 0..n {
            for j in 0..n {
                let v = value[(i, j)];
                dst[2 * (i * n + j)] = v.re;
                dst[2 * (i * n + j) + 1] = v.im;
            }
        }
        Ok(())
    })
}

/// Minimal realization of the same series.
///
/// # Safety
/// `r` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ncfr_minimize(r: *const NcfrRealization, tol: f64, out: *mut *mut NcfrRealization) -> NcfrStatus {
    guard(|| {
        let out = non_null(out)?;
        let f = handle(r)?;
        if !(tol.is_finite() && tol > 0.0) {
            return Err(fail(NcfrStatus::InvalidInput, "tolerance must be positive"));
        }
        emit(out, f.minimize(tol))
    })
}

/// Classifies a contractive `b`; `a0_squared` receives `|a(0)|²`.
///
/// An uncertified verdict is not an error: the call returns `Ok` and the reason
/// is readable through [`ncfr_last_error_message`].
///
/// # Safety
/// `b` must be a live handle; `verdict` and `a0_squared` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ncfr_classify(
    b: *const NcfrRealization,
    verdict: *mut NcfrVerdict,
    a0_squared: *mut f64,
) -> NcfrStatus {
    guard(|| {
        let f = handle(b)?;
        let (verdict, a0_squared) = (non_null(verdict)?, non_null(a0_squared)?);
        let c = sarason::classify(f);
        *verdict = match c.verdict {
            Verdict::Inner => NcfrVerdict::Inner,
            Verdict::NonCE => NcfrVerdict::NonCe,
            Verdict::NotContractive => NcfrVerdict::NotContractive,
            Verdict::Indeterminate => NcfrVerdict::Indeterminate,
        };
        *a0_squared = c.a0_squared;
        if let Some(detail) = c.evidence.detail {
            set_error(detail, None);
        }
        Ok(())
    })
}

/// Outer Sarason function `a` of `b`.
///
/// # Safety
/// `b` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ncfr_sarason(b: *const NcfrRealization, out: *mut *mut NcfrRealization) -> NcfrStatus {
    guard(|| {
        let out = non_null(out)?;
        emit(out, sarason::sarason(handle(b)?).or_status()?)
    })
}

/// Checks that the column `(b; a)` is inner up to word length `n`.
///
/// # Safety
/// `b` and `a` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ncfr_verify_column(
    b: *const NcfrRealization,
    a: *const NcfrRealization,
    n: usize,
    tol: f64,
    out: *mut NcfrReport,
) -> NcfrStatus {
    guard(|| {
        let out = non_null(out)?;
        *out = report(&sarason::verify_column(handle(b)?, handle(a)?, n, tol).or_status()?);
        Ok(())
    })
}

/// Outer factor `f` with Toeplitz symbol `f* f` equal to that of the Herglotz function `h`.
///
/// # Safety
/// `h` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ncfr_factor_toeplitz(h: *const NcfrRealization, out: *mut *mut NcfrRealization) -> NcfrStatus {
    guard(|| {
        let out = non_null(out)?;
        emit(out, fejerriesz::factor_toeplitz(handle(h)?).or_status()?)
    })
}

/// Checks a factor returned by [`ncfr_factor_toeplitz`] up to word length `n`.
///
/// # Safety
/// `h` and `f` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ncfr_verify_factor(
    h: *const NcfrRealization,
    f: *const NcfrRealization,
    n: usize,
    tol: f64,
    out: *mut NcfrReport,
) -> NcfrStatus {
    guard(|| {
        let out = non_null(out)?;
        *out = report(&fejerriesz::verify_factor(handle(h)?, handle(f)?, n, tol).or_status()?);
        Ok(())
    })
}

/// Outer factor of `r* r` for a rational `r`.
///
/// # Safety
/// `r` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ncfr_square_factor(r: *const NcfrRealization, out: *mut *mut NcfrRealization) -> NcfrStatus {
    guard(|| {
        let out = non_null(out)?;
        emit(out, fejerriesz::square_factor(handle(r)?).or_status()?)
    })
}
