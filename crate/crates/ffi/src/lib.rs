//! C interface to trained ray-basis models and the reference field oracle.
//!
//! Every fallible function returns an [`RbnnStatus`]; on failure a message is
//! kept per thread and can be read with [`rbnn_last_error`]. Results are
//! written through out-pointers only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::path::Path;
use std::ptr;

use rbnn::environment::Environment;
use rbnn::error::Error;
use rbnn::geometry::Vec3;
use rbnn::model::{rayleigh_coeff, RayBasisModel};
use rbnn::oracle::field_ism;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbnnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Receiver on top of an (image) source.
    Singularity = 3,
    Parse = 4,
    Io = 5,
    Domain = 6,
    Panic = 7,
}

/// Opaque trained model.
pub struct RbnnModel {
    inner: RayBasisModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RbnnStatus {
    match e {
        Error::InvalidArgument(_) => RbnnStatus::InvalidArgument,
        Error::Singularity(_) => RbnnStatus::Singularity,
        Error::Io(_) => RbnnStatus::Io,
        Error::Csv(_) | Error::Json(_) => RbnnStatus::Parse,
        _ => RbnnStatus::Domain,
    }
}

fn guard<F: FnOnce() -> Result<(), (RbnnStatus, String)> + UnwindSafe>(f: F) -> RbnnStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => RbnnStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RbnnStatus::Panic
        }
    }
}

fn lift<T>(r: rbnn::error::Result<T>) -> Result<T, (RbnnStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RbnnStatus, String) {
    (RbnnStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RbnnStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (RbnnStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn model_ref<'a>(m: *const RbnnModel) -> Result<&'a RayBasisModel, (RbnnStatus, String)> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn point(p: *const f64, what: &str) -> Result<Vec3, (RbnnStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(Vec3::new(*p, *p.add(1), *p.add(2)))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rbnn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rbnn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a model checkpoint from JSON text.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rbnn_model_from_json(json: *const c_char, out: *mut *mut RbnnModel) -> RbnnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = lift(RayBasisModel::from_json(c_str(json, "json")?))?;
        *out = Box::into_raw(Box::new(RbnnModel { inner }));
        Ok(())
    })
}

/// Loads a model checkpoint file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rbnn_model_load(path: *const c_char, out: *mut *mut RbnnModel) -> RbnnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = lift(RayBasisModel::load(Path::new(c_str(path, "path")?)))?;
        *out = Box::into_raw(Box::new(RbnnModel { inner }));
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rbnn_model_free(model: *mut RbnnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rbnn_model_num_params(model: *const RbnnModel, out: *mut usize) -> RbnnStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.num_params();
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rbnn_model_n_ray(model: *const RbnnModel, out: *mut usize) -> RbnnStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.n_ray();
        Ok(())
    })
}

/// Field amplitude at one point `xyz[3]`.
///
/// # Safety
/// `xyz` must point to 3 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rbnn_predict(model: *const RbnnModel, xyz: *const f64, out: *mut f64) -> RbnnStatus {
    guard(|| {
        let m = model_ref(model)?;
        let p = point(xyz, "xyz")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lift(m.predict(p))?;
        Ok(())
    })
}

/// Amplitudes at `n` points stored as `xyz[3 * n]`. Singular points get NaN
/// and the call still succeeds; any other failure aborts the batch.
///
/// # Safety
/// `xyz` must hold `3 * n` doubles and `out` room for `n`.
#[no_mangle]
pub unsafe extern "C" fn rbnn_predict_many(model: *const RbnnModel, xyz: *const f64, n: usize, out: *mut f64) -> RbnnStatus {
    guard(|| {
        let m = model_ref(model)?;
        if n == 0 {
            return Ok(());
        }
        if xyz.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let coords = std::slice::from_raw_parts(xyz, 3 * n);
        let points: Vec<Vec3> = coords.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        let results = lift(m.predict_many(&points))?;
        let dst = std::slice::from_raw_parts_mut(out, n);
        let mut values = Vec::with_capacity(n);
        for r in results {
            values.push(match r {
                Ok(v) => v,
                Err(Error::Singularity(_)) => f64::NAN,
                Err(e) => return Err(lift::<()>(Err(e)).unwrap_err()),
            });
        }
        dst.copy_from_slice(&values);
        Ok(())
    })
}

/// Complex image-source field for an environment given as JSON.
///
/// # Safety
/// `environment_json` must be NUL-terminated, `source` and `receiver` must
/// hold 3 doubles, `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rbnn_field_ism(
    environment_json: *const c_char,
    frequency: f64,
    source: *const f64,
    receiver: *const f64,
    max_order: i64,
    re: *mut f64,
    im: *mut f64,
) -> RbnnStatus {
    guard(|| {
        let env: Environment = serde_json::from_str(c_str(environment_json, "environment_json")?)
            .map_err(|e| (RbnnStatus::Parse, e.to_string()))?;
        let s = point(source, "source")?;
        let r = point(receiver, "receiver")?;
        if re.is_null() || im.is_null() {
            return Err(null("out"));
        }
        let p = lift(field_ism(&env, frequency, s, r, max_order))?;
        *re = p.re;
        *im = p.im;
        Ok(())
    })
}

/// Rayleigh reflection coefficient at incidence `gamma` (radians from the
/// normal).
///
/// # Safety
/// `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rbnn_rayleigh_coeff(gamma: f64, rho_r: f64, c_r: f64, delta: f64, re: *mut f64, im: *mut f64) -> RbnnStatus {
    guard(|| {
        if re.is_null() || im.is_null() {
            return Err(null("out"));
        }
        let g = lift(rayleigh_coeff(gamma, rho_r, c_r, delta))?;
        *re = g.re;
        *im = g.im;
        Ok(())
    })
}
