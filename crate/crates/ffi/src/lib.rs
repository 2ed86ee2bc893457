//! C ABI over the areaflux library.
//!
//! Surfaces, maps and forms are opaque heap handles created by `af_*_new` and released by the
//! matching `af_*_free`. Every fallible call returns an [`AfStatus`]; on failure the message is
//! kept per thread and can be copied out with [`af_last_error`]. Maps and forms are built from
//! the same spec strings the command line accepts, e.g. `"shear:t=1"` or `"dual:0"`.
//!
//! Handles are immutable after creation and may be shared between threads.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use areaflux::cli::grammar::{build_form, build_map, Context};
use areaflux::flow::FlowDiffeo;
use areaflux::invariants::{calabi_disk, flux_lambda, local_calabi};
use areaflux::quadrature::QuadratureSpec;
use areaflux::surface::{standard_primitive, FormField, QuotientSurface, Rect, SurfaceKind};
use areaflux::transgression::{verify_transgression, TransgressionError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfStatus {
    Ok = 0,
    NullPointer = 1,
    /// A spec string, number or handle combination was rejected.
    InvalidArgument = 2,
    /// The operation is not defined on this surface kind.
    Unsupported = 3,
    /// A computation failed (non-finite values, diverging integrator, ...).
    Numerical = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfSurfaceKind {
    Disk = 0,
    Annulus = 1,
    Mobius = 2,
}

/// Quadrature for surface integrals: Gauss order and panel counts in x and y.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AfQuadrature {
    pub order: u32,
    pub panels_x: u32,
    pub panels_y: u32,
}

/// Both sides of the transgression identity for a pair of maps.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AfTransgression {
    pub f1: f64,
    pub f2: f64,
    pub f12: f64,
    /// `F(h1) + F(h2) − F(h1∘h2)`.
    pub lhs: f64,
    /// The Euler class cocycle of the boundary maps.
    pub rhs: f64,
}

/// A surface together with the defaults used to build maps and forms on it.
pub struct AfSurface {
    ctx: Context,
}

pub struct AfMap {
    map: FlowDiffeo,
}

pub struct AfForm {
    form: FormField,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(AfStatus, String);

impl Failure {
    fn invalid(msg: impl Into<String>) -> Self {
        Failure(AfStatus::InvalidArgument, msg.into())
    }

    fn numerical(msg: impl ToString) -> Self {
        Failure(AfStatus::Numerical, msg.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AfStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (AfStatus::Ok, String::new()),
        Ok(Err(Failure(s, m))) => (s, m),
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            (AfStatus::Panic, m)
        }
    };
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    status
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(AfStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(AfStatus::NullPointer, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(AfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::invalid(format!("{what} is not UTF-8")))
}

unsafe fn quadrature(q: *const AfQuadrature, default: QuadratureSpec) -> Result<QuadratureSpec, Failure> {
    let Some(q) = q.as_ref() else { return Ok(default) };
    QuadratureSpec::new(q.order as usize, q.panels_x as usize, q.panels_y as usize)
        .map_err(|e| Failure::invalid(e.to_string()))
}

fn finite(v: f64, what: &str) -> Result<f64, Failure> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::numerical(format!("{what} is not finite")))
    }
}

fn same_surface(a: QuotientSurface, b: QuotientSurface) -> Result<(), Failure> {
    if a == b {
        Ok(())
    } else {
        Err(Failure::invalid("handles live on different surfaces"))
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn af_status_string(status: AfStatus) -> *const c_char {
    let s: &'static CStr = match status {
        AfStatus::Ok => c"ok",
        AfStatus::NullPointer => c"null pointer",
        AfStatus::InvalidArgument => c"invalid argument",
        AfStatus::Unsupported => c"unsupported on this surface",
        AfStatus::Numerical => c"numerical failure",
        AfStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Copies the message of the last failed call on this thread into `buf` (NUL terminated,
/// truncated to `len`). Returns the full message length without the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn af_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Creates a surface. `half_width` is the strip half-width and is ignored for the disk.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn af_surface_new(kind: AfSurfaceKind, half_width: f64, out: *mut *mut AfSurface) -> AfStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let kind = match kind {
            AfSurfaceKind::Disk => SurfaceKind::Disk,
            AfSurfaceKind::Annulus => SurfaceKind::Annulus,
            AfSurfaceKind::Mobius => SurfaceKind::Mobius,
        };
        let surface = match kind {
            SurfaceKind::Disk => QuotientSurface::disk(),
            _ => QuotientSurface::new(kind, half_width).map_err(|e| Failure::invalid(e.to_string()))?,
        };
        let ctx = Context { surface, fields: BTreeMap::new(), steps: None, collar_depth: None, epsilon: 0.125 };
        *out = Box::into_raw(Box::new(AfSurface { ctx }));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from [`af_surface_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn af_surface_free(s: *mut AfSurface) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live surface handle and `area` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn af_surface_area(s: *const AfSurface, area: *mut f64) -> AfStatus {
    guard(|| {
        *out(area, "area")? = handle(s, "surface")?.ctx.surface.area();
        Ok(())
    })
}

/// Builds a map from a spec such as `"shear:t=1"` or `"twist:cx=0.5,cy=0,ax=0.2,ay=0.15,a=0.01"`.
///
/// # Safety
/// `s` must be a live surface handle, `spec` a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn af_map_new(s: *const AfSurface, spec: *const c_char, out: *mut *mut AfMap) -> AfStatus {
    guard(|| {
        let s = handle(s, "surface")?;
        let spec = text(spec, "spec")?;
        let out = self::out(out, "out")?;
        let built = build_map(spec, &s.ctx).map_err(Failure::invalid)?;
        *out = Box::into_raw(Box::new(AfMap { map: built.map }));
        Ok(())
    })
}

/// `outer ∘ inner` as a new handle.
///
/// # Safety
/// Both maps must be live handles and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn af_map_compose(outer: *const AfMap, inner: *const AfMap, out: *mut *mut AfMap) -> AfStatus {
    guard(|| {
        let (a, b) = (handle(outer, "outer")?, handle(inner, "inner")?);
        same_surface(a.map.surface(), b.map.surface())?;
        *self::out(out, "out")? = Box::into_raw(Box::new(AfMap { map: a.map.compose(&b.map) }));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a live map handle.
#[no_mangle]
pub unsafe extern "C" fn af_map_free(m: *mut AfMap) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Evaluates the map at `p[0..2]`. `image` receives two values; `jacobian`, if not null,
/// receives `Dg` row-major as four values.
///
/// # Safety
/// `p` and `image` must point to 2 doubles, `jacobian` to 4 or be null.
#[no_mangle]
pub unsafe extern "C" fn af_map_apply(m: *const AfMap, p: *const f64, image: *mut f64, jacobian: *mut f64) -> AfStatus {
    guard(|| {
        let m = handle(m, "map")?;
        let p = handle(p, "p")?;
        let image = out(image, "image")?;
        let q = [*p, *(p as *const f64).add(1)];
        let (g, d) = m.map.try_jet(q).map_err(Failure::numerical)?;
        *image = g[0];
        *(image as *mut f64).add(1) = g[1];
        if !jacobian.is_null() {
            for (k, v) in [d[0][0], d[0][1], d[1][0], d[1][1]].into_iter().enumerate() {
                *jacobian.add(k) = v;
            }
        }
        Ok(())
    })
}

/// Builds a closed 1-form from a spec such as `"dx"`, `"dual:0"` or `"form:p=1,q=0"`.
///
/// # Safety
/// `s` must be a live surface handle, `spec` a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn af_form_new(s: *const AfSurface, spec: *const c_char, out: *mut *mut AfForm) -> AfStatus {
    guard(|| {
        let s = handle(s, "surface")?;
        let spec = text(spec, "spec")?;
        let out = self::out(out, "out")?;
        let form = build_form(spec, &s.ctx, &QuadratureSpec::default()).map_err(Failure::invalid)?;
        *out = Box::into_raw(Box::new(AfForm { form }));
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a live form handle.
#[no_mangle]
pub unsafe extern "C" fn af_form_free(f: *mut AfForm) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Flux of `m` paired with `lambda`. `quad` may be null for the default rule.
///
/// # Safety
/// Handles must be live, `quad` null or valid, `value` valid.
#[no_mangle]
pub unsafe extern "C" fn af_flux(
    m: *const AfMap,
    lambda: *const AfForm,
    quad: *const AfQuadrature,
    value: *mut f64,
) -> AfStatus {
    guard(|| {
        let (m, l) = (handle(m, "map")?, handle(lambda, "lambda")?);
        let value = out(value, "value")?;
        let spec = quadrature(quad, QuadratureSpec::default())?;
        let s = m.map.surface();
        same_surface(s, l.form.surface())?;
        if s.kind == SurfaceKind::Disk {
            return Err(Failure(AfStatus::Unsupported, "the disk has no flux".into()));
        }
        let v = flux_lambda(&m.map, &l.form, &standard_primitive(s), &spec).map_err(Failure::numerical)?;
        *value = finite(v, "flux")?;
        Ok(())
    })
}

/// Calabi invariant: on the disk the global one, on strips the local one over the cover patch
/// `patch = [x0, x1, y0, y1]` with orientation sign `e_sign`.
///
/// # Safety
/// `m` must be live, `patch` null (disk only) or 4 doubles, `quad` null or valid, `value` valid.
#[no_mangle]
pub unsafe extern "C" fn af_calabi(
    m: *const AfMap,
    patch: *const f64,
    e_sign: f64,
    quad: *const AfQuadrature,
    value: *mut f64,
) -> AfStatus {
    guard(|| {
        let m = handle(m, "map")?;
        let value = out(value, "value")?;
        let s = m.map.surface();
        let eta = standard_primitive(s);
        let v = if s.kind == SurfaceKind::Disk {
            let spec = quadrature(quad, QuadratureSpec::new(16, 64, 64).expect("valid spec"))?;
            calabi_disk(&m.map, &eta, &spec).map_err(Failure::numerical)?
        } else {
            let p = handle(patch, "patch")?;
            let p = std::slice::from_raw_parts(p, 4);
            if e_sign.abs() != 1.0 {
                return Err(Failure::invalid("e_sign must be 1 or -1"));
            }
            let spec = quadrature(quad, QuadratureSpec::new(16, 64, 64).expect("valid spec"))?;
            let patch = Rect::new(p[0], p[1], p[2], p[3]);
            local_calabi(&m.map, patch, e_sign, &eta, &spec).map_err(Failure::numerical)?.value
        };
        *value = finite(v, "Calabi invariant")?;
        Ok(())
    })
}

/// Both sides of the transgression identity on the Möbius band.
///
/// # Safety
/// Handles must be live, `quad` null or valid, `result` valid.
#[no_mangle]
pub unsafe extern "C" fn af_transgression(
    h1: *const AfMap,
    h2: *const AfMap,
    lambda: *const AfForm,
    quad: *const AfQuadrature,
    result: *mut AfTransgression,
) -> AfStatus {
    guard(|| {
        let (a, b, l) = (handle(h1, "h1")?, handle(h2, "h2")?, handle(lambda, "lambda")?);
        let result = out(result, "result")?;
        let s = a.map.surface();
        same_surface(s, b.map.surface())?;
        same_surface(s, l.form.surface())?;
        let spec = quadrature(quad, QuadratureSpec::new(8, 8, 64).expect("valid spec"))?;
        let circle = QuadratureSpec::new(16, 64, 1).expect("valid spec");
        let r = verify_transgression(&a.map, &b.map, &l.form, &standard_primitive(s), &spec, &circle, f64::INFINITY)
            .map_err(|e| match e {
                TransgressionError::Surface(_) => Failure(AfStatus::Unsupported, e.to_string()),
                TransgressionError::NotBoundaryPreserving(_) => Failure::invalid(e.to_string()),
                e => Failure::numerical(e),
            })?;
        *result = AfTransgression { f1: r.f1, f2: r.f2, f12: r.f12, lhs: r.lhs, rhs: r.rhs };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_are_reported_per_call() {
        unsafe {
            let mut s = ptr::null_mut();
            assert_eq!(af_surface_new(AfSurfaceKind::Mobius, 0.5, &mut s), AfStatus::Ok);
            let mut m = ptr::null_mut();
            assert_eq!(af_map_new(s, c"bogus:1".as_ptr(), &mut m), AfStatus::InvalidArgument);
            assert!(m.is_null());
            let mut buf = [0 as c_char; 256];
            let n = af_last_error(buf.as_mut_ptr(), buf.len());
            assert!(n > 0);
            assert_eq!(af_map_new(s, c"id".as_ptr(), &mut m), AfStatus::Ok);
            assert_eq!(af_last_error(ptr::null_mut(), 0), 0);
            af_map_free(m);
            af_surface_free(s);
        }
    }

    #[test]
    fn null_handles_are_rejected() {
        unsafe {
            let mut v = 0.0;
            assert_eq!(af_flux(ptr::null(), ptr::null(), ptr::null(), &mut v), AfStatus::NullPointer);
            assert_eq!(af_surface_area(ptr::null(), &mut v), AfStatus::NullPointer);
            af_map_free(ptr::null_mut());
        }
    }

    #[test]
    fn status_strings_are_static() {
        let s = unsafe { CStr::from_ptr(af_status_string(AfStatus::Unsupported)) };
        assert_eq!(s.to_str().unwrap(), "unsupported on this surface");
    }
}
