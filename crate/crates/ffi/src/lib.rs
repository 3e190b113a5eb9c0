//! C interface: opaque handles for configurations, meshes and finished
//! runs. Every function returns an [`SfStatus`]; the message of the last
//! failure on the calling thread is available from [`sf_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use shapeforge::config::RunConfig;
use shapeforge::driver::{self, RunOutput};
use shapeforge::mesh::MeshLevel;
use shapeforge::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Mesh = 5,
    Solver = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Scalar results of a finished run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SfSummary {
    pub j_aug: f64,
    pub j: f64,
    pub g_def_norm: f64,
    pub min_det: f64,
    pub inverted: usize,
    pub steps: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    /// True when a solver stage stopped the run early.
    pub failed: bool,
}

pub struct SfConfig {
    inner: RunConfig,
}

pub struct SfMesh {
    inner: MeshLevel,
}

pub struct SfRun {
    inner: RunOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SfStatus {
    match e.root() {
        Error::Config(_) | Error::Parse { .. } => SfStatus::Config,
        Error::Io { .. } => SfStatus::Io,
        Error::InvalidGeometry(_) | Error::MissingMarker(_) | Error::NonConforming(_) => SfStatus::Mesh,
        Error::InvalidArgument(_) | Error::SpaceMismatch(_) => SfStatus::InvalidArgument,
        _ => SfStatus::Solver,
    }
}

struct Failure(SfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfStatus::Ok,
        Ok(Err(Failure(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SfStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SfStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize, needed: *mut usize) -> Result<(), Failure> {
    if !needed.is_null() {
        *needed = values.len();
    }
    if buf.is_null() && len == 0 {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < values.len() {
        return Err(Failure(SfStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", values.len())));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_config_default(out: *mut *mut SfConfig) -> SfStatus {
    guard(|| put(out, SfConfig { inner: RunConfig::default() }))
}

/// # Safety
/// `path` must be a nul-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_config_from_file(path: *const c_char, out: *mut *mut SfConfig) -> SfStatus {
    guard(|| {
        let p = as_str(path, "path")?;
        let inner = RunConfig::from_file(Path::new(p))?;
        put(out, SfConfig { inner })
    })
}

/// Sets one `key = value` entry and revalidates. Relative paths resolve
/// against the working directory.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn sf_config_set(cfg: *mut SfConfig, key: *const c_char, value: *const c_char) -> SfStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("config"))?;
        let (k, v) = (as_str(key, "key")?, as_str(value, "value")?);
        let mut next = c.inner.clone();
        next.set(k, v, Path::new(""))?;
        next.validate()?;
        c.inner = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sf_config_free(cfg: *mut SfConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Finest mesh of the hierarchy described by `cfg`.
///
/// # Safety
/// `cfg` must come from this library, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_mesh_build(cfg: *const SfConfig, out: *mut *mut SfMesh) -> SfStatus {
    guard(|| {
        let c = &as_ref(cfg, "config")?.inner;
        let disc = driver::build_discretization(c, c.refinements)?;
        put(out, SfMesh { inner: disc.fine_mesh().clone() })
    })
}

/// # Safety
/// `mesh` must come from this library; `vertices` and `triangles` may be null.
#[no_mangle]
pub unsafe extern "C" fn sf_mesh_counts(mesh: *const SfMesh, vertices: *mut usize, triangles: *mut usize) -> SfStatus {
    guard(|| {
        let m = &as_ref(mesh, "mesh")?.inner;
        if !vertices.is_null() {
            *vertices = m.num_vertices();
        }
        if !triangles.is_null() {
            *triangles = m.num_triangles();
        }
        Ok(())
    })
}

/// Interleaved vertex coordinates. `needed` receives 2·nv; pass a null
/// buffer with `len = 0` to query the size.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_mesh_vertices(mesh: *const SfMesh, buf: *mut f64, len: usize, needed: *mut usize) -> SfStatus {
    guard(|| {
        let m = &as_ref(mesh, "mesh")?.inner;
        let xy: Vec<f64> = m.vertices.iter().flat_map(|p| [p[0], p[1]]).collect();
        copy_out(&xy, buf, len, needed)
    })
}

/// # Safety
/// `mesh` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sf_mesh_free(mesh: *mut SfMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Runs the optimization and writes its artifacts to the configured
/// output directory.
///
/// # Safety
/// `cfg` must come from this library, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_run(cfg: *const SfConfig, out: *mut *mut SfRun) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output handle"));
        }
        let c = &as_ref(cfg, "config")?.inner;
        let inner = driver::run_optimization(c)?;
        put(out, SfRun { inner })
    })
}

/// # Safety
/// `run` must come from this library, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_run_summary(run: *const SfRun, out: *mut SfSummary) -> SfStatus {
    guard(|| {
        let s = &as_ref(run, "run")?.inner.summary;
        let out = out.as_mut().ok_or_else(|| null("summary"))?;
        *out = SfSummary {
            j_aug: s.j_aug,
            j: s.j,
            g_def_norm: s.g_def.iter().map(|g| g * g).sum::<f64>().sqrt(),
            min_det: s.min_det,
            inverted: s.inverted,
            steps: s.steps,
            outer_iterations: s.outer_iterations,
            converged: s.converged,
            failed: s.failure.is_some(),
        };
        Ok(())
    })
}

/// Final displacement w, interleaved per finest-level vertex.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_run_displacement(run: *const SfRun, buf: *mut f64, len: usize, needed: *mut usize) -> SfStatus {
    guard(|| {
        let r = &as_ref(run, "run")?.inner;
        copy_out(&r.result.iterate.eval.forward.extension.w.values, buf, len, needed)
    })
}

/// Final η, one value per finest-level vertex.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_run_eta(run: *const SfRun, buf: *mut f64, len: usize, needed: *mut usize) -> SfStatus {
    guard(|| {
        let r = &as_ref(run, "run")?.inner;
        copy_out(&r.result.iterate.control.eta, buf, len, needed)
    })
}

/// # Safety
/// `run` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sf_run_free(run: *mut SfRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
