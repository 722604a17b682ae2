//! C ABI over `discrete_conformal`.
//!
//! Meshes are opaque handles created by `dc_mesh_*` constructors and released with
//! [`dc_mesh_free`]. Every fallible call returns a [`DcStatus`]; the message of the most recent
//! failure on the calling thread is available from [`dc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use discrete_conformal::bounds::{delaunay_degradation_scan, quality_report, DEFAULT_EDGE_EPS};
use discrete_conformal::experiments::harmonic_initial_map;
use discrete_conformal::laplacian::{assemble_laplacian, conformal_energy, CotanLaplacian, Parameterization, RhoMode};
use discrete_conformal::mesh::{
    gen_disk, gen_hemisphere, load_mesh, save_mesh, HemisphereMesh, HemisphereSpec, TriMesh, Vec2,
};
use discrete_conformal::minimizer::{minimize, normalize_map, prepare_initial_map, relative_error, MinimizerOptions};
use discrete_conformal::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Numerical = 4,
    Panic = 5,
}

/// Area-ratio weighting of the cotangent weights.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcRho {
    Unit = 0,
    Analytic = 1,
    Quadrature = 2,
}

/// Opaque mesh handle.
pub struct DcMesh {
    mesh: TriMesh,
    hemisphere: Option<HemisphereMesh>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcEnergy {
    pub dirichlet: f64,
    pub area: f64,
    pub conformal: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcSolveOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub relative_tolerance: f64,
    pub rho: DcRho,
    /// Degree of the triangle rule when `rho` is `Quadrature`.
    pub quadrature_degree: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcSolveSummary {
    pub iterations: usize,
    pub converged: bool,
    pub folds: usize,
    pub energy: DcEnergy,
    /// Relative error against the exact map on generated hemispheres, NaN otherwise.
    pub relative_error: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcQuality {
    pub max_d_over_sin: f64,
    pub max_d_over_r: f64,
    pub h: f64,
    pub flagged: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> DcStatus {
    match err {
        Error::Io(_) | Error::Parse { .. } | Error::Csv(_) => DcStatus::Io,
        Error::InvalidParameter(_)
        | Error::InvalidTopology(_)
        | Error::DimensionMismatch { .. }
        | Error::DegenerateCoefficient(_) => DcStatus::InvalidArgument,
        _ => DcStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), DcStatus>) -> DcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            DcStatus::Panic
        }
    }
}

fn fail(err: Error) -> DcStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(what: &str) -> DcStatus {
    set_error(format!("{what} is null"));
    DcStatus::NullPointer
}

unsafe fn mesh_ref<'a>(mesh: *const DcMesh) -> Result<&'a DcMesh, DcStatus> {
    mesh.as_ref().ok_or_else(|| null("mesh"))
}

unsafe fn store(out: *mut *mut DcMesh, mesh: DcMesh) -> Result<(), DcStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(mesh));
    Ok(())
}

unsafe fn path_arg(path: *const c_char) -> Result<String, DcStatus> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path).to_str().map(str::to_owned).map_err(|_| {
        set_error("path is not valid UTF-8");
        DcStatus::InvalidArgument
    })
}

fn from_hemisphere(h: HemisphereMesh) -> DcMesh {
    DcMesh {
        mesh: h.mesh.clone(),
        hemisphere: Some(h),
    }
}

/// Message of the last failure on this thread; empty if none. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn dc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Hemisphere with `n` latitude rows and `m` longitude columns.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn dc_mesh_hemisphere(n: usize, m: usize, out: *mut *mut DcMesh) -> DcStatus {
    guard(|| {
        let h = HemisphereSpec::new(n, m)
            .and_then(|s| gen_hemisphere(&s))
            .map_err(fail)?;
        store(out, from_hemisphere(h))
    })
}

/// Hemisphere with `m = max(3, floor(n^r))`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn dc_mesh_hemisphere_exponent(n: usize, r: f64, out: *mut *mut DcMesh) -> DcStatus {
    guard(|| {
        let h = HemisphereSpec::from_exponent(n, r)
            .and_then(|s| gen_hemisphere(&s))
            .map_err(fail)?;
        store(out, from_hemisphere(h))
    })
}

/// Planar unit disk with `rings` concentric rings.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn dc_mesh_disk(rings: usize, out: *mut *mut DcMesh) -> DcStatus {
    guard(|| {
        let d = gen_disk(rings).map_err(fail)?;
        store(
            out,
            DcMesh {
                mesh: d.mesh,
                hemisphere: None,
            },
        )
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_mesh_load_off(path: *const c_char, out: *mut *mut DcMesh) -> DcStatus {
    guard(|| {
        let path = path_arg(path)?;
        let mesh = load_mesh(path).map_err(fail)?;
        store(out, DcMesh { mesh, hemisphere: None })
    })
}

/// # Safety
/// `mesh` must come from a `dc_mesh_*` constructor; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dc_mesh_save_off(mesh: *const DcMesh, path: *const c_char) -> DcStatus {
    guard(|| {
        let m = mesh_ref(mesh)?;
        let path = path_arg(path)?;
        save_mesh(&m.mesh, path).map_err(fail)
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `mesh` must come from a `dc_mesh_*` constructor and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_mesh_free(mesh: *mut DcMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Number of vertices; 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_mesh_vertex_count(mesh: *const DcMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.vertex_count())
}

/// Number of faces; 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_mesh_face_count(mesh: *const DcMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.face_count())
}

/// Copies vertex coordinates as `x, y, z` triples into `out` of length `len >= 3 * vertices`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dc_mesh_vertices(mesh: *const DcMesh, out: *mut f64, len: usize) -> DcStatus {
    guard(|| {
        let m = mesh_ref(mesh)?;
        let need = 3 * m.mesh.vertex_count();
        let dst = out_slice(out, len, need)?;
        for (chunk, v) in dst.chunks_exact_mut(3).zip(m.mesh.vertices()) {
            chunk.copy_from_slice(v.as_slice());
        }
        Ok(())
    })
}

/// Copies face vertex indices as triples into `out` of length `len >= 3 * faces`.
///
/// # Safety
/// `out` must point to `len` writable `size_t` values.
#[no_mangle]
pub unsafe extern "C" fn dc_mesh_faces(mesh: *const DcMesh, out: *mut usize, len: usize) -> DcStatus {
    guard(|| {
        let m = mesh_ref(mesh)?;
        let need = 3 * m.mesh.face_count();
        let dst = out_slice(out, len, need)?;
        for (chunk, f) in dst.chunks_exact_mut(3).zip(m.mesh.faces()) {
            chunk.copy_from_slice(f);
        }
        Ok(())
    })
}

unsafe fn out_slice<'a, T>(out: *mut T, len: usize, need: usize) -> Result<&'a mut [T], DcStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len < need {
        set_error(format!("buffer holds {len} values, {need} needed"));
        return Err(DcStatus::InvalidArgument);
    }
    Ok(std::slice::from_raw_parts_mut(out, need))
}

unsafe fn map_arg(map: *const f64, len: usize, vertices: usize) -> Result<Vec<Vec2>, DcStatus> {
    if map.is_null() {
        return Err(null("map"));
    }
    if len != 2 * vertices {
        set_error(format!("map holds {len} values, {} expected", 2 * vertices));
        return Err(DcStatus::InvalidArgument);
    }
    let s = std::slice::from_raw_parts(map, len);
    Ok(s.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect())
}

fn rho_mode(rho: DcRho, degree: usize) -> RhoMode {
    match rho {
        DcRho::Unit => RhoMode::Unit,
        DcRho::Analytic => RhoMode::Analytic,
        DcRho::Quadrature => RhoMode::Quadrature(degree),
    }
}

fn laplacian(m: &DcMesh, rho: RhoMode) -> Result<CotanLaplacian, DcStatus> {
    let surface;
    let param = match &m.hemisphere {
        Some(h) => {
            surface = h.surface();
            Some(Parameterization {
                surface: &surface,
                patches: &h.patches,
            })
        }
        None => None,
    };
    assemble_laplacian(&m.mesh, rho, param).map_err(fail)
}

/// Conformal energy of a map given as `x, y` pairs per vertex (`len = 2 * vertices`).
///
/// # Safety
/// `map` must point to `len` doubles and `out` to a writable `DcEnergy`.
#[no_mangle]
pub unsafe extern "C" fn dc_conformal_energy(
    mesh: *const DcMesh,
    rho: DcRho,
    quadrature_degree: usize,
    map: *const f64,
    len: usize,
    out: *mut DcEnergy,
) -> DcStatus {
    guard(|| {
        let m = mesh_ref(mesh)?;
        let f = map_arg(map, len, m.mesh.vertex_count())?;
        if out.is_null() {
            return Err(null("out"));
        }
        let lap = laplacian(m, rho_mode(rho, quadrature_degree))?;
        let e = conformal_energy(&m.mesh, &lap, &f).map_err(fail)?;
        *out = DcEnergy {
            dirichlet: e.dirichlet,
            area: e.area,
            conformal: e.conformal,
        };
        Ok(())
    })
}

/// Library defaults for [`dc_solve`].
#[no_mangle]
pub extern "C" fn dc_solve_options_default() -> DcSolveOptions {
    let o = MinimizerOptions::default();
    DcSolveOptions {
        max_iterations: o.max_iterations,
        gradient_tolerance: o.gradient_tolerance,
        relative_tolerance: o.relative_tolerance,
        rho: DcRho::Unit,
        quadrature_degree: 3,
    }
}

/// Minimises the conformal energy and writes the map as `x, y` pairs into `map_out`.
///
/// Hemispheres start from the harmonic map with the source at the pole, planar meshes from their
/// own positions. Returns `Numerical` with the summary filled in when the minimiser does not
/// converge.
///
/// # Safety
/// `options` may be null (defaults); `map_out` must hold `len >= 2 * vertices` doubles and
/// `summary` may be null.
#[no_mangle]
pub unsafe extern "C" fn dc_solve(
    mesh: *const DcMesh,
    options: *const DcSolveOptions,
    map_out: *mut f64,
    len: usize,
    summary: *mut DcSolveSummary,
) -> DcStatus {
    guard(|| {
        let m = mesh_ref(mesh)?;
        let o = options.as_ref().copied().unwrap_or_else(|| dc_solve_options_default());
        let dst = out_slice(map_out, len, 2 * m.mesh.vertex_count())?;
        let rho = rho_mode(o.rho, o.quadrature_degree);
        let lap = laplacian(m, rho)?;
        let init = match &m.hemisphere {
            Some(h) => harmonic_initial_map(h, rho),
            None if m.mesh.ambient_dim() == 2 => prepare_initial_map(&m.mesh, &m.mesh.planar_positions()),
            None => Err(Error::InvalidParameter(
                "spatial meshes without a parameterisation need an initial map".into(),
            )),
        }
        .map_err(fail)?;
        let opts = MinimizerOptions {
            max_iterations: o.max_iterations,
            gradient_tolerance: o.gradient_tolerance,
            relative_tolerance: o.relative_tolerance,
            ..MinimizerOptions::default()
        };
        let report = minimize(&m.mesh, &lap, &init, &opts).map_err(fail)?;
        for (chunk, p) in dst.chunks_exact_mut(2).zip(&report.map) {
            chunk.copy_from_slice(p.as_slice());
        }
        let rel = match &m.hemisphere {
            Some(h) => {
                let exact = h.exact_map();
                normalize_map(&report.map, &exact)
                    .and_then(|f| relative_error(&f, &exact))
                    .map_err(fail)?
            }
            None => f64::NAN,
        };
        let e = report.final_energy();
        if let Some(s) = summary.as_mut() {
            *s = DcSolveSummary {
                iterations: report.iterations,
                converged: report.converged,
                folds: report.folds,
                energy: DcEnergy {
                    dirichlet: e.dirichlet,
                    area: e.area,
                    conformal: e.conformal,
                },
                relative_error: rel,
            };
        }
        if report.converged {
            Ok(())
        } else {
            set_error(format!("minimiser stopped: {:?}", report.termination));
            Err(DcStatus::Numerical)
        }
    })
}

/// Quality maxima and the number of faces flagged by the degradation scan with default thresholds.
///
/// # Safety
/// `out` must point to a writable `DcQuality`.
#[no_mangle]
pub unsafe extern "C" fn dc_quality(mesh: *const DcMesh, out: *mut DcQuality) -> DcStatus {
    guard(|| {
        let m = mesh_ref(mesh)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let q = quality_report(&m.mesh, None).map_err(fail)?;
        let (e1, e2) = DEFAULT_EDGE_EPS;
        *out = DcQuality {
            max_d_over_sin: q.max_ratio_dsin,
            max_d_over_r: q.max_ratio_dr,
            h: q.h_v,
            flagged: delaunay_degradation_scan(&m.mesh, e1, e2).len(),
        };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn hemisphere(n: usize, m: usize) -> *mut DcMesh {
        let mut h = ptr::null_mut();
        assert_eq!(unsafe { dc_mesh_hemisphere(n, m, &mut h) }, DcStatus::Ok);
        h
    }

    fn last_error() -> String {
        unsafe { CStr::from_ptr(dc_last_error()) }
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn counts_and_buffers() {
        let h = hemisphere(8, 27);
        unsafe {
            assert_eq!(dc_mesh_vertex_count(h), 217);
            assert_eq!(dc_mesh_face_count(h), 27 * 15);
            let mut v = vec![0.0; 3 * 217];
            assert_eq!(dc_mesh_vertices(h, v.as_mut_ptr(), v.len()), DcStatus::Ok);
            assert!((v[2] + 1.0).abs() < 1e-15);
            let mut f = vec![0usize; 3];
            assert_eq!(dc_mesh_faces(h, f.as_mut_ptr(), f.len()), DcStatus::InvalidArgument);
            assert!(last_error().contains("needed"));
            dc_mesh_free(h);
            assert_eq!(dc_mesh_vertex_count(ptr::null()), 0);
        }
    }

    #[test]
    fn invalid_arguments() {
        let mut h = ptr::null_mut();
        unsafe {
            assert_eq!(dc_mesh_hemisphere(8, 2, &mut h), DcStatus::InvalidArgument);
            assert!(h.is_null());
            assert_eq!(dc_mesh_hemisphere(8, 6, ptr::null_mut()), DcStatus::NullPointer);
            let missing = CString::new("/nonexistent/x.off").unwrap();
            assert_eq!(dc_mesh_load_off(missing.as_ptr(), &mut h), DcStatus::Io);
            assert!(!last_error().is_empty());
        }
    }

    #[test]
    fn off_round_trip() {
        let dir = std::env::temp_dir().join(format!("dc_ffi_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = CString::new(dir.join("d.off").to_str().unwrap()).unwrap();
        let mut d = ptr::null_mut();
        let mut back = ptr::null_mut();
        unsafe {
            assert_eq!(dc_mesh_disk(3, &mut d), DcStatus::Ok);
            assert_eq!(dc_mesh_save_off(d, path.as_ptr()), DcStatus::Ok);
            assert_eq!(dc_mesh_load_off(path.as_ptr(), &mut back), DcStatus::Ok);
            assert_eq!(dc_mesh_vertex_count(back), dc_mesh_vertex_count(d));
            dc_mesh_free(d);
            dc_mesh_free(back);
        }
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn disk_identity_has_zero_energy() {
        let mut d = ptr::null_mut();
        unsafe {
            assert_eq!(dc_mesh_disk(4, &mut d), DcStatus::Ok);
            let n = dc_mesh_vertex_count(d);
            let mut v = vec![0.0; 3 * n];
            dc_mesh_vertices(d, v.as_mut_ptr(), v.len());
            let map: Vec<f64> = v.chunks(3).flat_map(|c| [c[0], c[1]]).collect();
            let mut e = DcEnergy {
                dirichlet: 0.0,
                area: 0.0,
                conformal: 1.0,
            };
            assert_eq!(
                dc_conformal_energy(d, DcRho::Unit, 0, map.as_ptr(), map.len(), &mut e),
                DcStatus::Ok
            );
            assert!(e.conformal.abs() < 1e-10);
            assert_eq!(
                dc_conformal_energy(d, DcRho::Unit, 0, map.as_ptr(), 3, &mut e),
                DcStatus::InvalidArgument
            );
            let mut q = DcQuality {
                max_d_over_sin: 0.0,
                max_d_over_r: 0.0,
                h: 0.0,
                flagged: 9,
            };
            assert_eq!(dc_quality(d, &mut q), DcStatus::Ok);
            assert_eq!(q.flagged, 0);
            dc_mesh_free(d);
        }
    }

    #[test]
    fn hemisphere_solve() {
        let h = hemisphere(16, 12);
        let mut opts = dc_solve_options_default();
        opts.rho = DcRho::Quadrature;
        let n = unsafe { dc_mesh_vertex_count(h) };
        let mut map = vec![0.0; 2 * n];
        let mut s = DcSolveSummary {
            iterations: 0,
            converged: false,
            folds: 1,
            energy: DcEnergy {
                dirichlet: 0.0,
                area: 0.0,
                conformal: 0.0,
            },
            relative_error: 1.0,
        };
        unsafe {
            assert_eq!(dc_solve(h, &opts, map.as_mut_ptr(), map.len(), &mut s), DcStatus::Ok);
            dc_mesh_free(h);
        }
        assert!(s.converged && s.folds == 0);
        assert!(s.relative_error < 1e-2);
    }
}
