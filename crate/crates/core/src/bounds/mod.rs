//! Computable a-priori bounds: projection distance, tangent-plane error, gradient
//! discretisation terms, and the resulting bound on `|E_D - E_D^h|`.

mod quality;
mod verify;

pub use quality::{
    delaunay_degradation_scan, is_strictly_decreasing, quality_report, write_quality_csv, DegradationFlag,
    OmegaQuality, QualityReport, TriangleQuality, DEFAULT_EDGE_EPS,
};
pub use verify::{
    pinv_norm_numeric, stereographic_dirichlet_energy, verify_eig_centroid, EigCentroidReport, EigMinimum,
};

use std::io::Write;

use nalgebra::{Matrix2, Matrix2x3};

use crate::barycentric::{project_to_plane, projection_frame};
use crate::error::{Error, Result};
use crate::laplacian::Parameterization;
use crate::mesh::{triangle_metrics, ParamTriangle, TriMesh, TriangleGeom, Vec3};

/// Constants of the surface and of the map entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsConfig {
    /// Lipschitz constant of the parameterisation's Jacobian.
    pub c_m: f64,
    /// Lipschitz constant of the tangential gradient of the map.
    pub c_l: f64,
    /// Global lower bound of the Jacobian's smallest singular value; `None` uses per-face values.
    pub sigma_min: Option<f64>,
    pub sigma_max: f64,
    /// Area of the smooth surface.
    pub total_area: f64,
}

impl BoundsConfig {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !finite_nonneg(self.c_m) || !finite_nonneg(self.c_l) {
            return Err(Error::InvalidParameter(
                "Lipschitz constants must be finite and non-negative".into(),
            ));
        }
        if !(self.sigma_max > 0.0) || !(self.total_area > 0.0) {
            return Err(Error::InvalidParameter(
                "sigma_max and total area must be positive".into(),
            ));
        }
        if let Some(s) = self.sigma_min {
            if !(s > 0.0 && s <= self.sigma_max) {
                return Err(Error::InvalidParameter(format!(
                    "sigma_min must lie in (0, sigma_max], got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// `C_M d(Omega)^2`.
pub fn tau_bound(c_m: f64, d_omega: f64) -> f64 {
    c_m * d_omega * d_omega
}

/// `3 C_M d(Omega)^3 / (sigma_min T)`.
pub fn nq_bound(c_m: f64, sigma_min: f64, d_omega: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::DegenerateTriangle {
            area: t,
            diameter: d_omega,
        });
    }
    if c_m == 0.0 {
        return Ok(0.0);
    }
    Ok(3.0 * c_m * d_omega.powi(3) / (sigma_min * t))
}

/// Largest pseudo-inverse norm of `[w_i, w_j, w_k] - w e^T` over the triangle:
/// `|[w_jk, w_ki, w_ij]|_2 / (2T)`.
pub fn omega_dagger_norm(tri: &ParamTriangle) -> Result<f64> {
    let edges = nalgebra::Matrix2x3::from_columns(&[tri[1] - tri[2], tri[2] - tri[0], tri[0] - tri[1]]);
    let t = 0.5 * (tri[1] - tri[0]).perp(&(tri[2] - tri[0])).abs();
    let d = edges.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if !(t > crate::mesh::DEGENERACY_TOL * d * d) {
        return Err(Error::DegenerateTriangle { area: t, diameter: d });
    }
    let sigma = edges.svd(false, false).singular_values.max();
    Ok(sigma / (2.0 * t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiBounds {
    pub prime: f64,
    pub double_prime: f64,
}

/// Per-face `psi'` and `psi''`.
///
/// The tangent-plane term entering `psi'` is capped at 1, since `|n^T Q|` never exceeds it.
pub fn psi_bounds(cfg: &BoundsConfig, sigma_min: f64, geom: &TriangleGeom, omega: &TriangleGeom) -> Result<PsiBounds> {
    let (dv, a) = (geom.diameter, geom.area);
    let (dw, t) = (omega.diameter, omega.area);
    let nq = nq_bound(cfg.c_m, sigma_min, dw, t)?.min(1.0);
    Ok(PsiBounds {
        prime: 3.0 * cfg.c_m * dv * dw * dw / a + nq * nq,
        double_prime: 3.0 * cfg.c_l * cfg.sigma_max.powi(2) * dv * dw * dw / (2.0 * a),
    })
}

/// Angle-based upper estimates of `psi'` and `psi''` in terms of `d / sin(theta)`.
pub fn psi_bounds_simplified(
    cfg: &BoundsConfig,
    sigma_min: f64,
    geom: &TriangleGeom,
    omega: &TriangleGeom,
) -> PsiBounds {
    let rv = geom.d_over_sin();
    let rw = omega.d_over_sin();
    let s2 = sigma_min * sigma_min;
    let second = if cfg.c_m == 0.0 {
        0.0
    } else {
        12.0 * cfg.c_m / sigma_min * rw
    };
    PsiBounds {
        prime: if cfg.c_m == 0.0 { 0.0 } else { 12.0 * cfg.c_m / s2 * rv } + second * second,
        double_prime: 6.0 * cfg.c_l * cfg.sigma_max.powi(2) / s2 * rv,
    }
}

/// Bound on `int psi^2`: twice `(sqrt(E_D) psi'_max + sqrt(A/2) psi''_max)^2`.
pub fn int_psi_sq_bound(e_d: f64, total_area: f64, psi_prime_max: f64, psi_double_prime_max: f64) -> f64 {
    2.0 * (e_d.max(0.0).sqrt() * psi_prime_max + (0.5 * total_area).sqrt() * psi_double_prime_max).powi(2)
}

/// `int psi^2 / 2 + sqrt(2 E_D^h int psi^2)`.
pub fn discretization_error_bound(e_dh: f64, int_psi_sq: f64) -> f64 {
    0.5 * int_psi_sq + (2.0 * e_dh.max(0.0) * int_psi_sq).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceBounds {
    pub sigma_min: f64,
    pub tau_bound: f64,
    pub omega_dagger_norm: f64,
    pub nq_bound: f64,
    pub psi_prime: f64,
    pub psi_double_prime: f64,
}

#[derive(Debug, Clone)]
pub struct BoundReport {
    pub faces: Vec<FaceBounds>,
    pub psi_prime_max: f64,
    pub psi_double_prime_max: f64,
    pub e_dh: f64,
    pub int_psi_sq_bound: f64,
    pub eps_dh: f64,
    pub quality: QualityReport,
}

fn param_geom(tri: &ParamTriangle) -> Result<TriangleGeom> {
    let lift = tri.map(|w| Vec3::new(w.x, w.y, 0.0));
    triangle_metrics(&lift[0], &lift[1], &lift[2])
}

/// Evaluates every per-face bound and the global error bound for a map with discrete energy `e_dh`.
pub fn bound_report(mesh: &TriMesh, param: Parameterization<'_>, cfg: &BoundsConfig, e_dh: f64) -> Result<BoundReport> {
    cfg.validate()?;
    if param.patches.len() != mesh.face_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.face_count(),
            found: param.patches.len(),
        });
    }
    let quality = quality_report(mesh, Some(param.patches))?;
    let mut faces = Vec::with_capacity(mesh.face_count());
    for (f, patch) in param.patches.iter().enumerate() {
        let [a, b, c] = mesh.face_vertices(f);
        let geom = triangle_metrics(&a, &b, &c)?;
        let omega = param_geom(patch)?;
        let sigma_min = cfg.sigma_min.unwrap_or_else(|| param.surface.sigma_min_over(patch));
        let psi = psi_bounds(cfg, sigma_min, &geom, &omega)?;
        faces.push(FaceBounds {
            sigma_min,
            tau_bound: tau_bound(cfg.c_m, omega.diameter),
            omega_dagger_norm: omega_dagger_norm(patch)?,
            nq_bound: nq_bound(cfg.c_m, sigma_min, omega.diameter, omega.area)?,
            psi_prime: psi.prime,
            psi_double_prime: psi.double_prime,
        });
    }
    let psi_prime_max = faces.iter().map(|b| b.psi_prime).fold(0.0, f64::max);
    let psi_double_prime_max = faces.iter().map(|b| b.psi_double_prime).fold(0.0, f64::max);
    let int_psi = int_psi_sq_bound(e_dh, cfg.total_area, psi_prime_max, psi_double_prime_max);
    Ok(BoundReport {
        faces,
        psi_prime_max,
        psi_double_prime_max,
        e_dh,
        int_psi_sq_bound: int_psi,
        eps_dh: discretization_error_bound(e_dh, int_psi),
        quality,
    })
}

/// Largest measured `|tau|` and `|n^T Q|` on one face, and whether both respect their bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceSamples {
    pub samples: usize,
    pub tau_max: f64,
    pub tau_bound: f64,
    pub nq_max: f64,
    /// Largest ratio of measured `|n^T Q|` to its bound at the same point.
    pub nq_ratio_max: f64,
    pub tau_ok: bool,
    pub nq_ok: bool,
}

/// Absolute slack allowed when comparing measured values with their bounds.
pub const SOUNDNESS_SLACK: f64 = 1e-9;

/// Samples interior points of every parameter triangle on a barycentric lattice with `levels`
/// subdivisions and compares the measured projection distance and tangent-plane error with the
/// bounds, using the pointwise smallest singular value.
pub fn sample_soundness(
    mesh: &TriMesh,
    param: Parameterization<'_>,
    c_m: f64,
    levels: usize,
) -> Result<Vec<FaceSamples>> {
    if levels < 3 {
        return Err(Error::InvalidParameter(
            "need at least 3 lattice levels for interior samples".into(),
        ));
    }
    let surface = param.surface;
    let mut out = Vec::with_capacity(mesh.face_count());
    for (f, patch) in param.patches.iter().enumerate() {
        let [a, b, c] = mesh.face_vertices(f);
        let frame = projection_frame(&a, &b, &c)?;
        let omega = param_geom(patch)?;
        let tb = tau_bound(c_m, omega.diameter);
        let mut s = FaceSamples {
            samples: 0,
            tau_max: 0.0,
            tau_bound: tb,
            nq_max: 0.0,
            nq_ratio_max: 0.0,
            tau_ok: true,
            nq_ok: true,
        };
        for p in 1..levels {
            for q in 1..levels - p {
                let r = levels - p - q;
                let l = [p, q, r].map(|x| x as f64 / levels as f64);
                let w = patch[0] * l[0] + patch[1] * l[1] + patch[2] * l[2];
                let x = surface.eval(w);
                let tau = project_to_plane(&x, &frame).distance.abs();
                let nq = tangent_plane_error(&surface.jacobian(w), &frame.normal);
                let sigma = surface.sigma_min_at(w);
                let nb = nq_bound(c_m, sigma, omega.diameter, omega.area)?;
                s.samples += 1;
                s.tau_max = s.tau_max.max(tau);
                s.nq_max = s.nq_max.max(nq);
                if nb > 0.0 {
                    s.nq_ratio_max = s.nq_ratio_max.max(nq / nb);
                }
                s.tau_ok &= tau <= tb + SOUNDNESS_SLACK;
                s.nq_ok &= nq <= nb + SOUNDNESS_SLACK;
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// `|n^T Q|` with `Q = J (J^T J)^{-1/2}` the orthonormal tangent basis.
pub fn tangent_plane_error(jac: &nalgebra::Matrix3x2<f64>, normal: &Vec3) -> f64 {
    let gram: Matrix2<f64> = jac.transpose() * jac;
    let eig = gram.symmetric_eigen();
    let inv_sqrt = eig.eigenvectors
        * Matrix2::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    (normal.transpose() * jac * inv_sqrt).norm()
}

/// Largest `|G(v_a) - G(v_b)|_F / |v_a - v_b|` over mesh edges, an estimate of the Lipschitz
/// constant of a tangential gradient field `G`.
pub fn estimate_lipschitz(mesh: &TriMesh, grad: impl Fn(&Vec3) -> Matrix2x3<f64>) -> f64 {
    let g: Vec<Matrix2x3<f64>> = mesh.vertices().iter().map(&grad).collect();
    mesh.edges()
        .iter()
        .map(|e| (g[e.a] - g[e.b]).norm() / (mesh.vertex(e.a) - mesh.vertex(e.b)).norm())
        .fold(0.0, f64::max)
}

impl BoundReport {
    /// One row per face followed by a summary row.
    pub fn write_csv<W: Write>(&self, out: W, samples: Option<&[FaceSamples]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "face",
            "sigma_min",
            "tau_bound",
            "omega_dagger_norm",
            "nq_bound",
            "psi_prime",
            "psi_double_prime",
            "tau_measured",
            "nq_measured",
            "tau_ok",
            "nq_ok",
        ])?;
        let fmt = |x: f64| format!("{x:.17e}");
        for (f, b) in self.faces.iter().enumerate() {
            let s = samples.and_then(|s| s.get(f));
            w.write_record([
                f.to_string(),
                fmt(b.sigma_min),
                fmt(b.tau_bound),
                fmt(b.omega_dagger_norm),
                fmt(b.nq_bound),
                fmt(b.psi_prime),
                fmt(b.psi_double_prime),
                s.map_or(String::new(), |s| fmt(s.tau_max)),
                s.map_or(String::new(), |s| fmt(s.nq_max)),
                s.map_or(String::new(), |s| s.tau_ok.to_string()),
                s.map_or(String::new(), |s| s.nq_ok.to_string()),
            ])?;
        }
        let max = |g: fn(&FaceBounds) -> f64| self.faces.iter().map(g).fold(0.0, f64::max);
        w.write_record([
            "max".to_string(),
            fmt(self.faces.iter().map(|b| b.sigma_min).fold(f64::INFINITY, f64::min)),
            fmt(max(|b| b.tau_bound)),
            fmt(max(|b| b.omega_dagger_norm)),
            fmt(max(|b| b.nq_bound)),
            fmt(self.psi_prime_max),
            fmt(self.psi_double_prime_max),
            samples.map_or(String::new(), |s| fmt(s.iter().map(|x| x.tau_max).fold(0.0, f64::max))),
            samples.map_or(String::new(), |s| fmt(s.iter().map(|x| x.nq_max).fold(0.0, f64::max))),
            samples.map_or(String::new(), |s| s.iter().all(|x| x.tau_ok).to_string()),
            samples.map_or(String::new(), |s| s.iter().all(|x| x.nq_ok).to_string()),
        ])?;
        w.flush()?;
        Ok(())
    }
}
