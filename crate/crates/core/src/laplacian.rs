//! Cotangent Laplacian with per-face area ratios, and the energies built from it.

use std::io::Write;

use crate::barycentric::ProjectionFrame;
use crate::error::{Error, Result};
use crate::mesh::{triangle_metrics, ParamSurface, ParamTriangle, TriMesh, TriangleGeom, Vec2};
use crate::quadrature::dunavant;

/// How the per-face ratio `rho = (surface patch area) / (mesh triangle area)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhoMode {
    /// `rho = 1` on every face.
    #[default]
    Unit,
    /// Closed-form patch areas when the surface has them, degree-5 quadrature otherwise.
    Analytic,
    /// Dunavant quadrature of the given degree.
    Quadrature(usize),
}

impl std::str::FromStr for RhoMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(Self::Unit),
            "analytic" => Ok(Self::Analytic),
            _ => match s.strip_prefix("quadrature") {
                Some("") => Ok(Self::Quadrature(5)),
                Some(rest) => rest
                    .trim_start_matches([':', '='])
                    .parse()
                    .map(Self::Quadrature)
                    .map_err(|_| Error::InvalidParameter(format!("bad quadrature degree in {s:?}"))),
                None => Err(Error::InvalidParameter(format!(
                    "unknown rho mode {s:?} (expected unit, analytic or quadrature[:degree])"
                ))),
            },
        }
    }
}

impl std::fmt::Display for RhoMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Unit => write!(f, "unit"),
            Self::Analytic => write!(f, "analytic"),
            Self::Quadrature(d) => write!(f, "quadrature:{d}"),
        }
    }
}

/// A surface together with the parameter triangle of every mesh face.
#[derive(Clone, Copy)]
pub struct Parameterization<'a> {
    pub surface: &'a dyn ParamSurface,
    pub patches: &'a [ParamTriangle],
}

/// Per-face area ratios for a mesh.
pub fn face_rho(mesh: &TriMesh, mode: RhoMode, param: Option<Parameterization<'_>>) -> Result<Vec<f64>> {
    let nf = mesh.face_count();
    if mode == RhoMode::Unit {
        return Ok(vec![1.0; nf]);
    }
    let param =
        param.ok_or_else(|| Error::InvalidParameter(format!("rho mode {mode} needs a surface parameterisation")))?;
    if param.patches.len() != nf {
        return Err(Error::DimensionMismatch {
            expected: nf,
            found: param.patches.len(),
        });
    }
    let rule = dunavant(match mode {
        RhoMode::Quadrature(d) => d,
        _ => 5,
    })?;
    (0..nf)
        .map(|f| {
            let [a, b, c] = mesh.face_vertices(f);
            let geom = triangle_metrics(&a, &b, &c)?;
            let patch = &param.patches[f];
            let area = match mode {
                RhoMode::Analytic => param.surface.patch_area(patch),
                _ => None,
            }
            .unwrap_or_else(|| rule.patch_area(param.surface, patch));
            Ok(area / geom.area)
        })
        .collect()
}

/// One face's contribution to an edge weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfWeight {
    pub face: usize,
    pub rho: f64,
    pub cot: f64,
}

/// An off-diagonal entry pair `L_ij = L_ji = -weight`, with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWeight {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub halves: [Option<HalfWeight>; 2],
}

impl EdgeWeight {
    pub fn is_boundary(&self) -> bool {
        self.halves[1].is_none()
    }
}

/// Symmetric positive semi-definite Laplacian `L = sum_ij w_ij (e_i - e_j)(e_i - e_j)^T`.
#[derive(Debug, Clone)]
pub struct CotanLaplacian {
    n: usize,
    edges: Vec<EdgeWeight>,
    diagonal: Vec<f64>,
    face_rho: Vec<f64>,
}

/// Assembles the Laplacian with edge weights `w_ij = sum over incident faces of rho cot(beta) / 2`.
pub fn assemble_laplacian(
    mesh: &TriMesh,
    mode: RhoMode,
    param: Option<Parameterization<'_>>,
) -> Result<CotanLaplacian> {
    let rho = face_rho(mesh, mode, param)?;
    assemble_with_rho(mesh, rho)
}

pub fn assemble_with_rho(mesh: &TriMesh, rho: Vec<f64>) -> Result<CotanLaplacian> {
    if rho.len() != mesh.face_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.face_count(),
            found: rho.len(),
        });
    }
    let geoms = face_geometry(mesh)?;
    let mut edges = Vec::with_capacity(mesh.edges().len());
    let mut diagonal = vec![0.0; mesh.vertex_count()];
    for e in mesh.edges() {
        let mut halves = [None, None];
        let mut weight = 0.0;
        for (slot, face) in e.faces.iter().enumerate() {
            let Some(face) = *face else { continue };
            let tri = mesh.faces()[face];
            let corner = (0..3).find(|&c| tri[c] != e.a && tri[c] != e.b).unwrap();
            let half = HalfWeight {
                face,
                rho: rho[face],
                cot: geoms[face].cotangents[corner],
            };
            weight += 0.5 * half.rho * half.cot;
            halves[slot] = Some(half);
        }
        if !weight.is_finite() {
            return Err(Error::NonFiniteWeight(e.a, e.b));
        }
        diagonal[e.a] += weight;
        diagonal[e.b] += weight;
        edges.push(EdgeWeight {
            i: e.a,
            j: e.b,
            weight,
            halves,
        });
    }
    Ok(CotanLaplacian {
        n: mesh.vertex_count(),
        edges,
        diagonal,
        face_rho: rho,
    })
}

/// Triangle metrics for every face.
pub fn face_geometry(mesh: &TriMesh) -> Result<Vec<TriangleGeom>> {
    (0..mesh.face_count())
        .map(|f| {
            let [a, b, c] = mesh.face_vertices(f);
            triangle_metrics(&a, &b, &c)
        })
        .collect()
}

impl CotanLaplacian {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[EdgeWeight] {
        &self.edges
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn face_rho(&self) -> &[f64] {
        &self.face_rho
    }

    /// Matrix entry `L_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal[i];
        }
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|e| (e.i, e.j).cmp(&key))
            .map(|k| -self.edges[k].weight)
            .unwrap_or(0.0)
    }

    /// `L f` for a planar map.
    pub fn apply(&self, f: &[Vec2]) -> Vec<Vec2> {
        let mut out = vec![Vec2::zeros(); self.n];
        for e in &self.edges {
            let d = (f[e.i] - f[e.j]) * e.weight;
            out[e.i] += d;
            out[e.j] -= d;
        }
        out
    }

    pub fn apply_scalar(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for e in &self.edges {
            let d = (u[e.i] - u[e.j]) * e.weight;
            out[e.i] += d;
            out[e.j] -= d;
        }
        out
    }

    /// All non-zero entries as `(row, col, value)`, sorted by row then column.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.n + 2 * self.edges.len());
        for (i, &d) in self.diagonal.iter().enumerate() {
            t.push((i, i, d));
        }
        for e in &self.edges {
            t.push((e.i, e.j, -e.weight));
            t.push((e.j, e.i, -e.weight));
        }
        t.sort_by_key(|&(r, c, _)| (r, c));
        t
    }

    /// Coordinate-triplet text, one `row col value` line per entry.
    pub fn write_triplets<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "# {} {} {}", self.n, self.n, self.n + 2 * self.edges.len())?;
        for (r, c, v) in self.triplets() {
            writeln!(out, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }

    /// `sum_ij w_ij |f_i - f_j|^2 / 2`, which equals `<L f, f> / 2`.
    pub fn dirichlet_energy(&self, f: &[Vec2]) -> f64 {
        0.5 * self
            .edges
            .iter()
            .map(|e| e.weight * (f[e.i] - f[e.j]).norm_squared())
            .sum::<f64>()
    }

    /// `<L u, v> / 2` for two maps.
    pub fn dirichlet_bilinear(&self, u: &[Vec2], v: &[Vec2]) -> f64 {
        0.5 * self
            .edges
            .iter()
            .map(|e| e.weight * (u[e.i] - u[e.j]).dot(&(v[e.i] - v[e.j])))
            .sum::<f64>()
    }
}

/// Energies of a map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub dirichlet: f64,
    pub area: f64,
    pub conformal: f64,
}

/// Per-face Dirichlet energy `rho A |f b^T|_F^2 / 2`, written with the unnormalised `s`.
pub fn per_face_dirichlet(f: &[Vec2; 3], frame: &ProjectionFrame, rho: f64) -> f64 {
    let mut fs = nalgebra::Matrix2x3::zeros();
    for (fl, sl) in f.iter().zip(&frame.s) {
        fs += fl * sl.transpose();
    }
    rho * fs.norm_squared() / (8.0 * frame.area)
}

/// Per-face Dirichlet energy from cotangents, `(rho / 4) sum |f_l - f_m|^2 cot(beta_lm)`.
pub fn per_face_dirichlet_cot(f: &[Vec2; 3], geom: &TriangleGeom, rho: f64) -> f64 {
    0.25 * rho
        * (0..3)
            .map(|c| geom.cotangents[c] * (f[(c + 1) % 3] - f[(c + 2) % 3]).norm_squared())
            .sum::<f64>()
}

/// Signed area of the piecewise-linear image, summed over faces.
pub fn mapped_area(mesh: &TriMesh, f: &[Vec2]) -> f64 {
    mesh.signed_image_area(f)
}

/// Signed area enclosed by the image of the boundary (shoelace over boundary edges).
pub fn boundary_area(mesh: &TriMesh, f: &[Vec2]) -> f64 {
    0.5 * mesh
        .boundary_edges()
        .iter()
        .map(|&(a, b)| f[a].perp(&f[b]))
        .sum::<f64>()
}

/// Symmetric bilinear form with `area_bilinear(f, f) = mapped_area(f)`.
pub fn area_bilinear(mesh: &TriMesh, u: &[Vec2], v: &[Vec2]) -> f64 {
    0.25 * mesh
        .faces()
        .iter()
        .map(|t| {
            let (ua, ub) = (u[t[1]] - u[t[0]], u[t[2]] - u[t[0]]);
            let (va, vb) = (v[t[1]] - v[t[0]], v[t[2]] - v[t[0]]);
            ua.perp(&vb) + va.perp(&ub)
        })
        .sum::<f64>()
}

pub fn conformal_energy(mesh: &TriMesh, lap: &CotanLaplacian, f: &[Vec2]) -> Result<EnergyBreakdown> {
    check_len(mesh, f)?;
    let dirichlet = lap.dirichlet_energy(f);
    let area = mapped_area(mesh, f);
    Ok(EnergyBreakdown {
        dirichlet,
        area,
        conformal: dirichlet - area,
    })
}

/// Gradient of `E_C` with respect to every vertex position: `L f - grad A`.
pub fn energy_gradient(mesh: &TriMesh, lap: &CotanLaplacian, f: &[Vec2]) -> Result<Vec<Vec2>> {
    check_len(mesh, f)?;
    let mut g = lap.apply(f);
    for t in mesh.faces() {
        for c in 0..3 {
            let (i, j, k) = (t[c], t[(c + 1) % 3], t[(c + 2) % 3]);
            let d = f[k] - f[j];
            // derivative of the face area is half the edge rotated by +90 degrees
            g[i] -= 0.5 * Vec2::new(-d.y, d.x);
        }
    }
    Ok(g)
}

/// Number of faces whose image has non-positive signed area.
pub fn count_folds(mesh: &TriMesh, f: &[Vec2]) -> usize {
    mesh.faces()
        .iter()
        .filter(|t| (f[t[1]] - f[t[0]]).perp(&(f[t[2]] - f[t[0]])) <= 0.0)
        .count()
}

fn check_len(mesh: &TriMesh, f: &[Vec2]) -> Result<()> {
    if f.len() != mesh.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.vertex_count(),
            found: f.len(),
        });
    }
    Ok(())
}
