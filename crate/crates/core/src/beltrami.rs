//! Discrete Beltrami equation on planar meshes with per-face coefficients.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Vec2, VertexMap};
use crate::sparse::{solve_general, triplet_matvec};

/// Smallest admissible `1 - |mu|^2`.
pub const COEFFICIENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BeltramiCoefficient {
    pub mu1: f64,
    pub mu2: f64,
}

impl BeltramiCoefficient {
    pub fn new(mu1: f64, mu2: f64) -> Result<Self> {
        let c = Self { mu1, mu2 };
        c.validate()?;
        Ok(c)
    }

    fn denominator(&self) -> f64 {
        1.0 - self.mu1 * self.mu1 - self.mu2 * self.mu2
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.denominator();
        if !(d >= COEFFICIENT_TOL) {
            return Err(Error::DegenerateCoefficient(d));
        }
        Ok(())
    }
}

/// `J = [[0, 1], [-1, 0]]`.
pub fn rot_j() -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0, -1.0, 0.0)
}

pub fn b_matrix(mu: BeltramiCoefficient) -> Result<Matrix2<f64>> {
    mu.validate()?;
    let BeltramiCoefficient { mu1, mu2 } = mu;
    let d = mu.denominator();
    Ok(Matrix2::new(
        2.0 * mu2,
        (1.0 - mu1).powi(2) + mu2 * mu2,
        -(1.0 + mu1).powi(2) - mu2 * mu2,
        -2.0 * mu2,
    ) / d)
}

/// Row contributions of one face for each of its corners as the row vertex.
///
/// `out[c]` holds the coefficients of `(g_i, g_j, g_k)` with `i` the corner `c` and `j, k` the
/// following corners.
pub fn face_weights(p: [Vec2; 3], mu: BeltramiCoefficient) -> Result<[[f64; 3]; 3]> {
    let b = b_matrix(mu)?;
    let two_a = (p[1] - p[0]).perp(&(p[2] - p[0]));
    let d = (0..3).map(|c| (p[(c + 1) % 3] - p[c]).norm()).fold(0.0, f64::max);
    if !(two_a > 2.0 * crate::mesh::DEGENERACY_TOL * d * d) {
        return Err(Error::DegenerateTriangle {
            area: 0.5 * two_a,
            diameter: d,
        });
    }
    let jb = -rot_j() * b;
    Ok(std::array::from_fn(|c| {
        let (i, j, k) = (p[c], p[(c + 1) % 3], p[(c + 2) % 3]);
        let v_jk = k - j;
        let hat = jb * v_jk;
        [v_jk.dot(&hat), (i - k).dot(&hat), (j - i).dot(&hat)].map(|x| x / two_a)
    }))
}

/// Assembled interior-row operator.
#[derive(Debug, Clone)]
pub struct BeltramiSystem {
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    /// Rows indexed by position in `interior`, columns by global vertex.
    pub rows: Vec<BTreeMap<usize, f64>>,
}

impl BeltramiSystem {
    pub fn row_sum(&self, r: usize) -> f64 {
        self.rows[r].values().sum()
    }

    pub fn entry(&self, r: usize, col: usize) -> f64 {
        self.rows[r].get(&col).copied().unwrap_or(0.0)
    }
}

pub fn assemble_beltrami(mesh: &TriMesh, mu: &[BeltramiCoefficient]) -> Result<BeltramiSystem> {
    if mesh.ambient_dim() != 2 {
        return Err(Error::InvalidTopology("the Beltrami solver needs a planar mesh".into()));
    }
    if mu.len() != mesh.face_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.face_count(),
            found: mu.len(),
        });
    }
    let interior = mesh.interior_vertices();
    let boundary = mesh.boundary_vertices();
    let mut slot = vec![usize::MAX; mesh.vertex_count()];
    for (r, &v) in interior.iter().enumerate() {
        slot[v] = r;
    }
    let mut rows = vec![BTreeMap::new(); interior.len()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let p = face.map(|v| mesh.vertex(v).xy());
        let w = face_weights(p, mu[f])?;
        for c in 0..3 {
            let r = slot[face[c]];
            if r == usize::MAX {
                continue;
            }
            for (o, x) in w[c].iter().enumerate() {
                *rows[r].entry(face[(c + o) % 3]).or_insert(0.0) += 0.5 * x;
            }
        }
    }
    Ok(BeltramiSystem {
        interior,
        boundary,
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct BeltramiSolution {
    pub values: VertexMap,
    pub residual_norm: f64,
}

/// Solves `L_I g_I = -L_B g_B`; `boundary_values` is indexed by vertex and read on boundary
/// vertices only.
pub fn solve_beltrami(
    mesh: &TriMesh,
    mu: &[BeltramiCoefficient],
    boundary_values: &[Vec2],
) -> Result<BeltramiSolution> {
    if boundary_values.len() != mesh.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.vertex_count(),
            found: boundary_values.len(),
        });
    }
    if mesh.component_count() != 1 {
        return Err(Error::InvalidTopology("mesh is not connected".into()));
    }
    let sys = assemble_beltrami(mesh, mu)?;
    let mut values: VertexMap = vec![Vec2::zeros(); mesh.vertex_count()];
    for &b in &sys.boundary {
        values[b] = boundary_values[b];
    }
    let n = sys.interior.len();
    if n == 0 {
        return Ok(BeltramiSolution {
            values,
            residual_norm: 0.0,
        });
    }
    let mut slot = vec![usize::MAX; mesh.vertex_count()];
    for (r, &v) in sys.interior.iter().enumerate() {
        slot[v] = r;
    }
    let mut triplets = Vec::new();
    let mut rhs = vec![vec![0.0; n]; 2];
    for (r, row) in sys.rows.iter().enumerate() {
        for (&col, &w) in row {
            if slot[col] != usize::MAX {
                triplets.push((r, slot[col], w));
            } else {
                rhs[0][r] -= w * values[col].x;
                rhs[1][r] -= w * values[col].y;
            }
        }
    }
    let cols = solve_general(n, &triplets, &rhs)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for d in 0..2 {
        let ax = triplet_matvec(n, &triplets, &cols[d]);
        num += ax.iter().zip(&rhs[d]).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        den += rhs[d].iter().map(|b| b * b).sum::<f64>();
    }
    for (r, &v) in sys.interior.iter().enumerate() {
        values[v] = Vec2::new(cols[0][r], cols[1][r]);
    }
    let scale = if den > 0.0 { den } else { 1.0 };
    Ok(BeltramiSolution {
        values,
        residual_norm: (num / scale).sqrt(),
    })
}

fn read_rows(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    let mut first = true;
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parse = |s: &str| s.trim().parse::<f64>();
        let fields: std::result::Result<Vec<f64>, _> = t.split(',').map(parse).collect();
        let header = std::mem::replace(&mut first, false);
        match fields {
            Ok(v) if v.len() == width => out.push(v),
            Err(_) if header => continue,
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    message: format!("expected {width} numeric fields"),
                })
            }
        }
    }
    Ok(out)
}

/// Reads `face,mu1,mu2` rows; faces without a row get `mu = 0`.
pub fn read_mu_csv(path: &Path, face_count: usize) -> Result<Vec<BeltramiCoefficient>> {
    let mut mu = vec![BeltramiCoefficient::default(); face_count];
    for row in read_rows(path, 3)? {
        let f = row[0] as usize;
        if row[0] < 0.0 || row[0].fract() != 0.0 || f >= face_count {
            return Err(Error::InvalidParameter(format!("face index {} out of range", row[0])));
        }
        mu[f] = BeltramiCoefficient::new(row[1], row[2])?;
    }
    Ok(mu)
}

/// Reads `vertex,x,y` rows; every boundary vertex must be present.
pub fn read_boundary_csv(path: &Path, mesh: &TriMesh) -> Result<VertexMap> {
    let mut values = vec![Vec2::zeros(); mesh.vertex_count()];
    let mut seen = vec![false; mesh.vertex_count()];
    for row in read_rows(path, 3)? {
        let v = row[0] as usize;
        if row[0] < 0.0 || row[0].fract() != 0.0 || v >= mesh.vertex_count() {
            return Err(Error::InvalidParameter(format!("vertex index {} out of range", row[0])));
        }
        values[v] = Vec2::new(row[1], row[2]);
        seen[v] = true;
    }
    if let Some(b) = mesh.boundary_vertices().into_iter().find(|&b| !seen[b]) {
        return Err(Error::InvalidParameter(format!("boundary vertex {b} has no value")));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplacian::{assemble_laplacian, RhoMode};
    use crate::mesh::gen_disk;
    use proptest::prelude::*;

    fn zero(n: usize) -> Vec<BeltramiCoefficient> {
        vec![BeltramiCoefficient::default(); n]
    }

    fn admissible() -> impl Strategy<Value = BeltramiCoefficient> {
        (0.0..0.95f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| BeltramiCoefficient {
            mu1: r * t.cos(),
            mu2: r * t.sin(),
        })
    }

    #[test]
    fn zero_coefficient_gives_rotation() {
        assert_eq!(b_matrix(BeltramiCoefficient::default()).unwrap(), rot_j());
        assert!(matches!(
            b_matrix(BeltramiCoefficient { mu1: 0.6, mu2: 0.8 }),
            Err(Error::DegenerateCoefficient(_))
        ));
        assert!(BeltramiCoefficient::new(1.0, 0.0).is_err());
    }

    #[test]
    fn zero_coefficient_matches_cotangent_laplacian() {
        let d = gen_disk(4).unwrap();
        let sys = assemble_beltrami(&d.mesh, &zero(d.mesh.face_count())).unwrap();
        let lap = assemble_laplacian(&d.mesh, RhoMode::Unit, None).unwrap();
        for (r, &i) in sys.interior.iter().enumerate() {
            assert!(sys.row_sum(r).abs() < 1e-12);
            for j in 0..d.mesh.vertex_count() {
                let (a, b) = (sys.entry(r, j), lap.entry(i, j));
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "({i},{j}) {a} {b}");
            }
        }
    }

    #[test]
    fn rotation_invariance() {
        let d = gen_disk(3).unwrap();
        let (s, c) = 0.7f64.sin_cos();
        let pts: Vec<Vec2> = d
            .mesh
            .vertices()
            .iter()
            .map(|v| Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y))
            .collect();
        let rotated = TriMesh::planar(&pts, d.mesh.faces().to_vec()).unwrap();
        let a = assemble_beltrami(&d.mesh, &zero(d.mesh.face_count())).unwrap();
        let b = assemble_beltrami(&rotated, &zero(d.mesh.face_count())).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            for (k, v) in ra {
                assert!((v - rb[k]).abs() < 1e-12);
            }
        }
    }

    fn restrict(mesh: &TriMesh, g: impl Fn(Vec2) -> Vec2) -> VertexMap {
        mesh.vertices().iter().map(|v| g(v.xy())).collect()
    }

    #[test]
    fn identity_and_constant_boundary() {
        let d = gen_disk(5).unwrap();
        let mu = zero(d.mesh.face_count());
        let id = restrict(&d.mesh, |p| p);
        let s = solve_beltrami(&d.mesh, &mu, &id).unwrap();
        assert!(s.residual_norm < 1e-10);
        for (a, b) in s.values.iter().zip(&id) {
            assert!((a - b).norm() < 1e-8);
        }
        let k = vec![Vec2::new(2.0, -1.0); d.mesh.vertex_count()];
        let s = solve_beltrami(&d.mesh, &mu, &k).unwrap();
        assert!(s.values.iter().all(|v| (v - k[0]).norm() < 1e-10));
    }

    #[test]
    fn constant_coefficient_reproduces_affine_map() {
        let d = gen_disk(4).unwrap();
        let m = BeltramiCoefficient::new(0.3, -0.4).unwrap();
        let mu = vec![m; d.mesh.face_count()];
        // z + mu conj(z)
        let g = restrict(&d.mesh, |p| {
            Vec2::new(p.x + m.mu1 * p.x + m.mu2 * p.y, p.y + m.mu2 * p.x - m.mu1 * p.y)
        });
        let s = solve_beltrami(&d.mesh, &mu, &g).unwrap();
        for (a, b) in s.values.iter().zip(&g) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn harmonic_pair_converges() {
        let err = |rings: usize| {
            let d = gen_disk(rings).unwrap();
            let g = restrict(&d.mesh, |p| Vec2::new(p.x * p.x - p.y * p.y, 2.0 * p.x * p.y));
            let s = solve_beltrami(&d.mesh, &zero(d.mesh.face_count()), &g).unwrap();
            s.values.iter().zip(&g).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(4), err(8));
        assert!(e1 > 0.0 && e2 * 2.0 <= e1, "{e1} {e2}");
    }

    #[test]
    fn csv_readers() {
        let d = gen_disk(1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mu = dir.path().join("mu.csv");
        std::fs::write(&mu, "face,mu1,mu2\n0,0.1,0.2\n").unwrap();
        let m = read_mu_csv(&mu, d.mesh.face_count()).unwrap();
        assert_eq!(m[0], BeltramiCoefficient { mu1: 0.1, mu2: 0.2 });
        std::fs::write(&mu, "face,mu1,mu2\n0,1.0,0.2\n").unwrap();
        assert!(read_mu_csv(&mu, d.mesh.face_count()).is_err());
        let bd = dir.path().join("b.csv");
        std::fs::write(&bd, "vertex,x,y\n1,1,0\n").unwrap();
        assert!(read_boundary_csv(&bd, &d.mesh).is_err());
    }

    proptest! {
        #[test]
        fn b_squares_to_minus_identity(mu in admissible()) {
            let b = b_matrix(mu).unwrap();
            prop_assert!(b.trace().abs() < 1e-12);
            prop_assert!((b * b + Matrix2::identity()).norm() < 1e-9 * (1.0 + b.norm_squared()));
        }

        #[test]
        fn linear_in_boundary_data(alpha in -2.0..2.0f64, beta in -2.0..2.0f64, mu in admissible()) {
            let d = gen_disk(3).unwrap();
            let mu = vec![mu; d.mesh.face_count()];
            let g1 = restrict(&d.mesh, |p| Vec2::new(p.x * p.y, p.x));
            let g2 = restrict(&d.mesh, |p| Vec2::new(p.y.sin(), p.x * p.x));
            let mix: VertexMap = g1.iter().zip(&g2).map(|(a, b)| a * alpha + b * beta).collect();
            let s1 = solve_beltrami(&d.mesh, &mu, &g1).unwrap();
            let s2 = solve_beltrami(&d.mesh, &mu, &g2).unwrap();
            let s = solve_beltrami(&d.mesh, &mu, &mix).unwrap();
            for i in 0..mix.len() {
                let want = s1.values[i] * alpha + s2.values[i] * beta;
                prop_assert!((s.values[i] - want).norm() < 1e-9);
            }
        }
    }
}
