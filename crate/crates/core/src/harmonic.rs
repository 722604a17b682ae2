//! Weak Laplace-Beltrami solve with a point source, used to initialise the minimiser.

use crate::error::{Error, Result};
use crate::laplacian::CotanLaplacian;
use nalgebra::{Matrix2, Matrix3x2};

use crate::barycentric::projection_frame;
use crate::mesh::{TriMesh, TriangleGeom, Vec2, Vec3, VertexMap};
use crate::sparse::{solve_spd, Factorization};

/// Right-hand side of the weak problem: three non-zero rows on the source face.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTerm {
    pub face: usize,
    pub rows: [Vec2; 3],
    pub rhs: Vec<Vec2>,
}

/// The `(a, b)` pair for each corner of a face.
///
/// For corner `i` with neighbours `j, k`, `(a_i, b_i)` is the first row of the square
/// root of the Gram matrix of `[v_jk, v_ji]`.
pub fn source_rows(geom: &TriangleGeom) -> [(f64, f64); 3] {
    let two_a = 2.0 * geom.area;
    std::array::from_fn(|c| {
        let jk = geom.opposite[c];
        let ij = geom.opposite[(c + 2) % 3];
        let cos_j = geom.angles[(c + 1) % 3].cos();
        let den = (jk * jk + ij * ij + 2.0 * two_a).sqrt();
        ((jk * jk + two_a) / den, ij * jk * cos_j / den)
    })
}

/// Orthonormal tangent frame `V (V^T V)^{-1/2}` with `V = [v_j - v_i, v_k - v_j]`.
fn face_frame(v: &[Vec3; 3]) -> Matrix3x2<f64> {
    let m = Matrix3x2::from_columns(&[v[1] - v[0], v[2] - v[1]]);
    let gram: Matrix2<f64> = m.transpose() * m;
    let eig = gram.symmetric_eigen();
    let inv_sqrt = eig.eigenvectors
        * Matrix2::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    m * inv_sqrt
}

/// Places the point source on `face`.
///
/// All three rows are taken in the tangent frame of the face's first corner, so the first row is
/// `(a_i, -b_i) / (2A)` and the rows sum to zero.
pub fn build_source(mesh: &TriMesh, face: usize) -> Result<SourceTerm> {
    if face >= mesh.face_count() {
        return Err(Error::InvalidParameter(format!(
            "source face {face} out of range ({} faces)",
            mesh.face_count()
        )));
    }
    let v = mesh.face_vertices(face);
    let frame = projection_frame(&v[0], &v[1], &v[2])?;
    let q = face_frame(&v);
    let rows = frame.b.map(|g| {
        let c = q.transpose() * g;
        Vec2::new(-c.x, c.y)
    });
    let mut rhs = vec![Vec2::zeros(); mesh.vertex_count()];
    for (c, &v) in mesh.faces()[face].iter().enumerate() {
        rhs[v] += rows[c];
    }
    Ok(SourceTerm { face, rows, rhs })
}

/// Source on the face nearest `point`.
pub fn build_source_near(mesh: &TriMesh, point: &Vec3) -> Result<SourceTerm> {
    build_source(mesh, mesh.nearest_face(point))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gauge {
    pub pinned_vertex: usize,
}

#[derive(Debug, Clone)]
pub struct HarmonicSolution {
    pub values: VertexMap,
    /// `|L f - b|_F / |b|_F` on the reduced system.
    pub residual_norm: f64,
    pub gauge: Gauge,
    pub factorization: Factorization,
}

/// Solves `L f = b` with `b` projected onto the range of `L` and `f[pin] = 0`.
pub fn solve_weak_lb(
    mesh: &TriMesh,
    lap: &CotanLaplacian,
    source: &SourceTerm,
    pin: usize,
) -> Result<HarmonicSolution> {
    let n = lap.size();
    if source.rhs.len() != n || mesh.vertex_count() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: source.rhs.len(),
        });
    }
    if pin >= n {
        return Err(Error::InvalidParameter(format!("pinned vertex {pin} out of range")));
    }
    if mesh.component_count() != 1 {
        return Err(Error::SingularBeyondGauge);
    }

    let mean = source.rhs.iter().sum::<Vec2>() / n as f64;
    let reduced = |i: usize| if i < pin { i } else { i - 1 };
    let triplets: Vec<(usize, usize, f64)> = lap
        .triplets()
        .into_iter()
        .filter(|&(r, c, _)| r != pin && c != pin)
        .map(|(r, c, v)| (reduced(r), reduced(c), v))
        .collect();
    let rhs: Vec<Vec<f64>> = (0..2)
        .map(|d| {
            (0..n)
                .filter(|&i| i != pin)
                .map(|i| source.rhs[i][d] - mean[d])
                .collect()
        })
        .collect();
    let (cols, factorization) = solve_spd(n - 1, &triplets, &rhs).map_err(|e| match e {
        Error::SolverFailure(_) => Error::SingularBeyondGauge,
        other => other,
    })?;

    let residual_norm = {
        let mut num = 0.0;
        let mut den = 0.0;
        for d in 0..2 {
            let ax = crate::sparse::triplet_matvec(n - 1, &triplets, &cols[d]);
            num += ax.iter().zip(&rhs[d]).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            den += rhs[d].iter().map(|b| b * b).sum::<f64>();
        }
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    };

    let mut values = vec![Vec2::zeros(); n];
    for i in (0..n).filter(|&i| i != pin) {
        values[i] = Vec2::new(cols[0][reduced(i)], cols[1][reduced(i)]);
    }
    Ok(HarmonicSolution {
        values,
        residual_norm,
        gauge: Gauge { pinned_vertex: pin },
        factorization,
    })
}

/// Maps a harmonic image whose interior lies outside its boundary curve to the inside by the
/// complex inversion about the boundary centroid, scaled to the mean boundary radius. Vertices of
/// the source face are sent to the centre. Images already inside are returned unchanged.
pub fn invert_exterior(mesh: &TriMesh, f: &[Vec2], source_face: usize) -> Result<VertexMap> {
    if f.len() != mesh.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.vertex_count(),
            found: f.len(),
        });
    }
    let boundary = mesh.boundary_vertices();
    if boundary.is_empty() {
        return Err(Error::InvalidTopology("mesh has no boundary".into()));
    }
    let source = mesh.faces()[source_face];
    let centre = boundary.iter().map(|&b| f[b]).sum::<Vec2>() / boundary.len() as f64;
    let radius = boundary.iter().map(|&b| (f[b] - centre).norm()).sum::<f64>() / boundary.len() as f64;
    let inner: Vec<usize> = mesh
        .interior_vertices()
        .into_iter()
        .filter(|v| !source.contains(v))
        .collect();
    if inner.is_empty() || !(radius > 0.0) {
        return Ok(f.to_vec());
    }
    let inner_radius = inner.iter().map(|&v| (f[v] - centre).norm()).sum::<f64>() / inner.len() as f64;
    if inner_radius <= radius {
        return Ok(f.to_vec());
    }
    Ok(f.iter()
        .enumerate()
        .map(|(v, p)| {
            let w = (p - centre) / radius;
            let d = w.norm_squared();
            if source.contains(&v) || d == 0.0 {
                centre
            } else {
                centre + Vec2::new(w.x, -w.y) * (radius / d)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplacian::{assemble_laplacian, RhoMode};
    use crate::mesh::{gen_hemisphere, triangle_metrics, HemisphereSpec};

    fn geom(a: Vec3, b: Vec3, c: Vec3) -> TriangleGeom {
        triangle_metrics(&a, &b, &c).unwrap()
    }

    #[test]
    fn equilateral_rows() {
        let g = geom(Vec3::zeros(), Vec3::x(), Vec3::new(0.5, 3f64.sqrt() / 2.0, 0.0));
        let want = (1.0 + 3f64.sqrt() / 2.0) / (2.0 + 3f64.sqrt()).sqrt();
        for (a, b) in source_rows(&g) {
            assert!((a - want).abs() < 1e-14);
            assert!((b - 0.5 / (2.0 + 3f64.sqrt()).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn right_angle_zeroes_b() {
        // right angle at the second vertex: b for the first corner vanishes
        let g = geom(Vec3::x(), Vec3::zeros(), Vec3::y());
        let rows = source_rows(&g);
        assert!(rows[0].1.abs() < 1e-15);
        assert!(rows[1].1.abs() > 0.1 && rows[2].1.abs() > 0.1);
    }

    #[test]
    fn rows_match_matrix_square_root() {
        let v = [
            Vec3::new(0.1, 0.2, 0.0),
            Vec3::new(1.3, -0.1, 0.4),
            Vec3::new(0.4, 0.9, -0.2),
        ];
        let g = geom(v[0], v[1], v[2]);
        let rows = source_rows(&g);
        for c in 0..3 {
            let (i, j, k) = (v[c], v[(c + 1) % 3], v[(c + 2) % 3]);
            let (p, q) = (j - k, j - i);
            let m = Matrix2::new(p.dot(&p), p.dot(&q), q.dot(&p), q.dot(&q));
            // principal square root of an SPD 2x2 matrix
            let s = m.determinant().sqrt();
            let root = (m + Matrix2::identity() * s) / (m.trace() + 2.0 * s).sqrt();
            assert!((root * root - m).norm() < 1e-12);
            assert!((rows[c].0 - root[(0, 0)]).abs() < 1e-13);
            assert!((rows[c].1 - root[(0, 1)]).abs() < 1e-13);
        }
        // cyclic relabelling permutes the pairs
        let g2 = geom(v[1], v[2], v[0]);
        let rows2 = source_rows(&g2);
        for c in 0..3 {
            assert!((rows2[c].0 - rows[(c + 1) % 3].0).abs() < 1e-13);
            assert!((rows2[c].1 - rows[(c + 1) % 3].1).abs() < 1e-13);
        }
    }

    #[test]
    fn solve_is_gauge_unique_and_linear() {
        let h = gen_hemisphere(&HemisphereSpec::new(8, 12).unwrap()).unwrap();
        let l = assemble_laplacian(&h.mesh, RhoMode::Unit, None).unwrap();
        let src = build_source_near(&h.mesh, &Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert_eq!(h.face_types[src.face], crate::mesh::FaceType::I);
        assert_eq!(src.rhs.iter().filter(|v| v.norm() > 0.0).count(), 3);

        let s0 = solve_weak_lb(&h.mesh, &l, &src, 0).unwrap();
        assert!(s0.residual_norm < 1e-10, "{}", s0.residual_norm);
        let s5 = solve_weak_lb(&h.mesh, &l, &src, 5).unwrap();
        let shift = s0.values[5] - s5.values[5];
        for (a, b) in s0.values.iter().zip(&s5.values) {
            assert!((a - b - shift).norm() < 1e-9);
        }

        let mut scaled = src.clone();
        scaled.rhs.iter_mut().for_each(|v| *v *= 3.0);
        let s3 = solve_weak_lb(&h.mesh, &l, &scaled, 0).unwrap();
        for (a, b) in s0.values.iter().zip(&s3.values) {
            assert!((a * 3.0 - b).norm() < 1e-9 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn source_rows_share_one_frame() {
        let h = gen_hemisphere(&HemisphereSpec::new(5, 7).unwrap()).unwrap();
        for f in [0, 9, 30] {
            let src = build_source(&h.mesh, f).unwrap();
            let [a, b, c] = h.mesh.face_vertices(f);
            let g = triangle_metrics(&a, &b, &c).unwrap();
            let (a0, b0) = source_rows(&g)[0];
            assert!((src.rows[0] - Vec2::new(a0, -b0) / (2.0 * g.area)).norm() < 1e-10);
            assert!(src.rows.iter().sum::<Vec2>().norm() < 1e-10);
            // the frame is orthonormal: the rows have the Gram structure of the barycentric gradients
            let frame = projection_frame(&a, &b, &c).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let dot = src.rows[i].dot(&src.rows[j]);
                    assert!((dot - frame.b[i].dot(&frame.b[j])).abs() < 1e-9 * frame.b[i].norm_squared());
                }
            }
        }
    }

    #[test]
    fn translation_invariant_source() {
        let h = gen_hemisphere(&HemisphereSpec::new(3, 5).unwrap()).unwrap();
        let shifted: Vec<Vec3> = h
            .mesh
            .vertices()
            .iter()
            .map(|v| v + Vec3::new(3.0, -1.0, 2.0))
            .collect();
        let m2 = TriMesh::spatial(shifted, h.mesh.faces().to_vec()).unwrap();
        let a = build_source(&h.mesh, 4).unwrap();
        let b = build_source(&m2, 4).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn disconnected_mesh_is_rejected() {
        let v = vec![
            Vec3::zeros(),
            Vec3::x(),
            Vec3::y(),
            Vec3::new(5.0, 0.0, 0.0),
            Vec3::new(6.0, 0.0, 0.0),
            Vec3::new(5.0, 1.0, 0.0),
        ];
        let m = TriMesh::spatial(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        let l = assemble_laplacian(&m, RhoMode::Unit, None).unwrap();
        let s = build_source(&m, 0).unwrap();
        assert!(matches!(solve_weak_lb(&m, &l, &s, 0), Err(Error::SingularBeyondGauge)));
    }
}
