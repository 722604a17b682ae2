//! Barycentric coordinates, their gradients, and projection onto triangle planes.

use nalgebra::Matrix2x3;

use crate::error::{Error, Result};
use crate::mesh::{Vec2, Vec3, DEGENERACY_TOL};

/// Relative tolerance for "on the plane" and "inside the triangle" tests.
pub const PLANE_TOL: f64 = 1e-9;

/// Dual basis of a triangle: `b[l]` is the gradient of the `l`-th barycentric coordinate.
///
/// `s[l] = 2A b[l]`, i.e. `s_i = (v_j - v_k) x n` and cyclic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionFrame {
    pub vertices: [Vec3; 3],
    pub normal: Vec3,
    pub area: f64,
    pub diameter: f64,
    pub s: [Vec3; 3],
    pub b: [Vec3; 3],
}

impl ProjectionFrame {
    /// Gradient of the linear interpolant of `values`.
    pub fn gradient(&self, values: [f64; 3]) -> Vec3 {
        self.b[0] * values[0] + self.b[1] * values[1] + self.b[2] * values[2]
    }

    /// Gradient `f b^T` of the linear interpolant of a planar map.
    pub fn map_gradient(&self, f: &[Vec2; 3]) -> Matrix2x3<f64> {
        (0..3).fold(Matrix2x3::zeros(), |acc, l| acc + f[l] * self.b[l].transpose())
    }

    /// Signed distance of `x` from the plane, along the normal.
    pub fn plane_distance(&self, x: &Vec3) -> f64 {
        (x - self.vertices[0]).dot(&self.normal)
    }

    fn lambdas(&self, p: &Vec3) -> [f64; 3] {
        let v = &self.vertices;
        [
            self.b[0].dot(&(p - v[1])),
            self.b[1].dot(&(p - v[2])),
            self.b[2].dot(&(p - v[0])),
        ]
    }
}

/// Builds the dual basis for a non-degenerate triangle.
pub fn projection_frame(vi: &Vec3, vj: &Vec3, vk: &Vec3) -> Result<ProjectionFrame> {
    let v = [*vi, *vj, *vk];
    let cross = (vj - vi).cross(&(vk - vi));
    let twice = cross.norm();
    let diameter = (vj - vi).norm().max((vk - vj).norm()).max((vi - vk).norm());
    if !(twice > 2.0 * DEGENERACY_TOL * diameter * diameter) {
        return Err(Error::DegenerateTriangle {
            area: 0.5 * twice,
            diameter,
        });
    }
    let normal = cross / twice;
    let s = [
        (v[1] - v[2]).cross(&normal),
        (v[2] - v[0]).cross(&normal),
        (v[0] - v[1]).cross(&normal),
    ];
    Ok(ProjectionFrame {
        vertices: v,
        normal,
        area: 0.5 * twice,
        diameter,
        s,
        b: s.map(|x| x / twice),
    })
}

/// Barycentric coordinates of a point, which must lie on the triangle's plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaryCoords {
    pub lambda: [f64; 3],
    pub inside: bool,
}

pub fn barycentric_coords(p: &Vec3, frame: &ProjectionFrame) -> Result<BaryCoords> {
    let distance = frame.plane_distance(p);
    if distance.abs() > PLANE_TOL * frame.diameter.max(1.0) {
        return Err(Error::OffPlane { distance });
    }
    let lambda = frame.lambdas(p);
    Ok(BaryCoords {
        lambda,
        inside: lambda.iter().all(|&l| l >= -PLANE_TOL),
    })
}

/// Orthogonal projection of a point onto a triangle's plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionResult {
    pub foot: Vec3,
    pub lambda: [f64; 3],
    pub inside: bool,
    pub distance: f64,
}

pub fn project_to_plane(x: &Vec3, frame: &ProjectionFrame) -> ProjectionResult {
    let distance = frame.plane_distance(x);
    let foot = x - frame.normal * distance;
    let lambda = frame.lambdas(&foot);
    ProjectionResult {
        foot,
        lambda,
        inside: lambda.iter().all(|&l| l >= -PLANE_TOL),
        distance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tri() -> impl Strategy<Value = [Vec3; 3]> {
        proptest::array::uniform3(proptest::array::uniform3(-5.0..5.0f64))
            .prop_map(|a| a.map(|p| Vec3::new(p[0], p[1], p[2])))
    }

    #[test]
    fn unit_right_triangle() {
        let f = projection_frame(&Vec3::zeros(), &Vec3::x(), &Vec3::y()).unwrap();
        assert!((f.b[0] - Vec3::new(-1.0, -1.0, 0.0)).norm() < 1e-15);
        assert!((f.b[1] - Vec3::x()).norm() < 1e-15);
        assert!((f.b[2] - Vec3::y()).norm() < 1e-15);
        let c = barycentric_coords(&Vec3::new(0.25, 0.5, 0.0), &f).unwrap();
        assert!((c.lambda[0] - 0.25).abs() < 1e-15);
        assert!(c.inside);
        assert!(matches!(
            barycentric_coords(&Vec3::new(0.2, 0.2, 1.0), &f),
            Err(Error::OffPlane { .. })
        ));
    }

    proptest! {
        #[test]
        fn dual_basis_identities(v in tri(), w in proptest::array::uniform3(0.0..1.0f64), h in -3.0..3.0f64) {
            let Ok(f) = projection_frame(&v[0], &v[1], &v[2]) else { return Ok(()); };
            prop_assume!(f.area > 1e-3 * f.diameter * f.diameter);
            let tol = 1e-9 * (1.0 + f.diameter / f.area * f.diameter);
            // b_l . (v_m - v_{m'}) = delta pattern, and the b's sum to zero
            for l in 0..3 {
                for m in 0..3 {
                    let expect = if l == m { 1.0 } else { 0.0 };
                    let val = f.b[l].dot(&(v[m] - v[(l + 1) % 3]));
                    prop_assert!((val - expect).abs() < tol, "l={} m={} val={}", l, m, val);
                }
                prop_assert!(f.b[l].dot(&f.normal).abs() < tol);
            }
            prop_assert!((f.b[0] + f.b[1] + f.b[2]).norm() < tol);

            // lifting a point in the triangle off the plane and projecting recovers it
            let sum: f64 = w.iter().sum();
            prop_assume!(sum > 1e-3);
            let l = w.map(|x| x / sum);
            let p = v[0] * l[0] + v[1] * l[1] + v[2] * l[2];
            let proj = project_to_plane(&(p + f.normal * h), &f);
            prop_assert!((proj.foot - p).norm() < 1e-9 * (1.0 + f.diameter));
            prop_assert!((proj.distance - h).abs() < 1e-9 * (1.0 + f.diameter));
            for (a, b) in proj.lambda.iter().zip(&l) {
                prop_assert!((a - b).abs() < tol);
            }
            prop_assert!(proj.inside);
        }
    }
}
