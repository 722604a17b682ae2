use super::Vec3;
use crate::error::{Error, Result};

/// Relative area threshold below which a triangle is treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-14;

/// Geometry of one triangle `(v_i, v_j, v_k)`.
///
/// Arrays are indexed by corner: entry `c` belongs to the vertex at position `c`
/// and to the edge opposite it, so `opposite[0] = |v_jk|`, `angles[0]` is the
/// angle at `v_i`, and so on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleGeom {
    pub opposite: [f64; 3],
    pub angles: [f64; 3],
    pub cotangents: [f64; 3],
    pub area: f64,
    pub diameter: f64,
    pub inradius: f64,
    pub normal: Vec3,
}

impl TriangleGeom {
    pub fn len_ij(&self) -> f64 {
        self.opposite[2]
    }

    pub fn len_jk(&self) -> f64 {
        self.opposite[0]
    }

    pub fn len_ki(&self) -> f64 {
        self.opposite[1]
    }

    pub fn min_angle(&self) -> f64 {
        self.angles.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `d / sin(theta_min)`.
    pub fn d_over_sin(&self) -> f64 {
        self.diameter / self.min_angle().sin()
    }

    /// `d / r`; at least `2 sqrt(3)`, with equality for equilateral triangles.
    pub fn d_over_r(&self) -> f64 {
        self.diameter / self.inradius
    }
}

/// Computes lengths, angles, cotangents, area, diameter, inradius and the unit normal.
pub fn triangle_metrics(vi: &Vec3, vj: &Vec3, vk: &Vec3) -> Result<TriangleGeom> {
    let p = [*vi, *vj, *vk];
    let opposite = [(p[2] - p[1]).norm(), (p[0] - p[2]).norm(), (p[1] - p[0]).norm()];
    let diameter = opposite.iter().copied().fold(0.0, f64::max);
    let cross = (p[1] - p[0]).cross(&(p[2] - p[0]));
    let twice_area = cross.norm();
    let area = 0.5 * twice_area;
    if !(area > DEGENERACY_TOL * diameter * diameter) {
        return Err(Error::DegenerateTriangle { area, diameter });
    }
    let mut angles = [0.0; 3];
    let mut cotangents = [0.0; 3];
    for c in 0..3 {
        let a = p[(c + 1) % 3] - p[c];
        let b = p[(c + 2) % 3] - p[c];
        let dot = a.dot(&b);
        angles[c] = twice_area.atan2(dot);
        cotangents[c] = dot / twice_area;
    }
    let perimeter: f64 = opposite.iter().sum();
    Ok(TriangleGeom {
        opposite,
        angles,
        cotangents,
        area,
        diameter,
        inradius: 2.0 * area / perimeter,
        normal: cross / twice_area,
    })
}
