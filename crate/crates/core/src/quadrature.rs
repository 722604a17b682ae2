//! Symmetric quadrature rules on triangles.

use crate::error::{Error, Result};
use crate::mesh::{ParamSurface, ParamTriangle, Vec2};

/// A rule as barycentric points with weights summing to one.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

fn orbit3(a: f64, b: f64, w: f64, pts: &mut Vec<[f64; 3]>, ws: &mut Vec<f64>) {
    for p in [[a, b, b], [b, a, b], [b, b, a]] {
        pts.push(p);
        ws.push(w);
    }
}

/// Dunavant rule exact for polynomials up to `degree` (1 to 5).
pub fn dunavant(degree: usize) -> Result<TriangleRule> {
    let third = 1.0 / 3.0;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match degree {
        1 => {
            points.push([third; 3]);
            weights.push(1.0);
        }
        2 => orbit3(2.0 / 3.0, 1.0 / 6.0, third, &mut points, &mut weights),
        3 => {
            points.push([third; 3]);
            weights.push(-27.0 / 48.0);
            orbit3(0.6, 0.2, 25.0 / 48.0, &mut points, &mut weights);
        }
        4 => {
            orbit3(
                0.108_103_018_168_070,
                0.445_948_490_915_965,
                0.223_381_589_678_011,
                &mut points,
                &mut weights,
            );
            orbit3(
                0.816_847_572_980_459,
                0.091_576_213_509_771,
                0.109_951_743_655_322,
                &mut points,
                &mut weights,
            );
        }
        5 => {
            points.push([third; 3]);
            weights.push(0.225);
            orbit3(
                0.059_715_871_789_770,
                0.470_142_064_105_115,
                0.132_394_152_788_506,
                &mut points,
                &mut weights,
            );
            orbit3(
                0.797_426_985_353_087,
                0.101_286_507_323_456,
                0.125_939_180_544_827,
                &mut points,
                &mut weights,
            );
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "quadrature degree must be between 1 and 5, got {degree}"
            )))
        }
    }
    Ok(TriangleRule {
        degree,
        points,
        weights,
    })
}

impl TriangleRule {
    /// Integrates `g` over a planar triangle.
    pub fn integrate(&self, tri: &ParamTriangle, mut g: impl FnMut(Vec2) -> f64) -> f64 {
        let area = 0.5 * (tri[1] - tri[0]).perp(&(tri[2] - tri[0])).abs();
        let sum: f64 = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * g(tri[0] * l[0] + tri[1] * l[1] + tri[2] * l[2]))
            .sum();
        area * sum
    }

    /// Surface area of `x(tri)`.
    pub fn patch_area(&self, surface: &dyn ParamSurface, tri: &ParamTriangle) -> f64 {
        self.integrate(tri, |w| surface.area_element(w))
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
