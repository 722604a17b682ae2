use nalgebra::{Matrix2, Matrix2x3};

use crate::mesh::{stereographic_gradient, ParamTriangle, Vec2, Vec3};
use crate::quadrature::gauss_legendre;

/// Spectral norm of the pseudo-inverse of `[w_i - w, w_j - w, w_k - w]`.
pub fn pinv_norm_numeric(tri: &ParamTriangle, w: Vec2) -> f64 {
    let m = Matrix2x3::from_columns(&[tri[0] - w, tri[1] - w, tri[2] - w]);
    let s = m.svd(false, false).singular_values;
    1.0 / s.min()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigMinimum {
    pub argmin: Vec2,
    /// Chebyshev distance from the centroid in grid cells.
    pub cells_from_centroid: f64,
    pub grid_min: f64,
    pub at_centroid: f64,
    /// Eigenvalue of `C C^T - 3 c c^T`.
    pub predicted: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigCentroidReport {
    pub centroid: Vec2,
    pub cell: f64,
    /// Ascending eigenvalue order.
    pub eigen: [EigMinimum; 2],
}

impl EigCentroidReport {
    pub fn within(&self, cells: f64) -> bool {
        self.eigen.iter().all(|e| e.cells_from_centroid <= cells)
    }
}

fn sorted_eigs(m: Matrix2<f64>) -> [f64; 2] {
    let e = m.symmetric_eigenvalues();
    [e.min(), e.max()]
}

fn scatter(points: &[Vec2; 3], x: Vec2) -> Matrix2<f64> {
    points.iter().map(|p| (p - x) * (p - x).transpose()).sum()
}

/// Grid search for the minimisers of both eigenvalues of `sum (p - x)(p - x)^T` over the box
/// `c +- d`, `d` the largest distance from the centroid `c`. Among grid points within a relative
/// tolerance of the minimum the one closest to `c` is reported.
pub fn verify_eig_centroid(points: [Vec2; 3], resolution: usize) -> EigCentroidReport {
    let res = resolution.max(3);
    let c = (points[0] + points[1] + points[2]) / 3.0;
    let d = points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max).max(1e-12);
    let cell = 2.0 * d / (res - 1) as f64;
    let origin = c - Vec2::new(d, d);
    let at_c = sorted_eigs(scatter(&points, c));
    let cct: Matrix2<f64> = points.iter().map(|p| p * p.transpose()).sum();
    let predicted = sorted_eigs(cct - c * c.transpose() * 3.0);

    let mut values = vec![[0.0; 2]; res * res];
    for iy in 0..res {
        for ix in 0..res {
            let x = origin + Vec2::new(ix as f64, iy as f64) * cell;
            values[iy * res + ix] = sorted_eigs(scatter(&points, x));
        }
    }
    let tol = 1e-9 * (at_c[1].abs() + d * d);
    let eigen = std::array::from_fn(|l| {
        let grid_min = values.iter().map(|v| v[l]).fold(f64::INFINITY, f64::min);
        let (mut best, mut best_dist) = (c, f64::INFINITY);
        for (idx, v) in values.iter().enumerate() {
            if v[l] <= grid_min + tol {
                let x = origin + Vec2::new((idx % res) as f64, (idx / res) as f64) * cell;
                let dist = (x - c).abs().max() / cell;
                if dist < best_dist {
                    best = x;
                    best_dist = dist;
                }
            }
        }
        EigMinimum {
            argmin: best,
            cells_from_centroid: best_dist,
            grid_min,
            at_centroid: at_c[l],
            predicted: predicted[l],
        }
    });
    EigCentroidReport {
        centroid: c,
        cell,
        eigen,
    }
}

/// Half the integral of `|grad f|^2` over the lower unit hemisphere for stereographic `f`,
/// with an `nodes x nodes` Gauss-Legendre rule in spherical coordinates.
pub fn stereographic_dirichlet_energy(nodes: usize) -> f64 {
    let (x, w) = gauss_legendre(nodes);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let pi = std::f64::consts::PI;
    let mut total = 0.0;
    for (xa, wa) in x.iter().zip(&w) {
        let phi = pi * (xa + 1.0);
        for (xb, wb) in x.iter().zip(&w) {
            let psi = half_pi + half_pi * 0.5 * (xb + 1.0);
            let p = Vec3::new(phi.cos() * psi.sin(), phi.sin() * psi.sin(), psi.cos());
            let g = stereographic_gradient(&p).norm_squared();
            total += wa * wb * g * psi.sin();
        }
    }
    0.5 * total * pi * (half_pi * 0.5)
}
