use nalgebra::Matrix3x2;

use super::{Vec2, Vec3};

/// A triangle in the parameter domain.
pub type ParamTriangle = [Vec2; 3];

/// A smooth parameterisation `x : Omega -> R^3` with the constants the error bounds need.
pub trait ParamSurface: Send + Sync {
    fn eval(&self, w: Vec2) -> Vec3;

    /// Columns are the partial derivatives `dx/dw1`, `dx/dw2`.
    fn jacobian(&self, w: Vec2) -> Matrix3x2<f64>;

    /// Lipschitz constant `C_M` of the Jacobian in the Frobenius norm.
    fn lipschitz(&self) -> f64;

    /// Upper bound of `|grad x|_F` over the domain.
    fn sigma_max(&self) -> f64;

    /// Smallest singular value of the Jacobian at `w`.
    fn sigma_min_at(&self, w: Vec2) -> f64 {
        let svd = self.jacobian(w).svd(false, false);
        svd.singular_values.min()
    }

    /// Lower bound of the smallest singular value over a parameter triangle.
    fn sigma_min_over(&self, tri: &ParamTriangle) -> f64;

    /// Exact area of `x(tri)`, when a closed form is available.
    fn patch_area(&self, _tri: &ParamTriangle) -> Option<f64> {
        None
    }

    /// Surface area element `|dx/dw1 x dx/dw2|`.
    fn area_element(&self, w: Vec2) -> f64 {
        let j = self.jacobian(w);
        j.column(0).cross(&j.column(1)).norm()
    }
}

/// The unit lower hemisphere `(cos phi sin psi, sin phi sin psi, cos psi)`, `psi` in `[pi/2, pi]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hemisphere;

impl ParamSurface for Hemisphere {
    fn eval(&self, w: Vec2) -> Vec3 {
        let (sp, cp) = w.x.sin_cos();
        let (ss, cs) = w.y.sin_cos();
        Vec3::new(cp * ss, sp * ss, cs)
    }

    fn jacobian(&self, w: Vec2) -> Matrix3x2<f64> {
        let (sp, cp) = w.x.sin_cos();
        let (ss, cs) = w.y.sin_cos();
        Matrix3x2::new(-sp * ss, cp * cs, cp * ss, sp * cs, 0.0, -ss)
    }

    fn lipschitz(&self) -> f64 {
        std::f64::consts::SQRT_2
    }

    fn sigma_max(&self) -> f64 {
        std::f64::consts::SQRT_2
    }

    fn sigma_min_at(&self, w: Vec2) -> f64 {
        w.y.sin().abs().min(1.0)
    }

    fn sigma_min_over(&self, tri: &ParamTriangle) -> f64 {
        // sin is concave on [pi/2, pi], so its minimum over a triangle sits at a corner
        tri.iter().map(|w| self.sigma_min_at(*w)).fold(f64::INFINITY, f64::min)
    }

    fn patch_area(&self, tri: &ParamTriangle) -> Option<f64> {
        // the integrand sin(psi) depends on one linear coordinate, so the integral is
        // 2|T| times the second divided difference of an antiderivative pair
        let mut psi = tri.map(|w| w.y);
        psi.sort_by(f64::total_cmp);
        let [a, b, c] = psi;
        let f = |x: f64| -x.sin();
        let df = |x: f64| -x.cos();
        let ddf = |x: f64| x.sin();
        let tol = 1e-12 * (1.0 + c.abs());
        let dd = if c - a <= tol {
            0.5 * ddf((a + b + c) / 3.0)
        } else if b - a <= tol {
            ((f(c) - f(a)) / (c - a) - df(a)) / (c - a)
        } else if c - b <= tol {
            (df(c) - (f(c) - f(a)) / (c - a)) / (c - a)
        } else {
            ((f(c) - f(b)) / (c - b) - (f(b) - f(a)) / (b - a)) / (c - a)
        };
        Some(2.0 * triangle_area(tri) * dd)
    }
}

fn triangle_area(tri: &ParamTriangle) -> f64 {
    0.5 * (tri[1] - tri[0]).perp(&(tri[2] - tri[0])).abs()
}

/// The plane itself, `x(w) = (w1, w2, 0)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlanarIdentity;

impl ParamSurface for PlanarIdentity {
    fn eval(&self, w: Vec2) -> Vec3 {
        Vec3::new(w.x, w.y, 0.0)
    }

    fn jacobian(&self, _w: Vec2) -> Matrix3x2<f64> {
        Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)
    }

    fn lipschitz(&self) -> f64 {
        0.0
    }

    fn sigma_max(&self) -> f64 {
        std::f64::consts::SQRT_2
    }

    fn sigma_min_at(&self, _w: Vec2) -> f64 {
        1.0
    }

    fn sigma_min_over(&self, _tri: &ParamTriangle) -> f64 {
        1.0
    }

    fn patch_area(&self, tri: &ParamTriangle) -> Option<f64> {
        Some(triangle_area(tri))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn hemisphere_jacobian_matches_differences() {
        let s = Hemisphere;
        let w = Vec2::new(0.7, 2.1);
        let h = 1e-6;
        let j = s.jacobian(w);
        for c in 0..2 {
            let mut e = Vec2::zeros();
            e[c] = h;
            let fd = (s.eval(w + e) - s.eval(w - e)) / (2.0 * h);
            assert!((fd - j.column(c)).norm() < 1e-9);
        }
    }

    #[test]
    fn hemisphere_singular_values() {
        let s = Hemisphere;
        for &psi in &[PI / 2.0, 2.0, 2.8, PI - 1e-3] {
            let w = Vec2::new(1.3, psi);
            let svd = s.jacobian(w).svd(false, false);
            assert!((svd.singular_values.min() - psi.sin()).abs() < 1e-12);
            assert!((svd.singular_values.max() - 1.0).abs() < 1e-12);
            assert!((s.area_element(w) - psi.sin()).abs() < 1e-12);
            assert!(s.jacobian(w).norm() <= s.sigma_max() + 1e-12);
        }
    }

    #[test]
    fn hemisphere_patch_area_matches_quadrature() {
        let s = Hemisphere;
        let rule = crate::quadrature::dunavant(5).unwrap();
        let tris = [
            [Vec2::new(0.0, 1.7), Vec2::new(0.3, 1.7), Vec2::new(0.0, 2.0)],
            [Vec2::new(0.1, 1.6), Vec2::new(0.2, 2.2), Vec2::new(0.5, 1.9)],
            [Vec2::new(0.4, PI), Vec2::new(0.0, 2.9), Vec2::new(0.8, 2.9)],
        ];
        for t in &tris {
            // refine by splitting into 4^3 pieces for a reference value
            let mut pieces = vec![*t];
            for _ in 0..3 {
                pieces = pieces
                    .iter()
                    .flat_map(|p| {
                        let m = [(p[0] + p[1]) / 2.0, (p[1] + p[2]) / 2.0, (p[2] + p[0]) / 2.0];
                        [
                            [p[0], m[0], m[2]],
                            [m[0], p[1], m[1]],
                            [m[2], m[1], p[2]],
                            [m[0], m[1], m[2]],
                        ]
                    })
                    .collect();
            }
            let reference: f64 = pieces.iter().map(|p| rule.patch_area(&s, p)).sum();
            let exact = s.patch_area(t).unwrap();
            assert!((exact - reference).abs() < 1e-10, "{exact} vs {reference}");
        }
        // whole hemisphere from a rectangle split in two
        let r = [
            Vec2::new(0.0, PI / 2.0),
            Vec2::new(2.0 * PI, PI / 2.0),
            Vec2::new(2.0 * PI, PI),
        ];
        let q = [Vec2::new(0.0, PI / 2.0), Vec2::new(2.0 * PI, PI), Vec2::new(0.0, PI)];
        let total = s.patch_area(&r).unwrap() + s.patch_area(&q).unwrap();
        assert!((total - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn hemisphere_jacobian_lipschitz_sampled() {
        let s = Hemisphere;
        let mut worst: f64 = 0.0;
        for a in 0..12 {
            for b in 0..12 {
                let w = Vec2::new(a as f64 * 0.5, PI / 2.0 + b as f64 * 0.13);
                let d = Vec2::new(0.01 * (a as f64 - 5.0), 0.01 * (b as f64 - 6.0));
                if d.norm() == 0.0 {
                    continue;
                }
                let r = (s.jacobian(w + d) - s.jacobian(w)).norm() / d.norm();
                worst = worst.max(r);
            }
        }
        assert!(worst <= s.lipschitz() + 1e-9, "{worst}");
    }
}
