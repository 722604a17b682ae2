use std::io::Write;

use crate::error::Result;
use crate::mesh::{triangle_metrics, ParamTriangle, TriMesh, Vec3};

/// Default thresholds of the degradation scan.
pub const DEFAULT_EDGE_EPS: (f64, f64) = (0.1, 0.1);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaQuality {
    pub d_omega: f64,
    pub theta_min_omega: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleQuality {
    pub d_v: f64,
    pub theta_min_v: f64,
    /// `d(V) / sin(theta(V))`.
    pub ratio_dsin: f64,
    /// `d(V) / r(V)` with `r` the inradius.
    pub ratio_dr: f64,
    pub omega: Option<OmegaQuality>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub faces: Vec<TriangleQuality>,
    pub max_ratio_dsin: f64,
    pub max_ratio_dr: f64,
    pub h_v: f64,
    pub h_omega: Option<f64>,
}

pub fn quality_report(mesh: &TriMesh, patches: Option<&[ParamTriangle]>) -> Result<QualityReport> {
    let mut faces = Vec::with_capacity(mesh.face_count());
    for f in 0..mesh.face_count() {
        let [a, b, c] = mesh.face_vertices(f);
        let g = triangle_metrics(&a, &b, &c)?;
        let omega = match patches.and_then(|p| p.get(f)) {
            Some(tri) => {
                let lift = tri.map(|w| Vec3::new(w.x, w.y, 0.0));
                let o = triangle_metrics(&lift[0], &lift[1], &lift[2])?;
                Some(OmegaQuality {
                    d_omega: o.diameter,
                    theta_min_omega: o.min_angle(),
                    t: o.area,
                })
            }
            None => None,
        };
        faces.push(TriangleQuality {
            d_v: g.diameter,
            theta_min_v: g.min_angle(),
            ratio_dsin: g.d_over_sin(),
            ratio_dr: g.d_over_r(),
            omega,
        });
    }
    let max = |g: fn(&TriangleQuality) -> f64| faces.iter().map(g).fold(0.0, f64::max);
    let h_omega = patches.map(|_| {
        faces
            .iter()
            .filter_map(|q| q.omega.map(|o| o.d_omega))
            .fold(0.0, f64::max)
    });
    Ok(QualityReport {
        max_ratio_dsin: max(|q| q.ratio_dsin),
        max_ratio_dr: max(|q| q.ratio_dr),
        h_v: max(|q| q.d_v),
        h_omega,
        faces,
    })
}

pub fn is_strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationFlag {
    pub face: usize,
    pub a_over_c: f64,
    pub b_over_c: f64,
}

/// Flags faces whose sorted edges `a <= b <= c` satisfy `a/c <= eps1` and `|b/c - 1| <= eps2`.
pub fn delaunay_degradation_scan(mesh: &TriMesh, eps1: f64, eps2: f64) -> Vec<DegradationFlag> {
    (0..mesh.face_count())
        .filter_map(|f| {
            let [p, q, r] = mesh.face_vertices(f);
            let mut e = [(q - r).norm(), (r - p).norm(), (p - q).norm()];
            e.sort_by(f64::total_cmp);
            let (a, b) = (e[0] / e[2], e[1] / e[2]);
            (a <= eps1 && (b - 1.0).abs() <= eps2).then_some(DegradationFlag {
                face: f,
                a_over_c: a,
                b_over_c: b,
            })
        })
        .collect()
}

/// One row per face followed by a summary row.
pub fn write_quality_csv<W: Write>(report: &QualityReport, flags: &[DegradationFlag], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "face",
        "d_v",
        "theta_min_v",
        "d_over_sin",
        "d_over_r",
        "d_omega",
        "theta_min_omega",
        "t_omega",
        "degraded",
    ])?;
    let fmt = |x: f64| format!("{x:.17e}");
    let opt = |x: Option<f64>| x.map_or(String::new(), fmt);
    let mut flagged = flags.iter().map(|f| f.face).peekable();
    for (f, q) in report.faces.iter().enumerate() {
        let degraded = flagged.next_if_eq(&f).is_some();
        w.write_record([
            f.to_string(),
            fmt(q.d_v),
            fmt(q.theta_min_v),
            fmt(q.ratio_dsin),
            fmt(q.ratio_dr),
            opt(q.omega.map(|o| o.d_omega)),
            opt(q.omega.map(|o| o.theta_min_omega)),
            opt(q.omega.map(|o| o.t)),
            degraded.to_string(),
        ])?;
    }
    w.write_record([
        "max".to_string(),
        fmt(report.h_v),
        fmt(report.faces.iter().map(|q| q.theta_min_v).fold(f64::INFINITY, f64::min)),
        fmt(report.max_ratio_dsin),
        fmt(report.max_ratio_dr),
        opt(report.h_omega),
        String::new(),
        String::new(),
        flags.len().to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_hemisphere, FaceType, HemisphereSpec, Vec2};
    use proptest::prelude::*;

    fn equilateral(s: f64) -> TriMesh {
        let v = [
            Vec2::zeros(),
            Vec2::new(s, 0.0),
            Vec2::new(s / 2.0, s * 3f64.sqrt() / 2.0),
        ];
        TriMesh::planar(&v, vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn equilateral_ratios() {
        let s = 0.3;
        let q = quality_report(&equilateral(s), None).unwrap();
        assert!((q.max_ratio_dsin - 2.0 * s / 3f64.sqrt()).abs() < 1e-14);
        assert!((q.max_ratio_dr - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!(q.h_omega.is_none());
        assert!(delaunay_degradation_scan(&equilateral(s), 0.1, 0.1).is_empty());
    }

    #[test]
    fn needle_is_flagged() {
        let h = (1.0f64 - 0.005f64.powi(2)).sqrt();
        let v = [Vec2::new(-0.005, 0.0), Vec2::new(0.005, 0.0), Vec2::new(0.0, h)];
        let m = TriMesh::planar(&v, vec![[0, 1, 2]]).unwrap();
        let flags = delaunay_degradation_scan(&m, 0.1, 0.1);
        assert_eq!(flags.len(), 1);
        assert!((flags[0].a_over_c - 0.01).abs() < 1e-12);
        assert!((flags[0].b_over_c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hemisphere_dichotomy() {
        let sweep = |r: f64| -> Vec<f64> {
            [8, 16, 32, 64]
                .iter()
                .map(|&n| {
                    let h = gen_hemisphere(&HemisphereSpec::from_exponent(n, r).unwrap()).unwrap();
                    quality_report(&h.mesh, Some(&h.patches)).unwrap().max_ratio_dsin
                })
                .collect()
        };
        let fine = sweep(11.0 / 12.0);
        assert!(is_strictly_decreasing(&fine), "{fine:?}");
        let coarse = sweep(0.25);
        assert!(coarse[3] >= 0.5 * coarse[0], "{coarse:?}");
    }

    #[test]
    fn coarse_hemisphere_degrades_away_from_pole() {
        let h = gen_hemisphere(&HemisphereSpec::from_exponent(64, 0.25).unwrap()).unwrap();
        let flags = delaunay_degradation_scan(&h.mesh, 0.1, 0.1);
        assert!(!flags.is_empty());
        assert!(flags.iter().all(|f| h.face_types[f.face] != FaceType::I));
    }

    #[test]
    fn csv_rows() {
        let h = gen_hemisphere(&HemisphereSpec::new(4, 6).unwrap()).unwrap();
        let q = quality_report(&h.mesh, Some(&h.patches)).unwrap();
        let mut buf = Vec::new();
        write_quality_csv(&q, &[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), h.mesh.face_count() + 2);
    }

    proptest! {
        #[test]
        fn ratio_invariants(pts in proptest::array::uniform3((-3.0..3.0f64, -3.0..3.0f64))) {
            let v = pts.map(|(x, y)| Vec2::new(x, y));
            let Ok(m) = TriMesh::planar(&v, vec![[0, 1, 2]]) else { return Ok(()) };
            let Ok(q) = quality_report(&m, None) else { return Ok(()) };
            let f = q.faces[0];
            prop_assert!(f.ratio_dsin >= f.d_v);
            prop_assert!(f.ratio_dr >= 2.0 * 3f64.sqrt() - 1e-9);
            // d / sin(theta) <= (d / r) d / 2
            prop_assert!(f.ratio_dsin <= 0.5 * f.ratio_dr * f.d_v * (1.0 + 1e-9));
        }
    }
}
