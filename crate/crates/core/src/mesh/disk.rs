use std::f64::consts::PI;

use super::{TriMesh, Vec2};
use crate::error::{Error, Result};

/// A triangulated unit disk built from concentric rings.
#[derive(Debug, Clone)]
pub struct DiskMesh {
    pub rings: usize,
    pub mesh: TriMesh,
}

/// Unit disk with a centre vertex and `rings` rings; ring `k` has `6k` vertices at radius `k / rings`.
pub fn gen_disk(rings: usize) -> Result<DiskMesh> {
    if rings == 0 {
        return Err(Error::InvalidParameter("disk needs at least one ring".into()));
    }
    let mut points = vec![Vec2::zeros()];
    let mut start = vec![0usize];
    for k in 1..=rings {
        start.push(points.len());
        let count = 6 * k;
        let radius = k as f64 / rings as f64;
        for t in 0..count {
            let a = 2.0 * PI * t as f64 / count as f64;
            points.push(radius * Vec2::new(a.cos(), a.sin()));
        }
    }

    let mut faces = Vec::new();
    for t in 0..6 {
        faces.push([0, start[1] + t, start[1] + (t + 1) % 6]);
    }
    for k in 2..=rings {
        let (ni, no) = (6 * (k - 1), 6 * k);
        let inner = |a: usize| start[k - 1] + a % ni;
        let outer = |b: usize| start[k] + b % no;
        let (mut a, mut b) = (0, 0);
        while a < ni || b < no {
            let advance_outer = if a == ni {
                true
            } else if b == no {
                false
            } else {
                // compare the angular positions of the next vertices, cross-multiplied
                (b + 1) * ni <= (a + 1) * no
            };
            if advance_outer {
                faces.push([inner(a), outer(b), outer(b + 1)]);
                b += 1;
            } else {
                faces.push([inner(a), outer(b), inner(a + 1)]);
                a += 1;
            }
        }
    }

    let mesh = TriMesh::planar(&points, faces)?;
    Ok(DiskMesh { rings, mesh })
}
