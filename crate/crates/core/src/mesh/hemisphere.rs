use std::f64::consts::PI;

use nalgebra::{Matrix2x3, Matrix3};

use super::{Hemisphere, ParamSurface, ParamTriangle, TriMesh, Vec2, Vec3, VertexMap};
use crate::error::{Error, Result};

/// Resolution of a hemisphere mesh: `n` latitude rings, `m` longitude sectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HemisphereSpec {
    pub n: usize,
    pub m: usize,
    /// Exponent used to derive `m = floor(n^r)`, if any.
    pub exponent: Option<f64>,
    /// Whether `m` was raised to the minimum of 3.
    pub clamped: bool,
}

impl HemisphereSpec {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
        }
        if m < 3 {
            return Err(Error::InvalidParameter(format!("m must be at least 3, got {m}")));
        }
        Ok(Self {
            n,
            m,
            exponent: None,
            clamped: false,
        })
    }

    /// `m = max(3, floor(n^r))`.
    pub fn from_exponent(n: usize, r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter(format!("exponent must be positive, got {r}")));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
        }
        // guard against n^r landing a hair below an integer
        let raw = ((n as f64).powf(r) * (1.0 + 1e-12)).floor() as usize;
        Ok(Self {
            n,
            m: raw.max(3),
            exponent: Some(r),
            clamped: raw < 3,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.m * self.n + 1
    }

    pub fn face_count(&self) -> usize {
        self.m * (2 * self.n - 1)
    }

    pub fn phi(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.m as f64
    }

    pub fn psi(&self, j: usize) -> f64 {
        j as f64 * PI / (2.0 * self.n as f64) + PI / 2.0
    }

    /// Mesh index of ring vertex `(i, j)`, with `i` taken modulo `m`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        1 + j * self.m + i % self.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceType {
    /// Fan triangle touching the pole.
    I,
    /// Band triangle with two vertices on the ring nearer the pole.
    II,
    /// Band triangle with two vertices on the ring nearer the equator.
    III,
}

/// A triangulated unit lower hemisphere together with its parameter-domain triangles.
#[derive(Debug, Clone)]
pub struct HemisphereMesh {
    pub spec: HemisphereSpec,
    pub mesh: TriMesh,
    pub patches: Vec<ParamTriangle>,
    pub face_types: Vec<FaceType>,
}

impl HemisphereMesh {
    pub const POLE: usize = 0;

    pub fn surface(&self) -> Hemisphere {
        Hemisphere
    }

    /// The exact conformal map restricted to the vertices.
    pub fn exact_map(&self) -> VertexMap {
        self.mesh
            .vertices()
            .iter()
            .map(|v| stereographic_project(v).expect("hemisphere vertices avoid the north pole"))
            .collect()
    }

    /// Total area of the smooth hemisphere.
    pub fn surface_area(&self) -> f64 {
        2.0 * PI
    }
}

/// Builds the hemisphere mesh with `mn + 1` vertices and `m(2n - 1)` faces.
pub fn gen_hemisphere(spec: &HemisphereSpec) -> Result<HemisphereMesh> {
    let HemisphereSpec { n, m, .. } = *spec;
    if n < 2 || m < 3 {
        return Err(Error::InvalidParameter(format!(
            "need n >= 2 and m >= 3, got n={n}, m={m}"
        )));
    }
    let surface = Hemisphere;
    let mut vertices = Vec::with_capacity(spec.vertex_count());
    vertices.push(Vec3::new(0.0, 0.0, -1.0));
    for j in 0..n {
        for i in 0..m {
            vertices.push(surface.eval(Vec2::new(spec.phi(i), spec.psi(j))));
        }
    }

    let nf = spec.face_count();
    let mut faces = Vec::with_capacity(nf);
    let mut patches = Vec::with_capacity(nf);
    let mut face_types = Vec::with_capacity(nf);
    let w = |i: usize, j: usize| Vec2::new(spec.phi(i), spec.psi(j));

    for i in 0..m {
        faces.push([0, spec.index(i, n - 1), spec.index(i + 1, n - 1)]);
        let mid = 0.5 * (spec.phi(i) + spec.phi(i + 1));
        patches.push([Vec2::new(mid, PI), w(i, n - 1), w(i + 1, n - 1)]);
        face_types.push(FaceType::I);
    }
    for j in 0..n - 1 {
        for i in 0..m {
            faces.push([spec.index(i + 1, j), spec.index(i + 1, j + 1), spec.index(i, j + 1)]);
            patches.push([w(i + 1, j), w(i + 1, j + 1), w(i, j + 1)]);
            face_types.push(FaceType::II);

            faces.push([spec.index(i + 1, j), spec.index(i, j + 1), spec.index(i, j)]);
            patches.push([w(i + 1, j), w(i, j + 1), w(i, j)]);
            face_types.push(FaceType::III);
        }
    }

    let mesh = TriMesh::spatial(vertices, faces)?;
    Ok(HemisphereMesh {
        spec: *spec,
        mesh,
        patches,
        face_types,
    })
}

/// Stereographic projection from the north pole, `(x, y, z) -> (x, y) / (1 - z)`.
pub fn stereographic_project(v: &Vec3) -> Result<Vec2> {
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotOnSphere { norm });
    }
    let gap = 1.0 - v.z;
    if gap < 1e-12 {
        return Err(Error::NearPole { gap });
    }
    Ok(Vec2::new(v.x / gap, v.y / gap))
}

/// Tangential gradient of the stereographic projection at a point of the unit sphere.
pub fn stereographic_gradient(v: &Vec3) -> Matrix2x3<f64> {
    let g = 1.0 / (1.0 - v.z);
    let ambient = Matrix2x3::new(g, 0.0, v.x * g * g, 0.0, g, v.y * g * g);
    let n = v.normalize();
    ambient * (Matrix3::identity() - n * n.transpose())
}
