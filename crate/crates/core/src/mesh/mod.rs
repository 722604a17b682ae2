//! Triangle meshes, per-triangle geometry and mesh generators.

mod disk;
mod hemisphere;
mod metrics;
mod off;
mod surface;

pub use disk::{gen_disk, DiskMesh};
pub use hemisphere::{
    gen_hemisphere, stereographic_gradient, stereographic_project, FaceType, HemisphereMesh, HemisphereSpec,
};
pub use metrics::{triangle_metrics, TriangleGeom, DEGENERACY_TOL};
pub use off::{load_mesh, parse_off, save_mesh, write_off};
pub use surface::{Hemisphere, ParamSurface, ParamTriangle, PlanarIdentity};

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// A map from mesh vertices to the plane, one value per vertex.
pub type VertexMap = Vec<Vec2>;

/// An undirected mesh edge with its (at most two) incident faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub faces: [Option<usize>; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.faces[1].is_none()
    }
}

/// An oriented, manifold triangle mesh embedded in R^2 or R^3.
///
/// Planar meshes store `z = 0`.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    ambient_dim: usize,
    edges: Vec<Edge>,
    boundary_edges: Vec<(usize, usize)>,
    is_boundary: Vec<bool>,
}

impl TriMesh {
    pub fn planar(points: &[Vec2], faces: Vec<[usize; 3]>) -> Result<Self> {
        let vertices = points.iter().map(|p| Vec3::new(p.x, p.y, 0.0)).collect();
        Self::new(vertices, faces, 2)
    }

    pub fn spatial(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        Self::new(vertices, faces, 3)
    }

    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, ambient_dim: usize) -> Result<Self> {
        if ambient_dim != 2 && ambient_dim != 3 {
            return Err(Error::InvalidParameter(format!(
                "ambient dimension must be 2 or 3, got {ambient_dim}"
            )));
        }
        if ambient_dim == 2 && vertices.iter().any(|v| v.z != 0.0) {
            return Err(Error::InvalidParameter(
                "planar mesh has a vertex with non-zero z".into(),
            ));
        }
        let nv = vertices.len();
        for (f, tri) in faces.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= nv) {
                return Err(Error::InvalidTopology(format!(
                    "face {f} references vertex {bad}, but there are only {nv} vertices"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidTopology(format!("face {f} repeats a vertex: {tri:?}")));
            }
        }

        // directed half-edges, keyed by undirected pair
        let mut uses: BTreeMap<(usize, usize), Vec<(usize, bool)>> = BTreeMap::new();
        for (f, tri) in faces.iter().enumerate() {
            for c in 0..3 {
                let (u, v) = (tri[c], tri[(c + 1) % 3]);
                let key = (u.min(v), u.max(v));
                uses.entry(key).or_default().push((f, u < v));
            }
        }

        let mut edges = Vec::with_capacity(uses.len());
        let mut boundary_edges = Vec::new();
        let mut is_boundary = vec![false; nv];
        for (&(a, b), inc) in &uses {
            match inc.as_slice() {
                [(f, forward)] => {
                    edges.push(Edge {
                        a,
                        b,
                        faces: [Some(*f), None],
                    });
                    boundary_edges.push(if *forward { (a, b) } else { (b, a) });
                    is_boundary[a] = true;
                    is_boundary[b] = true;
                }
                [(f, d1), (g, d2)] => {
                    if d1 == d2 {
                        return Err(Error::InvalidTopology(format!(
                            "faces {f} and {g} have inconsistent orientation across edge ({a}, {b})"
                        )));
                    }
                    edges.push(Edge {
                        a,
                        b,
                        faces: [Some(*f), Some(*g)],
                    });
                }
                more => {
                    return Err(Error::InvalidTopology(format!(
                        "edge ({a}, {b}) is shared by {} faces",
                        more.len()
                    )));
                }
            }
        }

        let mesh = Self {
            vertices,
            faces,
            ambient_dim,
            edges,
            boundary_edges,
            is_boundary,
        };
        if ambient_dim == 2 {
            mesh.check_planar_orientation()?;
        }
        Ok(mesh)
    }

    fn check_planar_orientation(&self) -> Result<()> {
        let mut sign = 0.0;
        for (f, tri) in self.faces.iter().enumerate() {
            let [a, b, c] = tri.map(|i| self.vertices[i]);
            let s = (b - a).xy().perp(&(c - a).xy());
            if s == 0.0 {
                continue;
            }
            if sign == 0.0 {
                sign = s.signum();
            } else if s.signum() != sign {
                return Err(Error::InvalidTopology(format!(
                    "planar face {f} has the opposite orientation to the rest of the mesh"
                )));
            }
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vec3 {
        self.vertices[i]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_vertices(&self, f: usize) -> [Vec3; 3] {
        self.faces[f].map(|i| self.vertices[i])
    }

    /// Undirected edges sorted by `(min, max)` vertex index.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Boundary edges directed as they appear in their incident face.
    pub fn boundary_edges(&self) -> &[(usize, usize)] {
        &self.boundary_edges
    }

    pub fn is_boundary_vertex(&self, i: usize) -> bool {
        self.is_boundary[i]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&i| self.is_boundary[i]).collect()
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&i| !self.is_boundary[i]).collect()
    }

    /// Vertex positions projected to the plane (drops `z`).
    pub fn planar_positions(&self) -> VertexMap {
        self.vertices.iter().map(|v| v.xy()).collect()
    }

    /// Largest edge length.
    pub fn max_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| (self.vertices[e.a] - self.vertices[e.b]).norm())
            .fold(0.0, f64::max)
    }

    /// Number of connected components of the vertex-edge graph. Isolated vertices count.
    pub fn component_count(&self) -> usize {
        let n = self.vertex_count();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        count
    }

    /// Index of the face whose centroid is nearest to `p` (lowest index on ties).
    pub fn nearest_face(&self, p: &Vec3) -> usize {
        let mut best = (0, f64::INFINITY);
        for f in 0..self.face_count() {
            let [a, b, c] = self.face_vertices(f);
            let d = ((a + b + c) / 3.0 - p).norm_squared();
            if d < best.1 {
                best = (f, d);
            }
        }
        best.0
    }

    /// Signed area of the image of a planar map, summed over faces.
    pub fn signed_image_area(&self, f: &[Vec2]) -> f64 {
        self.faces
            .iter()
            .map(|t| 0.5 * (f[t[1]] - f[t[0]]).perp(&(f[t[2]] - f[t[0]])))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> TriMesh {
        let p = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        TriMesh::planar(&p, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    #[test]
    fn square_topology() {
        let m = square();
        assert_eq!(m.edges().len(), 5);
        assert_eq!(m.boundary_edges().len(), 4);
        assert_eq!(m.boundary_vertices(), vec![0, 1, 2, 3]);
        assert!(m.interior_vertices().is_empty());
        assert_eq!(m.component_count(), 1);
        assert!((m.signed_image_area(&m.planar_positions()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_index() {
        let p = [Vec2::zeros(), Vec2::x(), Vec2::y()];
        assert!(matches!(
            TriMesh::planar(&p, vec![[0, 1, 3]]),
            Err(Error::InvalidTopology(_))
        ));
    }

    #[test]
    fn rejects_inconsistent_orientation() {
        let p = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let err = TriMesh::planar(&p, vec![[0, 1, 2], [0, 3, 2]]).unwrap_err();
        assert!(matches!(err, Error::InvalidTopology(_)));
    }

    #[test]
    fn rejects_non_manifold_edge() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z(), -Vec3::y()];
        let err = TriMesh::spatial(v, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap_err();
        assert!(matches!(err, Error::InvalidTopology(_)));
    }

    #[test]
    fn boundary_edges_follow_face_direction() {
        let m = square();
        for &(u, v) in m.boundary_edges() {
            let found = m
                .faces()
                .iter()
                .any(|t| (0..3).any(|c| t[c] == u && t[(c + 1) % 3] == v));
            assert!(found, "({u}, {v})");
        }
    }
}
