//! Disk-topology triangle meshes and their piecewise-linear maps to the
//! canonical domain.

mod obj;
mod plmap;
pub mod primitives;
mod sampling;
mod topology;
mod tutte;

pub use obj::{load_obj, parse_obj, write_obj, write_obj_with_uv};
pub use plmap::{count_flips, Keypoint, PLMap, KEYPOINT_TOLERANCE};
pub use sampling::{sample_domain, DomainSample, DEFAULT_SAMPLE_COUNT};
pub use topology::TopologyError;
pub use tutte::tutte_embed;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed mesh file: {0}")]
    Format(String),
    #[error("topology error: {0}")]
    Topology(#[from] TopologyError),
    #[error("face {face} is degenerate (normalized area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error(
        "point ({:.6}, {:.6}) lies outside the parameterized domain; nearest face {nearest_face} at distance {distance:.3e}",
        point[0], point[1]
    )]
    OutOfDomain {
        point: [f64; 2],
        nearest_face: usize,
        distance: f64,
    },
    #[error("keypoint is {distance:.3e} from the surface (tolerance {tolerance:e})")]
    Projection { distance: f64, tolerance: f64 },
    #[error("vertex index {0} out of range")]
    InvalidVertex(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// A validated disk-topology triangle mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    normals: Vec<[f64; 3]>,
    /// Boundary loop, starting at its lowest vertex index, oriented so the
    /// surface lies to its left.
    boundary: Vec<usize>,
}

/// Minimum face area relative to the squared bounding-box diagonal.
pub const MIN_RELATIVE_AREA: f64 = 1e-12;

impl TriMesh {
    /// Validates topology and degeneracy; normals are computed from the
    /// faces when not supplied.
    pub fn new(
        vertices: Vec<[f64; 3]>,
        faces: Vec<[usize; 3]>,
        normals: Option<Vec<[f64; 3]>>,
    ) -> Result<Self, MeshError> {
        let boundary = topology::validate_disk(vertices.len(), &faces)?;
        let diag_sq = bbox_diagonal_sq(&vertices);
        for (f, tri) in faces.iter().enumerate() {
            let area = triangle_area(&vertices, tri) / diag_sq.max(f64::MIN_POSITIVE);
            if !(area > MIN_RELATIVE_AREA) {
                return Err(MeshError::DegenerateFace { face: f, area });
            }
        }
        let normals = match normals {
            Some(n) if n.len() == vertices.len() => n.into_iter().map(normalize3).collect(),
            Some(_) => {
                return Err(MeshError::Format(
                    "normal count does not match vertex count".into(),
                ))
            }
            None => vertex_normals(&vertices, &faces),
        };
        Ok(TriMesh {
            vertices,
            faces,
            normals,
            boundary,
        })
    }

    /// Centers the bounding box at the origin and scales its diagonal to 1.
    pub fn normalized(mut self) -> Self {
        let (lo, hi) = bbox(&self.vertices);
        let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
        let diag = bbox_diagonal_sq(&self.vertices).sqrt();
        for v in &mut self.vertices {
            for k in 0..3 {
                v[k] = (v[k] - c[k]) / diag;
            }
        }
        self
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> &[[f64; 3]] {
        &self.normals
    }

    pub fn boundary_loop(&self) -> &[usize] {
        &self.boundary
    }

    pub fn face_area(&self, f: usize) -> f64 {
        triangle_area(&self.vertices, &self.faces[f])
    }

    pub fn edge_count(&self) -> usize {
        topology::undirected_edges(&self.faces).len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.faces.len() as i64
    }
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub(crate) fn normalize3(a: [f64; 3]) -> [f64; 3] {
    let n = norm3(a);
    if n > 0.0 {
        [a[0] / n, a[1] / n, a[2] / n]
    } else {
        a
    }
}

fn triangle_area(v: &[[f64; 3]], f: &[usize; 3]) -> f64 {
    0.5 * norm3(cross(sub3(v[f[1]], v[f[0]]), sub3(v[f[2]], v[f[0]])))
}

/// Signed area of a 2D triangle (positive when counter-clockwise).
pub fn signed_area_2d(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn bbox(v: &[[f64; 3]]) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in v {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

fn bbox_diagonal_sq(v: &[[f64; 3]]) -> f64 {
    let (lo, hi) = bbox(v);
    (0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum()
}

/// Area-weighted vertex normals.
fn vertex_normals(v: &[[f64; 3]], faces: &[[usize; 3]]) -> Vec<[f64; 3]> {
    let mut n = vec![[0.0; 3]; v.len()];
    for f in faces {
        let c = cross(sub3(v[f[1]], v[f[0]]), sub3(v[f[2]], v[f[0]]));
        for &i in f {
            for k in 0..3 {
                n[i][k] += c[k];
            }
        }
    }
    n.into_iter().map(normalize3).collect()
}

#[cfg(test)]
mod tests;
