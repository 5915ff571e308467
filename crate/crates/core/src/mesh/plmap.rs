use super::{cross, normalize3, signed_area_2d, sub3, MeshError, TriMesh};
use crate::domain::Domain;

/// Maximum distance from the surface for a 3D keypoint to be pulled back.
pub const KEYPOINT_TOLERANCE: f64 = 1e-3;

const INSIDE_EPS: f64 = 1e-12;

/// A keypoint given as a mesh vertex or as a point near the surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Keypoint {
    Vertex(usize),
    Point([f64; 3]),
}

/// A disk mesh together with a bijective embedding of its vertices into the
/// domain. Read as a map from the domain to the surface, this is the
/// piecewise-linear ground truth that neural maps are fitted to.
#[derive(Clone, Debug)]
pub struct PLMap {
    mesh: TriMesh,
    uv: Vec<[f64; 2]>,
    domain: Domain,
    index: UvGrid,
}

/// Uniform bucket grid over the UV bounding box.
#[derive(Clone, Debug)]
struct UvGrid {
    lo: [f64; 2],
    size: [f64; 2],
    n: usize,
    cells: Vec<Vec<u32>>,
}

impl UvGrid {
    fn build(uv: &[[f64; 2]], faces: &[[usize; 3]]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in uv {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let n = ((faces.len() as f64).sqrt().ceil() as usize).clamp(1, 512);
        let size = [(hi[0] - lo[0]).max(1e-12), (hi[1] - lo[1]).max(1e-12)];
        let mut grid = UvGrid {
            lo,
            size,
            n,
            cells: vec![Vec::new(); n * n],
        };
        for (fi, f) in faces.iter().enumerate() {
            let mut flo = [f64::INFINITY; 2];
            let mut fhi = [f64::NEG_INFINITY; 2];
            for &v in f {
                for k in 0..2 {
                    flo[k] = flo[k].min(uv[v][k]);
                    fhi[k] = fhi[k].max(uv[v][k]);
                }
            }
            let (i0, j0) = grid.cell_of(flo);
            let (i1, j1) = grid.cell_of(fhi);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    grid.cells[j * n + i].push(fi as u32);
                }
            }
        }
        grid
    }

    fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let f = |k: usize| {
            let t = (p[k] - self.lo[k]) / self.size[k] * self.n as f64;
            (t.floor().max(0.0) as usize).min(self.n - 1)
        };
        (f(0), f(1))
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|k| p[k] >= self.lo[k] - 1e-9 && p[k] <= self.lo[k] + self.size[k] + 1e-9)
    }
}

fn barycentric(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [f64; 3] {
    let area = signed_area_2d(a, b, c);
    let l0 = signed_area_2d(p, b, c) / area;
    let l1 = signed_area_2d(a, p, c) / area;
    [l0, l1, 1.0 - l0 - l1]
}

fn dist_point_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    let q = [a[0] + t * d[0] - p[0], a[1] + t * d[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1]).sqrt()
}

/// Closest point on triangle `abc` to `p`, as barycentric coordinates.
fn closest_on_triangle(p: [f64; 3], a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> [f64; 3] {
    let dot = |x: [f64; 3], y: [f64; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    let ab = sub3(b, a);
    let ac = sub3(c, a);
    let ap = sub3(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = sub3(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = sub3(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [1.0 - v - w, v, w]
}

/// Number of triangles whose mapped 2D orientation is not positive.
pub fn count_flips(faces: &[[usize; 3]], points: &[[f64; 2]]) -> usize {
    faces
        .iter()
        .filter(|f| !(signed_area_2d(points[f[0]], points[f[1]], points[f[2]]) > 0.0))
        .count()
}

impl PLMap {
    /// Pairs a mesh with per-vertex domain coordinates; every UV triangle
    /// must be positively oriented.
    pub fn new(mesh: TriMesh, uv: Vec<[f64; 2]>, domain: Domain) -> Result<Self, MeshError> {
        if uv.len() != mesh.vertices().len() {
            return Err(MeshError::Format(format!(
                "{} uv coordinates for {} vertices",
                uv.len(),
                mesh.vertices().len()
            )));
        }
        let flips = count_flips(mesh.faces(), &uv);
        if flips > 0 {
            return Err(MeshError::Numerical(format!(
                "{flips} uv triangles are flipped or degenerate"
            )));
        }
        let index = UvGrid::build(&uv, mesh.faces());
        Ok(PLMap {
            mesh,
            uv,
            domain,
            index,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn uv(&self) -> &[[f64; 2]] {
        &self.uv
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn uv_signed_area(&self, f: usize) -> f64 {
        let t = self.mesh.faces()[f];
        signed_area_2d(self.uv[t[0]], self.uv[t[1]], self.uv[t[2]])
    }

    /// Face containing `p` and the barycentric coordinates of `p` in it.
    pub fn locate(&self, p: [f64; 2]) -> Result<(usize, [f64; 3]), MeshError> {
        if p[0].is_finite() && p[1].is_finite() && self.index.contains(p) {
            let (i, j) = self.index.cell_of(p);
            let mut best: Option<(usize, [f64; 3], f64)> = None;
            for &f in &self.index.cells[j * self.index.n + i] {
                let f = f as usize;
                let t = self.mesh.faces()[f];
                let l = barycentric(p, self.uv[t[0]], self.uv[t[1]], self.uv[t[2]]);
                let m = l[0].min(l[1]).min(l[2]);
                if m >= -INSIDE_EPS && best.is_none_or(|b| m > b.2) {
                    best = Some((f, l, m));
                }
            }
            if let Some((f, l, _)) = best {
                let c = l.map(|x| x.max(0.0));
                let s = c[0] + c[1] + c[2];
                return Ok((f, c.map(|x| x / s)));
            }
        }
        let (nearest_face, distance) = self.nearest_face(p);
        Err(MeshError::OutOfDomain {
            point: p,
            nearest_face,
            distance,
        })
    }

    fn nearest_face(&self, p: [f64; 2]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (fi, t) in self.mesh.faces().iter().enumerate() {
            let (a, b, c) = (self.uv[t[0]], self.uv[t[1]], self.uv[t[2]]);
            let d = dist_point_segment(p, a, b)
                .min(dist_point_segment(p, b, c))
                .min(dist_point_segment(p, c, a));
            if d < best.1 {
                best = (fi, d);
            }
        }
        best
    }

    /// Barycentric interpolation of position and (renormalized) normal.
    pub fn interpolate(&self, face: usize, bary: [f64; 3]) -> ([f64; 3], [f64; 3]) {
        let t = self.mesh.faces()[face];
        let v = self.mesh.vertices();
        let n = self.mesh.normals();
        let mut pos = [0.0; 3];
        let mut nor = [0.0; 3];
        for c in 0..3 {
            for k in 0..3 {
                pos[k] += bary[c] * v[t[c]][k];
                nor[k] += bary[c] * n[t[c]][k];
            }
        }
        (pos, normalize3(nor))
    }

    /// The ground-truth map: surface position and normal at domain point `p`.
    pub fn evaluate_pl(&self, p: [f64; 2]) -> Result<([f64; 3], [f64; 3]), MeshError> {
        let (f, l) = self.locate(p)?;
        Ok(self.interpolate(f, l))
    }

    /// Domain preimage of a keypoint.
    pub fn keypoint_preimage(&self, kp: Keypoint) -> Result<[f64; 2], MeshError> {
        match kp {
            Keypoint::Vertex(i) => self.uv.get(i).copied().ok_or(MeshError::InvalidVertex(i)),
            Keypoint::Point(x) => {
                let v = self.mesh.vertices();
                let mut best = (0, [1.0, 0.0, 0.0], f64::INFINITY);
                for (fi, t) in self.mesh.faces().iter().enumerate() {
                    let l = closest_on_triangle(x, v[t[0]], v[t[1]], v[t[2]]);
                    let q: [f64; 3] =
                        std::array::from_fn(|k| l[0] * v[t[0]][k] + l[1] * v[t[1]][k] + l[2] * v[t[2]][k]);
                    let d = super::norm3(sub3(q, x));
                    if d < best.2 {
                        best = (fi, l, d);
                    }
                }
                if best.2 > KEYPOINT_TOLERANCE {
                    return Err(MeshError::Projection {
                        distance: best.2,
                        tolerance: KEYPOINT_TOLERANCE,
                    });
                }
                let t = self.mesh.faces()[best.0];
                let l = best.1;
                Ok(std::array::from_fn(|k| {
                    l[0] * self.uv[t[0]][k] + l[1] * self.uv[t[1]][k] + l[2] * self.uv[t[2]][k]
                }))
            }
        }
    }

    /// Unit normal of face `f` from its 3D corners.
    pub fn face_normal(&self, f: usize) -> [f64; 3] {
        let t = self.mesh.faces()[f];
        let v = self.mesh.vertices();
        normalize3(cross(sub3(v[t[1]], v[t[0]]), sub3(v[t[2]], v[t[0]])))
    }
}
