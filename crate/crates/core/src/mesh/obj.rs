use std::fmt::Write as _;
use std::path::Path;

use super::{MeshError, TriMesh};

/// Reads a Wavefront OBJ (polygons are fan-triangulated), validates disk
/// topology and rescales to a unit-diagonal bounding box at the origin.
pub fn load_obj(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_obj(&text)
}

pub fn parse_obj(text: &str) -> Result<TriMesh, MeshError> {
    let opts = tobj::LoadOptions {
        triangulate: true,
        single_index: false,
        ignore_points: true,
        ignore_lines: true,
    };
    let mut reader = std::io::BufReader::new(text.as_bytes());
    let (models, _) = tobj::load_obj_buf(&mut reader, &opts, |_| {
        Err(tobj::LoadError::MaterialParseError)
    })
    .map_err(|e| MeshError::Format(e.to_string()))?;

    // models share one vertex pool in the file; tobj splits it per object
    // and reindexes, so stitch them back together
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut normals: Vec<Option<[f64; 3]>> = Vec::new();
    let mut have_normals = true;
    for m in &models {
        let mesh = &m.mesh;
        let base = vertices.len();
        if mesh.positions.len() % 3 != 0 {
            return Err(MeshError::Format("position array is not a multiple of 3".into()));
        }
        for p in mesh.positions.chunks_exact(3) {
            vertices.push([p[0], p[1], p[2]]);
            normals.push(None);
        }
        if mesh.indices.len() % 3 != 0 {
            return Err(MeshError::Format("face index array is not a multiple of 3".into()));
        }
        for (k, f) in mesh.indices.chunks_exact(3).enumerate() {
            faces.push([base + f[0] as usize, base + f[1] as usize, base + f[2] as usize]);
            if mesh.normal_indices.len() == mesh.indices.len() && !mesh.normals.is_empty() {
                for c in 0..3 {
                    let ni = mesh.normal_indices[3 * k + c] as usize;
                    let n = mesh
                        .normals
                        .get(3 * ni..3 * ni + 3)
                        .ok_or_else(|| MeshError::Format(format!("normal index {ni} out of range")))?;
                    let slot = &mut normals[base + f[c] as usize];
                    if slot.is_none() {
                        *slot = Some([n[0], n[1], n[2]]);
                    }
                }
            } else {
                have_normals = false;
            }
        }
    }
    if vertices.is_empty() || faces.is_empty() {
        return Err(MeshError::Format("no vertices or faces".into()));
    }
    if vertices.iter().flatten().any(|x| !x.is_finite()) {
        return Err(MeshError::Format("non-finite vertex coordinate".into()));
    }
    let normals = if have_normals && normals.iter().all(|n| n.is_some()) {
        Some(normals.into_iter().map(|n| n.unwrap()).collect())
    } else {
        None
    };
    Ok(TriMesh::new(vertices, faces, normals)?.normalized())
}

/// Writes positions and faces (1-based indices).
pub fn write_obj(
    path: impl AsRef<Path>,
    vertices: &[[f64; 3]],
    faces: &[[usize; 3]],
) -> Result<(), MeshError> {
    let mut s = String::new();
    for v in vertices {
        writeln!(s, "v {} {} {}", v[0], v[1], v[2]).unwrap();
    }
    for f in faces {
        writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Writes a mesh with one `vt` record per vertex (`f v/vt/vn`).
pub fn write_obj_with_uv(
    path: impl AsRef<Path>,
    mesh: &TriMesh,
    uv: &[[f64; 2]],
) -> Result<(), MeshError> {
    assert_eq!(uv.len(), mesh.vertices().len());
    let mut s = String::new();
    for v in mesh.vertices() {
        writeln!(s, "v {} {} {}", v[0], v[1], v[2]).unwrap();
    }
    for t in uv {
        writeln!(s, "vt {} {}", t[0], t[1]).unwrap();
    }
    for n in mesh.normals() {
        writeln!(s, "vn {} {} {}", n[0], n[1], n[2]).unwrap();
    }
    for f in mesh.faces() {
        let (a, b, c) = (f[0] + 1, f[1] + 1, f[2] + 1);
        writeln!(s, "f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}").unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}
