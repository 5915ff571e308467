use std::collections::BTreeSet;

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use super::{norm3, sub3, MeshError, PLMap, TriMesh};
use crate::domain::Domain;

/// Uniform-weight Tutte embedding of a disk mesh into `domain`.
///
/// The boundary loop is laid out on the domain boundary in proportion to its
/// 3D arc length, starting at its lowest-index vertex; every interior vertex
/// is the average of its neighbours.
pub fn tutte_embed(mesh: TriMesh, domain: Domain) -> Result<PLMap, MeshError> {
    let n = mesh.vertices().len();
    let boundary = mesh.boundary_loop();
    let mut uv = vec![[0.0; 2]; n];
    let mut is_boundary = vec![false; n];

    let verts = mesh.vertices();
    let lengths: Vec<f64> = (0..boundary.len())
        .map(|k| {
            let a = boundary[k];
            let b = boundary[(k + 1) % boundary.len()];
            norm3(sub3(verts[b], verts[a]))
        })
        .collect();
    let total: f64 = lengths.iter().sum();
    let mut acc = 0.0;
    for (k, &v) in boundary.iter().enumerate() {
        uv[v] = domain.boundary_point(acc / total);
        is_boundary[v] = true;
        acc += lengths[k];
    }

    // interior unknowns, numbered in vertex order
    let mut slot = vec![usize::MAX; n];
    let mut interior = Vec::new();
    for v in 0..n {
        if !is_boundary[v] {
            slot[v] = interior.len();
            interior.push(v);
        }
    }
    if !interior.is_empty() {
        let mut nbrs: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for f in mesh.faces() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                nbrs[a].insert(b);
                nbrs[b].insert(a);
            }
        }
        let m = interior.len();
        let mut coo = CooMatrix::new(m, m);
        let mut rhs = DMatrix::<f64>::zeros(m, 2);
        for (row, &v) in interior.iter().enumerate() {
            coo.push(row, row, nbrs[v].len() as f64);
            for &w in &nbrs[v] {
                if is_boundary[w] {
                    rhs[(row, 0)] += uv[w][0];
                    rhs[(row, 1)] += uv[w][1];
                } else {
                    coo.push(row, slot[w], -1.0);
                }
            }
        }
        let csc = CscMatrix::from(&coo);
        let chol = CscCholesky::factor(&csc)
            .map_err(|e| MeshError::Numerical(format!("tutte system: {e}")))?;
        let sol = chol.solve(&rhs);
        for (row, &v) in interior.iter().enumerate() {
            uv[v] = [sol[(row, 0)], sol[(row, 1)]];
            if !(uv[v][0].is_finite() && uv[v][1].is_finite()) {
                return Err(MeshError::Numerical("tutte solve produced non-finite uv".into()));
            }
        }
    }
    PLMap::new(mesh, uv, domain)
}
