use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

/// A violation of disk topology.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("mesh has no faces")]
    Empty,
    #[error("face {face} references vertex {vertex} which does not exist")]
    BadIndex { face: usize, vertex: usize },
    #[error("face {0} repeats a vertex")]
    RepeatedVertex(usize),
    #[error("vertex {0} is not referenced by any face")]
    IsolatedVertex(usize),
    #[error("non-manifold edge ({0}, {1})")]
    NonManifoldEdge(usize, usize),
    #[error("non-manifold vertex {0}")]
    NonManifoldVertex(usize),
    #[error("mesh has {0} connected components")]
    MultipleComponents(usize),
    #[error("no boundary loop: the surface is closed, not a disk")]
    NoBoundary,
    #[error("mesh has {0} boundary loops, expected exactly one")]
    MultipleBoundaryLoops(usize),
    #[error("euler characteristic {0} (genus > 0), expected 1 for a disk")]
    Genus(i64),
}

pub(crate) fn undirected_edges(faces: &[[usize; 3]]) -> BTreeSet<(usize, usize)> {
    faces
        .iter()
        .flat_map(|f| (0..3).map(move |k| (f[k], f[(k + 1) % 3])))
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

/// Checks that `faces` form one consistently oriented manifold disk and
/// returns its boundary loop.
pub(crate) fn validate_disk(n_vertices: usize, faces: &[[usize; 3]]) -> Result<Vec<usize>, TopologyError> {
    if faces.is_empty() {
        return Err(TopologyError::Empty);
    }
    let mut used = vec![false; n_vertices];
    for (fi, f) in faces.iter().enumerate() {
        for &v in f {
            if v >= n_vertices {
                return Err(TopologyError::BadIndex { face: fi, vertex: v });
            }
            used[v] = true;
        }
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            return Err(TopologyError::RepeatedVertex(fi));
        }
    }
    if let Some(v) = used.iter().position(|u| !u) {
        return Err(TopologyError::IsolatedVertex(v));
    }

    // every directed half-edge at most once; its twin at most once
    let mut half: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * faces.len());
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            let e = (f[k], f[(k + 1) % 3]);
            if half.insert(e, fi).is_some() {
                return Err(TopologyError::NonManifoldEdge(e.0.min(e.1), e.0.max(e.1)));
            }
        }
    }

    let mut parent: Vec<usize> = (0..faces.len()).collect();
    let mut boundary_next: BTreeMap<usize, usize> = BTreeMap::new();
    for (&(a, b), &fi) in &half {
        match half.get(&(b, a)) {
            Some(&fj) => union(&mut parent, fi, fj),
            None => {
                if boundary_next.insert(a, b).is_some() {
                    return Err(TopologyError::NonManifoldVertex(a));
                }
            }
        }
    }
    let roots: BTreeSet<usize> = (0..faces.len()).map(|f| find(&mut parent, f)).collect();
    if roots.len() > 1 {
        return Err(TopologyError::MultipleComponents(roots.len()));
    }

    // vertex manifoldness: faces around each vertex form one fan
    let mut corners: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_vertices];
    for f in faces {
        for k in 0..3 {
            corners[f[k]].push((f[(k + 1) % 3], f[(k + 2) % 3]));
        }
    }
    for (v, fan) in corners.iter().enumerate() {
        let mut p: Vec<usize> = (0..fan.len()).collect();
        let mut by_next: HashMap<usize, usize> = HashMap::new();
        for (i, &(a, _)) in fan.iter().enumerate() {
            by_next.insert(a, i);
        }
        for (i, &(_, b)) in fan.iter().enumerate() {
            if let Some(&j) = by_next.get(&b) {
                union(&mut p, i, j);
            }
        }
        let comps: BTreeSet<usize> = (0..fan.len()).map(|i| find(&mut p, i)).collect();
        if comps.len() != 1 {
            return Err(TopologyError::NonManifoldVertex(v));
        }
    }

    if boundary_next.is_empty() {
        return Err(TopologyError::NoBoundary);
    }
    let mut seen = BTreeSet::new();
    let mut loops: Vec<Vec<usize>> = Vec::new();
    for &start in boundary_next.keys() {
        if seen.contains(&start) {
            continue;
        }
        let mut lp = vec![start];
        seen.insert(start);
        let mut cur = boundary_next[&start];
        while cur != start {
            if !seen.insert(cur) {
                return Err(TopologyError::NonManifoldVertex(cur));
            }
            lp.push(cur);
            cur = match boundary_next.get(&cur) {
                Some(&n) => n,
                None => return Err(TopologyError::NonManifoldVertex(cur)),
            };
        }
        loops.push(lp);
    }
    if loops.len() != 1 {
        return Err(TopologyError::MultipleBoundaryLoops(loops.len()));
    }
    let n_edges = undirected_edges(faces).len() as i64;
    let chi = n_vertices as i64 - n_edges + faces.len() as i64;
    if chi != 1 {
        return Err(TopologyError::Genus(chi));
    }
    // keys iterate ascending, so the loop already starts at its lowest index
    Ok(loops.pop().unwrap())
}
