//! Small procedurally generated meshes used by tests, examples and the
//! bundled data set. All faces are counter-clockwise seen from outside.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

pub type RawMesh = (Vec<[f64; 3]>, Vec<[usize; 3]>);

/// Two triangles forming the unit square in the `z = 0` plane.
pub fn quad() -> RawMesh {
    (
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
        vec![[0, 1, 2], [0, 2, 3]],
    )
}

/// A closed tetrahedron (not a disk).
pub fn tetrahedron() -> RawMesh {
    (
        vec![[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
}

/// Regular `n x n` quad grid over `[-1,1]²`, split along one diagonal,
/// lifted by `height(x, y)`.
pub fn grid(n: usize, height: impl Fn(f64, f64) -> f64) -> RawMesh {
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = -1.0 + 2.0 * i as f64 / n as f64;
            let y = -1.0 + 2.0 * j as f64 / n as f64;
            v.push([x, y, height(x, y)]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut f = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    (v, f)
}

/// Flat square patch.
pub fn plane_patch(n: usize) -> RawMesh {
    grid(n, |_, _| 0.0)
}

/// Saddle `z = 0.5 x y` over `[-1,1]²`.
pub fn saddle(n: usize) -> RawMesh {
    grid(n, |x, y| 0.5 * x * y)
}

/// Unit upper hemisphere built from `rings` concentric rings around the
/// pole (ring `k` holds `6k` vertices); `6 rings²` faces.
pub fn hemisphere(rings: usize) -> RawMesh {
    let mut v = vec![[0.0, 0.0, 1.0]];
    let mut start = vec![0usize];
    for k in 1..=rings {
        start.push(v.len());
        let theta = 0.5 * PI * k as f64 / rings as f64;
        let m = 6 * k;
        for i in 0..m {
            let a = 2.0 * PI * i as f64 / m as f64;
            v.push([theta.sin() * a.cos(), theta.sin() * a.sin(), theta.cos()]);
        }
    }
    let mut f = Vec::new();
    for k in 1..=rings {
        let n = 6 * k;
        let outer = |j: usize| start[k] + j % n;
        if k == 1 {
            for j in 0..n {
                f.push([0, outer(j), outer(j + 1)]);
            }
            continue;
        }
        let m = 6 * (k - 1);
        let inner = |j: usize| start[k - 1] + j % m;
        let (mut a, mut b) = (0usize, 0usize);
        while a < m || b < n {
            // advance whichever ring's next vertex comes first in angle
            let next_inner = (a + 1) as f64 / m as f64;
            let next_outer = (b + 1) as f64 / n as f64;
            if b < n && (a >= m || next_outer <= next_inner) {
                f.push([inner(a), outer(b), outer(b + 1)]);
                b += 1;
            } else {
                f.push([inner(a), outer(b), inner(a + 1)]);
                a += 1;
            }
        }
    }
    (v, f)
}

/// Icosphere with `subdivisions` midpoint refinements and face 0 removed.
pub fn cut_icosphere(subdivisions: usize) -> RawMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let unit = |p: [f64; 3]| {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        [p[0] / n, p[1] / n, p[2] / n]
    };
    for p in &mut v {
        *p = unit(*p);
    }
    let mut f: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, v: &mut Vec<[f64; 3]>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let p = [
                    0.5 * (v[a][0] + v[b][0]),
                    0.5 * (v[a][1] + v[b][1]),
                    0.5 * (v[a][2] + v[b][2]),
                ];
                v.push(unit(p));
                v.len() - 1
            })
        };
        let mut next = Vec::with_capacity(4 * f.len());
        for tri in &f {
            let ab = midpoint(tri[0], tri[1], &mut v);
            let bc = midpoint(tri[1], tri[2], &mut v);
            let ca = midpoint(tri[2], tri[0], &mut v);
            next.push([tri[0], ab, ca]);
            next.push([tri[1], bc, ab]);
            next.push([tri[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        f = next;
    }
    f.remove(0);
    (v, f)
}

/// Wavefront OBJ text for a raw mesh.
pub fn to_obj_string(mesh: &RawMesh) -> String {
    let mut s = String::new();
    for p in &mesh.0 {
        writeln!(s, "v {} {} {}", p[0], p[1], p[2]).unwrap();
    }
    for t in &mesh.1 {
        writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    s
}
