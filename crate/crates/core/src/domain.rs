//! The canonical 2D domain shared by every map.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Real;

/// Unit square `[0,1]²` (default) or the unit disk centered at the origin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    #[default]
    UnitSquare,
    UnitDisk,
}

impl Domain {
    pub fn center(self) -> [f64; 2] {
        match self {
            Domain::UnitSquare => [0.5, 0.5],
            Domain::UnitDisk => [0.0, 0.0],
        }
    }

    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::UnitDisk => std::f64::consts::PI,
        }
    }

    pub fn perimeter(self) -> f64 {
        match self {
            Domain::UnitSquare => 4.0,
            Domain::UnitDisk => 2.0 * std::f64::consts::PI,
        }
    }

    pub fn corners(self) -> Vec<[f64; 2]> {
        match self {
            Domain::UnitSquare => vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            Domain::UnitDisk => Vec::new(),
        }
    }

    /// Point at perimeter fraction `t ∈ [0, 1)`, counter-clockwise. The square
    /// starts at the corner `(0, 0)`, the disk at `(1, 0)`.
    pub fn boundary_point(self, t: f64) -> [f64; 2] {
        let t = t.rem_euclid(1.0);
        match self {
            Domain::UnitSquare => {
                let s = 4.0 * t;
                let side = (s.floor() as usize).min(3);
                let f = s - side as f64;
                match side {
                    0 => [f, 0.0],
                    1 => [1.0, f],
                    2 => [1.0 - f, 1.0],
                    _ => [0.0, 1.0 - f],
                }
            }
            Domain::UnitDisk => {
                let a = 2.0 * std::f64::consts::PI * t;
                [a.cos(), a.sin()]
            }
        }
    }

    /// Signed distance to the boundary: negative inside, positive outside.
    pub fn signed_distance(self, p: [f64; 2]) -> f64 {
        self.signed_distance_generic([p[0], p[1]])
    }

    /// Same as [`Domain::signed_distance`] over any [`Real`] scalar.
    pub fn signed_distance_generic<T: Real>(self, p: [T; 2]) -> T {
        match self {
            Domain::UnitSquare => {
                let q = p.map(|x| {
                    let d = x - 0.5;
                    let a = if d.value() >= 0.0 { d } else { -d };
                    a - 0.5
                });
                let (qx, qy) = (q[0].value(), q[1].value());
                if qx > 0.0 && qy > 0.0 {
                    (q[0] * q[0] + q[1] * q[1]).sqrt()
                } else if qx > 0.0 {
                    q[0]
                } else if qy > 0.0 {
                    q[1]
                } else if qx > qy {
                    q[0]
                } else {
                    q[1]
                }
            }
            Domain::UnitDisk => (p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0,
        }
    }

    pub fn contains(self, p: [f64; 2]) -> bool {
        self.signed_distance(p) <= 0.0
    }

    pub fn sample_interior(self, rng: &mut impl Rng) -> [f64; 2] {
        match self {
            Domain::UnitSquare => [rng.random::<f64>(), rng.random::<f64>()],
            Domain::UnitDisk => {
                let r = rng.random::<f64>().sqrt();
                let a = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                [r * a.cos(), r * a.sin()]
            }
        }
    }

    /// `n` boundary points, one uniformly jittered in each of `n` equal
    /// perimeter strata.
    pub fn stratified_boundary(self, n: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
        (0..n)
            .map(|i| self.boundary_point((i as f64 + rng.random::<f64>()) / n as f64))
            .collect()
    }

    /// Regular `n x n` grid of points covering the domain (cell centers for
    /// the square; the disk keeps the grid points that fall inside it).
    pub fn grid(self, n: usize) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let u = (i as f64 + 0.5) / n as f64;
                let v = (j as f64 + 0.5) / n as f64;
                match self {
                    Domain::UnitSquare => pts.push([u, v]),
                    Domain::UnitDisk => {
                        let p = [2.0 * u - 1.0, 2.0 * v - 1.0];
                        if self.contains(p) {
                            pts.push(p);
                        }
                    }
                }
            }
        }
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_signed_distance() {
        let d = Domain::UnitSquare;
        assert_eq!(d.signed_distance([0.5, 0.5]), -0.5);
        assert!((d.signed_distance([1.2, 0.5]) - 0.2).abs() < 1e-15);
        assert_eq!(d.signed_distance([1.0, 0.3]), 0.0);
        assert!((d.signed_distance([1.3, 1.4]) - 0.5).abs() < 1e-15);
        assert!((d.signed_distance([0.1, 0.5]) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn boundary_points_lie_on_boundary() {
        for d in [Domain::UnitSquare, Domain::UnitDisk] {
            for k in 0..40 {
                let p = d.boundary_point(k as f64 / 40.0 + 0.003);
                assert!(d.signed_distance(p).abs() < 1e-12, "{d:?} {p:?}");
            }
        }
        assert_eq!(Domain::UnitSquare.boundary_point(0.25), [1.0, 0.0]);
        assert_eq!(Domain::UnitSquare.boundary_point(0.5), [1.0, 1.0]);
    }

    #[test]
    fn disk_distance() {
        assert_eq!(Domain::UnitDisk.signed_distance([0.0, 0.0]), -1.0);
        assert!((Domain::UnitDisk.signed_distance([0.0, 2.0]) - 1.0).abs() < 1e-15);
    }
}
