//! Closed-form parametric surfaces over the unit square with exact first and
//! second derivatives. They serve as mapping targets and as test oracles.
//!
//! Every surface is written in the centered coordinates `x = u − ½`,
//! `y = v − ½`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::linalg::{self, Mat2, Mat3x2};
use crate::domain::Domain;
use crate::mesh::{MeshError, PLMap, TriMesh};


#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("point ({:.6}, {:.6}) is outside the unit square", .0[0], .0[1])]
    OutOfDomain([f64; 2]),
    #[error("invalid surface parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

/// Fraction of the sphere radius reached at the square's corners.
const HEMISPHERE_REACH: f64 = 0.9;

/// Points farther than this outside the square are rejected by checked
/// evaluation.
const DOMAIN_TOLERANCE: f64 = 1e-9;

/// A parametric surface `Ω → ℝ³`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyticSurface {
    /// `(u, v, 0)`.
    Plane,
    /// `(s u, s v, 0)`.
    ScaledPlane { scale: f64 },
    /// Orthographic cap of a sphere of radius `r`: `(k x, k y, √(r² − k²x² − k²y²))`
    /// with `k` chosen so the square's corners reach 90% of the radius.
    Hemisphere { radius: f64 },
    /// `(r sin θ, v, r cos θ)` with `θ = arc · x`.
    CylinderPatch { radius: f64, arc: f64 },
    /// `(u, v, a x y)`.
    Saddle { a: f64 },
    /// Torus patch with angles `θ = theta_extent · x`, `φ = phi_extent · y`.
    TorusPatch {
        major: f64,
        minor: f64,
        theta_extent: f64,
        phi_extent: f64,
    },
}

/// Value, Jacobian and per-component Hessians at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondOrder {
    pub value: [f64; 3],
    pub jacobian: Mat3x2<f64>,
    pub hessian: [Mat2<f64>; 3],
}

impl AnalyticSurface {
    pub fn validate(&self) -> Result<(), AnalyticError> {
        let positive = |name, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(AnalyticError::InvalidParameter { name, value })
            }
        };
        match *self {
            AnalyticSurface::Plane => Ok(()),
            AnalyticSurface::ScaledPlane { scale } => positive("scale", scale),
            AnalyticSurface::Hemisphere { radius } => positive("radius", radius),
            AnalyticSurface::CylinderPatch { radius, arc } => {
                positive("radius", radius)?;
                positive("arc", arc)
            }
            AnalyticSurface::Saddle { a } => {
                if a.is_finite() {
                    Ok(())
                } else {
                    Err(AnalyticError::InvalidParameter { name: "a", value: a })
                }
            }
            AnalyticSurface::TorusPatch {
                major,
                minor,
                theta_extent,
                phi_extent,
            } => {
                positive("major", major)?;
                positive("minor", minor)?;
                positive("theta_extent", theta_extent)?;
                positive("phi_extent", phi_extent)?;
                if minor >= major {
                    return Err(AnalyticError::InvalidParameter {
                        name: "minor",
                        value: minor,
                    });
                }
                Ok(())
            }
        }
    }

    fn check(p: [f64; 2]) -> Result<(), AnalyticError> {
        if p[0].is_finite() && p[1].is_finite() && Domain::UnitSquare.signed_distance(p) <= DOMAIN_TOLERANCE {
            Ok(())
        } else {
            Err(AnalyticError::OutOfDomain(p))
        }
    }

    pub fn eval(&self, p: [f64; 2]) -> Result<[f64; 3], AnalyticError> {
        Self::check(p)?;
        Ok(self.second_order(p).value)
    }

    pub fn eval_jacobian(&self, p: [f64; 2]) -> Result<Mat3x2<f64>, AnalyticError> {
        Self::check(p)?;
        Ok(self.second_order(p).jacobian)
    }

    /// Outward unit normal `∂u × ∂v / ‖∂u × ∂v‖`.
    pub fn normal(&self, p: [f64; 2]) -> Result<[f64; 3], AnalyticError> {
        let j = self.eval_jacobian(p)?;
        let n = linalg::cross3(linalg::column(&j, 0), linalg::column(&j, 1));
        let len = linalg::dot(&n, &n).sqrt();
        Ok(n.map(|x| x / len))
    }

    /// Unchecked closed forms; also valid slightly outside the square, which
    /// optimization relies on while a warp overshoots the boundary.
    pub fn second_order(&self, p: [f64; 2]) -> SecondOrder {
        let x = p[0] - 0.5;
        let y = p[1] - 0.5;
        match *self {
            AnalyticSurface::Plane => SecondOrder {
                value: [p[0], p[1], 0.0],
                jacobian: [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
                hessian: [[[0.0; 2]; 2]; 3],
            },
            AnalyticSurface::ScaledPlane { scale: s } => SecondOrder {
                value: [s * p[0], s * p[1], 0.0],
                jacobian: [[s, 0.0], [0.0, s], [0.0, 0.0]],
                hessian: [[[0.0; 2]; 2]; 3],
            },
            AnalyticSurface::Hemisphere { radius: r } => {
                let k = hemisphere_scale(r);
                let (a, b) = (k * x, k * y);
                let z = (r * r - a * a - b * b).sqrt();
                let z3 = z * z * z;
                let k2 = k * k;
                SecondOrder {
                    value: [a, b, z],
                    jacobian: [[k, 0.0], [0.0, k], [-k * a / z, -k * b / z]],
                    hessian: [
                        [[0.0; 2]; 2],
                        [[0.0; 2]; 2],
                        [
                            [-k2 * (z * z + a * a) / z3, -k2 * a * b / z3],
                            [-k2 * a * b / z3, -k2 * (z * z + b * b) / z3],
                        ],
                    ],
                }
            }
            AnalyticSurface::CylinderPatch { radius: r, arc } => {
                let t = arc * x;
                let (s, c) = t.sin_cos();
                SecondOrder {
                    value: [r * s, p[1], r * c],
                    jacobian: [[r * arc * c, 0.0], [0.0, 1.0], [-r * arc * s, 0.0]],
                    hessian: [
                        [[-r * arc * arc * s, 0.0], [0.0, 0.0]],
                        [[0.0; 2]; 2],
                        [[-r * arc * arc * c, 0.0], [0.0, 0.0]],
                    ],
                }
            }
            AnalyticSurface::Saddle { a } => SecondOrder {
                value: [p[0], p[1], a * x * y],
                jacobian: [[1.0, 0.0], [0.0, 1.0], [a * y, a * x]],
                hessian: [[[0.0; 2]; 2], [[0.0; 2]; 2], [[0.0, a], [a, 0.0]]],
            },
            AnalyticSurface::TorusPatch {
                major,
                minor,
                theta_extent: te,
                phi_extent: pe,
            } => {
                let (st, ct) = (te * x).sin_cos();
                let (sp, cp) = (pe * y).sin_cos();
                let w = major + minor * cp;
                SecondOrder {
                    value: [w * ct, w * st, minor * sp],
                    jacobian: [
                        [-w * st * te, -minor * sp * ct * pe],
                        [w * ct * te, -minor * sp * st * pe],
                        [0.0, minor * cp * pe],
                    ],
                    hessian: [
                        [
                            [-w * ct * te * te, minor * sp * st * te * pe],
                            [minor * sp * st * te * pe, -minor * cp * ct * pe * pe],
                        ],
                        [
                            [-w * st * te * te, -minor * sp * ct * te * pe],
                            [-minor * sp * ct * te * pe, -minor * cp * st * pe * pe],
                        ],
                        [[0.0, 0.0], [0.0, -minor * sp * pe * pe]],
                    ],
                }
            }
        }
    }

    /// The first fundamental form `JᵀJ`, written out per surface.
    pub fn first_fundamental_form(&self, p: [f64; 2]) -> Mat2<f64> {
        let x = p[0] - 0.5;
        let y = p[1] - 0.5;
        match *self {
            AnalyticSurface::Plane => [[1.0, 0.0], [0.0, 1.0]],
            AnalyticSurface::ScaledPlane { scale: s } => [[s * s, 0.0], [0.0, s * s]],
            AnalyticSurface::Hemisphere { radius: r } => {
                let k = hemisphere_scale(r);
                let (a, b) = (k * x, k * y);
                let z2 = r * r - a * a - b * b;
                let k2 = k * k;
                [
                    [k2 * (1.0 + a * a / z2), k2 * a * b / z2],
                    [k2 * a * b / z2, k2 * (1.0 + b * b / z2)],
                ]
            }
            AnalyticSurface::CylinderPatch { radius: r, arc } => [[r * r * arc * arc, 0.0], [0.0, 1.0]],
            AnalyticSurface::Saddle { a } => {
                let a2 = a * a;
                [[1.0 + a2 * y * y, a2 * x * y], [a2 * x * y, 1.0 + a2 * x * x]]
            }
            AnalyticSurface::TorusPatch {
                major,
                minor,
                theta_extent: te,
                phi_extent: pe,
            } => {
                let w = major + minor * (pe * y).cos();
                [[w * w * te * te, 0.0], [0.0, minor * minor * pe * pe]]
            }
        }
    }
}

fn hemisphere_scale(r: f64) -> f64 {
    // corners sit at centered radius ½√2
    HEMISPHERE_REACH * r * std::f64::consts::SQRT_2
}

fn metric_eigenvalues(m: &Mat2<f64>) -> [f64; 2] {
    linalg::sym2_eigenvalues(m)
}

/// Symmetric Dirichlet density of the surface's own parameterization,
/// evaluated in eigenvalue form.
pub fn exact_dirichlet_density(spec: &AnalyticSurface, p: [f64; 2], eps: f64) -> f64 {
    let [l1, l2] = metric_eigenvalues(&spec.first_fundamental_form(p));
    l1 + l2 + 1.0 / (l1 + eps) + 1.0 / (l2 + eps)
}

/// Conformal density of the surface's own parameterization, in eigenvalue
/// form: `Σᵢ (t λᵢ / f − 1)²` with `t = Σλ`, `f = Σλ²`.
pub fn exact_conformal_density(spec: &AnalyticSurface, p: [f64; 2]) -> f64 {
    let [l1, l2] = metric_eigenvalues(&spec.first_fundamental_form(p));
    let t = l1 + l2;
    let f = l1 * l1 + l2 * l2;
    ((t * l1 - f) / f).powi(2) + ((t * l2 - f) / f).powi(2)
}

/// Samples the surface on an `(n+1) x (n+1)` grid of the unit square and
/// returns it as a mesh paired with its grid parameterization.
pub fn tessellate(spec: &AnalyticSurface, n: usize) -> Result<PLMap, MeshError> {
    let n = n.max(1);
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    let mut normals = Vec::with_capacity(vertices.capacity());
    let mut uv = Vec::with_capacity(vertices.capacity());
    for j in 0..=n {
        for i in 0..=n {
            let p = [i as f64 / n as f64, j as f64 / n as f64];
            let s = spec.second_order(p);
            let c = linalg::cross3(linalg::column(&s.jacobian, 0), linalg::column(&s.jacobian, 1));
            vertices.push(s.value);
            normals.push(c);
            uv.push(p);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mesh = TriMesh::new(vertices, faces, Some(normals))?;
    PLMap::new(mesh, uv, Domain::UnitSquare)
}
