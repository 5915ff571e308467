//! Composition of maps through the common domain.
//!
//! A surface-to-surface map `f` is never evaluated through an inverse; it
//! is defined by `f ∘ φ = ψ ∘ h ∘ R`, and only its Jacobian is needed:
//! `J̃ = J(ψ∘h∘R) · Jφ⁺ · E`, where `E` is an orthonormal frame of the
//! source tangent plane. `J̃ᵀJ̃` is the 2x2 metric the densities consume.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{AnalyticError, AnalyticSurface};
use crate::autodiff::linalg::{self, Mat2, Mat3x2};
use crate::autodiff::{self, AutodiffError, DualBatch, Real};
use crate::domain::Domain;
use crate::energies::rotate_about;
use crate::neuralmap::{DualTrace, NeuralMap};

#[cfg(test)]
mod tests;

/// Smallest singular value below which a source Jacobian counts as singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-8;

/// How far outside the domain a warped point may land before it is flagged.
pub const DOMAIN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompositionError {
    #[error("singular source jacobian (smallest singular value {sigma_min:e}){}", fmt_point(.point))]
    SingularSource { point: Option<[f64; 2]>, sigma_min: f64 },
    #[error("degenerate jacobian: cannot estimate a normal")]
    DegenerateNormal,
    #[error("surface maps must have 3 outputs, found {0}")]
    SurfaceDim(usize),
    #[error("warps must have 2 outputs, found {0}")]
    WarpDim(usize),
    #[error("keypoint count mismatch: {sources} source vs {targets} target preimages")]
    KeypointCount { sources: usize, targets: usize },
    #[error("a collection needs at least 2 surfaces, found {0}")]
    TooFewSurfaces(usize),
    #[error("collection has {surfaces} surfaces but {warps} warps")]
    WarpCount { surfaces: usize, warps: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

fn fmt_point(p: &Option<[f64; 2]>) -> String {
    match p {
        Some(p) => format!(" at ({:.6}, {:.6})", p[0], p[1]),
        None => String::new(),
    }
}

impl CompositionError {
    /// Attaches the sample point to a singular-source error.
    pub fn at(self, p: [f64; 2]) -> Self {
        match self {
            CompositionError::SingularSource { sigma_min, .. } => CompositionError::SingularSource {
                point: Some(p),
                sigma_min,
            },
            e => e,
        }
    }
}

/// A frozen map from the domain to a surface in ℝ³.
#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceMap {
    Neural(NeuralMap),
    Analytic(AnalyticSurface),
}

/// What [`SurfaceMap::forward`] keeps for the reverse sweep.
#[derive(Clone, Debug)]
pub enum SurfaceTrace {
    Neural(DualTrace),
    Analytic(DualBatch),
}

impl SurfaceMap {
    pub fn neural(map: NeuralMap) -> Result<Self, CompositionError> {
        if map.out_dim() != 3 {
            return Err(CompositionError::SurfaceDim(map.out_dim()));
        }
        Ok(SurfaceMap::Neural(map))
    }

    pub fn evaluate_point(&self, p: [f64; 2]) -> [f64; 3] {
        match self {
            SurfaceMap::Neural(m) => {
                let y = m.evaluate_point(p);
                [y[0], y[1], y[2]]
            }
            SurfaceMap::Analytic(s) => s.second_order(p).value,
        }
    }

    /// Image and `3 x 2` Jacobian at `p`.
    pub fn jacobian(&self, p: [f64; 2]) -> Result<([f64; 3], Mat3x2<f64>), CompositionError> {
        match self {
            SurfaceMap::Neural(m) => {
                let (y, j) = autodiff::forward_with_jacobian(m, p)?;
                Ok(([y[0], y[1], y[2]], [j[0], j[1], j[2]]))
            }
            SurfaceMap::Analytic(s) => {
                let o = s.second_order(p);
                Ok((o.value, o.jacobian))
            }
        }
    }

    /// Fingerprint of the map's definition, for frozen-map checks.
    pub fn checksum(&self) -> u64 {
        match self {
            SurfaceMap::Neural(m) => m.checksum(),
            SurfaceMap::Analytic(s) => {
                let text = serde_json::to_string(s).unwrap_or_default();
                text.bytes()
                    .fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
            }
        }
    }

    /// Pushes a dual batch of domain points through the map.
    pub fn forward(
        &self,
        input: &DualBatch,
        keep_trace: bool,
    ) -> Result<(DualBatch, Option<SurfaceTrace>), CompositionError> {
        match self {
            SurfaceMap::Neural(m) => {
                let (out, trace) = m.forward_dual(input, keep_trace)?;
                Ok((out, trace.map(SurfaceTrace::Neural)))
            }
            SurfaceMap::Analytic(s) => {
                let len = input.len();
                let mut out = DualBatch::zeros(len, 3);
                for i in 0..len {
                    let x = input.value(i);
                    let o = s.second_order([x[0], x[1]]);
                    out.value_mut(i).copy_from_slice(&o.value);
                    for k in 0..2 {
                        let t = input.tangent(k, i);
                        let (t0, t1) = (t[0], t[1]);
                        let y = out.tangent_mut(k, i);
                        for r in 0..3 {
                            y[r] = o.jacobian[r][0] * t0 + o.jacobian[r][1] * t1;
                        }
                    }
                }
                if !out.is_finite() {
                    return Err(AutodiffError::NonFiniteLayer { layer: 0 }.into());
                }
                let trace = keep_trace.then(|| SurfaceTrace::Analytic(input.clone()));
                Ok((out, trace))
            }
        }
    }

    /// Adjoint of the dual input given adjoints of the dual output.
    pub fn backward(&self, trace: &SurfaceTrace, out_adjoint: &DualBatch) -> DualBatch {
        match (self, trace) {
            (SurfaceMap::Neural(m), SurfaceTrace::Neural(t)) => m.backward_dual(t, out_adjoint, None),
            (SurfaceMap::Analytic(s), SurfaceTrace::Analytic(input)) => {
                let len = input.len();
                let mut adj = DualBatch::zeros(len, 2);
                for i in 0..len {
                    let x = input.value(i);
                    let o = s.second_order([x[0], x[1]]);
                    let ybar = out_adjoint.value(i);
                    let mut xbar = [0.0; 2];
                    for c in 0..2 {
                        for r in 0..3 {
                            xbar[c] += o.jacobian[r][c] * ybar[r];
                        }
                    }
                    for k in 0..2 {
                        let t = input.tangent(k, i);
                        let tbar = out_adjoint.tangent(k, i);
                        // second-order term: d(J t)/dx
                        for d in 0..2 {
                            for r in 0..3 {
                                xbar[d] += tbar[r] * (o.hessian[r][0][d] * t[0] + o.hessian[r][1][d] * t[1]);
                            }
                        }
                        let mut g = [0.0; 2];
                        for c in 0..2 {
                            for r in 0..3 {
                                g[c] += o.jacobian[r][c] * tbar[r];
                            }
                        }
                        adj.tangent_mut(k, i).copy_from_slice(&g);
                    }
                    adj.value_mut(i).copy_from_slice(&xbar);
                }
                adj
            }
            _ => panic!("surface trace does not belong to this map"),
        }
    }
}

/// `Jφ⁺ E`: the 2x2 factor mapping tangent-frame coordinates of the source
/// surface back to the domain. Errors when `Jφ` is numerically rank
/// deficient.
pub fn source_frame_inverse(jphi: &Mat3x2<f64>) -> Result<Mat2<f64>, CompositionError> {
    let [_, s_min] = linalg::singular_values(jphi);
    if !(s_min > SINGULAR_TOLERANCE) {
        return Err(CompositionError::SingularSource {
            point: None,
            sigma_min: s_min,
        });
    }
    Ok(source_frame_inverse_generic(jphi))
}

/// Unchecked [`source_frame_inverse`] over any scalar.
pub fn source_frame_inverse_generic<T: Real>(jphi: &Mat3x2<T>) -> Mat2<T> {
    let pinv = linalg::pinv3x2(jphi).expect("rank was checked by the caller");
    let e = linalg::orthonormal_frame(jphi);
    linalg::matmul(&pinv, &e)
}

/// Jacobian of `f` with `f ∘ φ = g`, expressed in an orthonormal frame of
/// the source surface, together with its metric.
pub fn jacobian_of_f<const N: usize>(
    jphi: &Mat3x2<f64>,
    jg: &[[f64; 2]; N],
) -> Result<([[f64; 2]; N], Mat2<f64>), CompositionError> {
    let a = source_frame_inverse(jphi)?;
    let j = linalg::matmul(jg, &a);
    Ok((j, linalg::metric(&j)))
}

/// Metric of the surface-to-plane map `f` with `f(φ(p)) = h(p)`.
pub fn jacobian_of_param(jphi: &Mat3x2<f64>, jh: &Mat2<f64>) -> Result<Mat2<f64>, CompositionError> {
    Ok(jacobian_of_f(jphi, jh)?.1)
}

/// Unit normal `∂u × ∂v / ‖∂u × ∂v‖` of a surface map.
pub fn estimate_normal(jphi: &Mat3x2<f64>) -> Result<[f64; 3], CompositionError> {
    let n = linalg::cross3(linalg::column(jphi, 0), linalg::column(jphi, 1));
    let len = linalg::dot(&n, &n).sqrt();
    if !(len > SINGULAR_TOLERANCE * SINGULAR_TOLERANCE) {
        return Err(CompositionError::DegenerateNormal);
    }
    Ok(n.map(|x| x / len))
}

/// Result of fitting the landmark rotation.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkRotation {
    pub matrix: Mat2<f64>,
    pub angle: f64,
    pub warning: Option<String>,
}

pub fn rotation_matrix(angle: f64) -> Mat2<f64> {
    let (s, c) = angle.sin_cos();
    [[c, -s], [s, c]]
}

/// 2D orthogonal Procrustes: the proper rotation minimizing
/// `Σ ‖R(Pᵢ − P̄) − (Qᵢ − Q̄)‖²`. Fewer than two pairs give the identity
/// with a warning.
pub fn landmark_rotation(p: &[[f64; 2]], q: &[[f64; 2]]) -> Result<LandmarkRotation, CompositionError> {
    if p.len() != q.len() {
        return Err(CompositionError::KeypointCount {
            sources: p.len(),
            targets: q.len(),
        });
    }
    if p.len() < 2 {
        return Ok(LandmarkRotation {
            matrix: rotation_matrix(0.0),
            angle: 0.0,
            warning: Some(format!(
                "{} keypoint pair(s) cannot determine a rotation; using the identity",
                p.len()
            )),
        });
    }
    let n = p.len() as f64;
    let mean = |x: &[[f64; 2]]| {
        let s = x.iter().fold([0.0, 0.0], |a, b| [a[0] + b[0], a[1] + b[1]]);
        [s[0] / n, s[1] / n]
    };
    let (pm, qm) = (mean(p), mean(q));
    let (mut dot, mut cross) = (0.0, 0.0);
    for (a, b) in p.iter().zip(q) {
        let a = [a[0] - pm[0], a[1] - pm[1]];
        let b = [b[0] - qm[0], b[1] - qm[1]];
        dot += a[0] * b[0] + a[1] * b[1];
        cross += a[0] * b[1] - a[1] * b[0];
    }
    let angle = cross.atan2(dot);
    Ok(LandmarkRotation {
        matrix: rotation_matrix(angle),
        angle,
        warning: None,
    })
}

/// Images of domain points through a composed map, with the indices whose
/// warped point left the domain (their images are still extrapolated).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushedPoints {
    pub positions: Vec<[f64; 3]>,
    pub out_of_domain: Vec<usize>,
}

/// A surface-to-surface map `f ∘ φ = ψ ∘ h ∘ R`.
#[derive(Clone, Debug)]
pub struct SurfaceMapHandle {
    pub source: SurfaceMap,
    pub target: SurfaceMap,
    pub warp: NeuralMap,
    /// Preimages of the source keypoints under `φ`.
    pub source_keypoints: Vec<[f64; 2]>,
    /// Preimages of the target keypoints under `ψ`.
    pub target_keypoints: Vec<[f64; 2]>,
    pub rotation: Mat2<f64>,
    pub domain: Domain,
    /// Pins `h(R c) = c` at the domain corners, so the full warp fixes them.
    pub fixed_corners: bool,
}

impl SurfaceMapHandle {
    /// Builds the handle and fits `R` from the keypoints.
    pub fn new(
        source: SurfaceMap,
        target: SurfaceMap,
        warp: NeuralMap,
        source_keypoints: Vec<[f64; 2]>,
        target_keypoints: Vec<[f64; 2]>,
        domain: Domain,
        fixed_corners: bool,
    ) -> Result<(Self, Option<String>), CompositionError> {
        if warp.out_dim() != 2 {
            return Err(CompositionError::WarpDim(warp.out_dim()));
        }
        let fit = landmark_rotation(&source_keypoints, &target_keypoints)?;
        Ok((
            SurfaceMapHandle {
                source,
                target,
                warp,
                source_keypoints,
                target_keypoints,
                rotation: fit.matrix,
                domain,
                fixed_corners,
            },
            fit.warning,
        ))
    }

    /// Warp inputs and their required images: the rotated keypoints, then
    /// the corners when pinned.
    pub fn pins(&self) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let c = self.domain.center();
        let mut inputs: Vec<[f64; 2]> = self
            .source_keypoints
            .iter()
            .map(|p| rotate_about(&self.rotation, c, *p))
            .collect();
        let mut targets = self.target_keypoints.clone();
        if self.fixed_corners {
            // pinned through the full warp: h(R c) = c
            for corner in self.domain.corners() {
                inputs.push(rotate_about(&self.rotation, c, corner));
                targets.push(corner);
            }
        }
        (inputs, targets)
    }

    /// `h(R p)`.
    pub fn warp_point(&self, p: [f64; 2]) -> [f64; 2] {
        let y = self.warp.evaluate_point(rotate_about(&self.rotation, self.domain.center(), p));
        [y[0], y[1]]
    }

    /// `f(φ(p)) = ψ(h(R p))`.
    pub fn map_point(&self, p: [f64; 2]) -> [f64; 3] {
        self.target.evaluate_point(self.warp_point(p))
    }

    /// Target-surface images of source preimages (e.g. mesh vertices).
    pub fn push_mesh_through(&self, preimages: &[[f64; 2]]) -> PushedPoints {
        let mut out = PushedPoints {
            positions: Vec::with_capacity(preimages.len()),
            out_of_domain: Vec::new(),
        };
        for (i, p) in preimages.iter().enumerate() {
            let q = self.warp_point(*p);
            if self.domain.signed_distance(q) > DOMAIN_TOLERANCE {
                out.out_of_domain.push(i);
            }
            out.positions.push(self.target.evaluate_point(q));
        }
        out
    }
}

/// `k` surfaces mapped from one common domain: `φᵢ ∘ hᵢ`. The map between
/// surfaces `i` and `j` is `F_{i→j} ∘ φᵢ ∘ hᵢ = φⱼ ∘ hⱼ`.
#[derive(Clone, Debug)]
pub struct CollectionHandle {
    pub surfaces: Vec<SurfaceMap>,
    pub warps: Vec<NeuralMap>,
    /// Per surface, the preimages of its keypoints under `φᵢ` (same order
    /// across surfaces).
    pub keypoints: Vec<Vec<[f64; 2]>>,
    /// Common-domain location of each keypoint: the mean of its preimages.
    pub anchors: Vec<[f64; 2]>,
    pub domain: Domain,
    pub fixed_corners: bool,
}

impl CollectionHandle {
    pub fn new(
        surfaces: Vec<SurfaceMap>,
        warps: Vec<NeuralMap>,
        keypoints: Vec<Vec<[f64; 2]>>,
        domain: Domain,
        fixed_corners: bool,
    ) -> Result<Self, CompositionError> {
        let k = surfaces.len();
        if k < 2 {
            return Err(CompositionError::TooFewSurfaces(k));
        }
        if warps.len() != k || keypoints.len() != k {
            return Err(CompositionError::WarpCount {
                surfaces: k,
                warps: warps.len(),
            });
        }
        if let Some(w) = warps.iter().find(|w| w.out_dim() != 2) {
            return Err(CompositionError::WarpDim(w.out_dim()));
        }
        let m = keypoints[0].len();
        if let Some(bad) = keypoints.iter().find(|kp| kp.len() != m) {
            return Err(CompositionError::KeypointCount {
                sources: m,
                targets: bad.len(),
            });
        }
        let anchors = (0..m)
            .map(|i| {
                let s = keypoints.iter().fold([0.0, 0.0], |a, kp| [a[0] + kp[i][0], a[1] + kp[i][1]]);
                [s[0] / k as f64, s[1] / k as f64]
            })
            .collect();
        Ok(CollectionHandle {
            surfaces,
            warps,
            keypoints,
            anchors,
            domain,
            fixed_corners,
        })
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    /// Warp inputs and required images for warp `i`.
    pub fn pins(&self, i: usize) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let mut inputs = self.anchors.clone();
        let mut targets = self.keypoints[i].clone();
        if self.fixed_corners {
            for corner in self.domain.corners() {
                inputs.push(corner);
                targets.push(corner);
            }
        }
        (inputs, targets)
    }

    /// `φᵢ(hᵢ(q))` for a common-domain point `q`.
    pub fn surface_point(&self, i: usize, q: [f64; 2]) -> [f64; 3] {
        let y = self.warps[i].evaluate_point(q);
        self.surfaces[i].evaluate_point([y[0], y[1]])
    }

    /// Follows `path` (surface indices) from the point of surface `path[0]`
    /// over common-domain point `q`. Every hop is realized by carrying `q`,
    /// so closing a cycle reproduces the start point exactly.
    pub fn route(&self, q: [f64; 2], path: &[usize]) -> Vec<[f64; 3]> {
        path.iter().map(|&i| self.surface_point(i, q)).collect()
    }

    /// All ordered pairs `(i, j)`, `i ≠ j`.
    pub fn ordered_pairs(&self) -> Vec<(usize, usize)> {
        let k = self.len();
        (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect()
    }

    /// Images on surface `j` of surface `i`'s points over the given
    /// common-domain locations, i.e. `F_{i→j}` sampled at those points.
    pub fn push_pair(&self, j: usize, common: &[[f64; 2]]) -> PushedPoints {
        let mut out = PushedPoints {
            positions: Vec::with_capacity(common.len()),
            out_of_domain: Vec::new(),
        };
        for (n, q) in common.iter().enumerate() {
            let y = self.warps[j].evaluate_point(*q);
            let y = [y[0], y[1]];
            if self.domain.signed_distance(y) > DOMAIN_TOLERANCE {
                out.out_of_domain.push(n);
            }
            out.positions.push(self.surfaces[j].evaluate_point(y));
        }
        out
    }
}
