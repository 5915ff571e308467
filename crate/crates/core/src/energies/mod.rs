//! Distortion densities and the constraint energies of the surface-map
//! objective, written once over [`Real`] so the same formula serves plain
//! evaluation, reverse-mode training and test oracles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::linalg::{self, Mat2, Mat3x2};
use crate::autodiff::Real;
use crate::domain::Domain;
use crate::neuralmap::NeuralMap;


#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("degenerate jacobian: the metric vanishes")]
    DegenerateJacobian,
    #[error("keypoint count mismatch: {sources} source vs {targets} target preimages")]
    KeypointCount { sources: usize, targets: usize },
    #[error("no keypoints given")]
    NoKeypoints,
    #[error("monte-carlo estimate needs at least one sample")]
    NoSamples,
    #[error("non-finite density at {} sample(s), first at index {}", .0.len(), .0[0])]
    NonFiniteDensity(Vec<usize>),
    #[error("invalid energy weight {name} = {value}: weights must be positive")]
    InvalidWeight { name: &'static str, value: f64 },
}

/// Which distortion measure a task minimizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distortion {
    /// Symmetric Dirichlet (isometric distortion).
    #[default]
    Iso,
    Conformal,
}

impl Distortion {
    pub fn density<T: Real>(self, m: &Mat2<T>, eps: f64) -> T {
        match self {
            Distortion::Iso => dirichlet_density(m, eps),
            Distortion::Conformal => conformal_density_unchecked(m),
        }
    }

    /// Value of the density for an exact isometry (its lower bound for iso).
    pub fn floor(self, eps: f64) -> f64 {
        match self {
            Distortion::Iso => 2.0 + 2.0 / (1.0 + eps),
            Distortion::Conformal => 0.0,
        }
    }
}

fn default_lambda_n() -> f64 {
    0.01
}
fn default_lambda_b() -> f64 {
    1e6
}
fn default_lambda_inv() -> f64 {
    1e2
}
fn default_lambda_c() -> f64 {
    1e3
}
fn default_epsilon() -> f64 {
    0.01
}

/// Term weights of the overfitting and surface-map objectives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyWeights {
    /// Normal-alignment weight of the overfitting loss.
    #[serde(default = "default_lambda_n")]
    pub lambda_n: f64,
    /// Boundary energy weight.
    #[serde(default = "default_lambda_b")]
    pub lambda_b: f64,
    /// Injectivity (flip) energy weight.
    #[serde(default = "default_lambda_inv")]
    pub lambda_inv: f64,
    /// Keypoint energy weight.
    #[serde(default = "default_lambda_c")]
    pub lambda_c: f64,
    /// Regularizer of the inverse metric in the symmetric Dirichlet energy.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        EnergyWeights {
            lambda_n: default_lambda_n(),
            lambda_b: default_lambda_b(),
            lambda_inv: default_lambda_inv(),
            lambda_c: default_lambda_c(),
            epsilon: default_epsilon(),
        }
    }
}

impl EnergyWeights {
    pub fn validate(&self) -> Result<(), EnergyError> {
        for (name, value) in [
            ("lambda_n", self.lambda_n),
            ("lambda_b", self.lambda_b),
            ("lambda_inv", self.lambda_inv),
            ("lambda_c", self.lambda_c),
            ("epsilon", self.epsilon),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(EnergyError::InvalidWeight { name, value });
            }
        }
        Ok(())
    }
}

/// Differential data of a map at one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianFrame {
    /// `n x 2` Jacobian, row-major.
    pub jacobian: Vec<[f64; 2]>,
    /// Pullback metric `JᵀJ`.
    pub metric: Mat2<f64>,
    /// Determinant, for `2 x 2` Jacobians.
    pub det: Option<f64>,
    /// Orthonormal basis of the column space, for `3 x 2` Jacobians.
    pub tangent_basis: Option<Mat3x2<f64>>,
}

impl JacobianFrame {
    pub fn planar(j: [[f64; 2]; 2]) -> Self {
        JacobianFrame {
            jacobian: j.to_vec(),
            metric: linalg::metric(&j),
            det: Some(linalg::det2(&j)),
            tangent_basis: None,
        }
    }

    pub fn spatial(j: Mat3x2<f64>) -> Self {
        JacobianFrame {
            jacobian: j.to_vec(),
            metric: linalg::metric(&j),
            det: None,
            tangent_basis: Some(linalg::orthonormal_frame(&j)),
        }
    }
}

/// Symmetric Dirichlet density `tr M + tr (M + εI)⁻¹`.
pub fn dirichlet_density<T: Real>(m: &Mat2<T>, eps: f64) -> T {
    let a = m[0][0] + eps;
    let d = m[1][1] + eps;
    let det = a * d - m[0][1] * m[1][0];
    // tr (M + εI)⁻¹ = tr(M + εI) / det(M + εI) for a 2x2 matrix
    linalg::trace2(m) + (a + d) / det
}

/// Conformal density `‖(tr M / ‖M‖²) M − I‖²` (Frobenius norms).
pub fn conformal_density<T: Real>(m: &Mat2<T>) -> Result<T, EnergyError> {
    if linalg::frobenius_sq(m).value() == 0.0 {
        return Err(EnergyError::DegenerateJacobian);
    }
    Ok(conformal_density_unchecked(m))
}

fn conformal_density_unchecked<T: Real>(m: &Mat2<T>) -> T {
    // ‖(t/f) M − I‖² = ‖t M − f I‖² / f², which cancels exactly for M = cI
    let t = linalg::trace2(m);
    let f = linalg::frobenius_sq(m);
    let e00 = t * m[0][0] - f;
    let e11 = t * m[1][1] - f;
    let e01 = t * m[0][1];
    let e10 = t * m[1][0];
    (e00 * e00 + e11 * e11 + e01 * e01 + e10 * e10) / (f * f)
}

/// Squared signed distance to `∂Ω`.
pub fn boundary_density<T: Real>(domain: Domain, x: [T; 2]) -> T {
    domain.signed_distance_generic(x).square()
}

/// Mean of the boundary density over the images of `samples` under `h`.
pub fn boundary_energy(h: &NeuralMap, domain: Domain, samples: &[[f64; 2]]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let total: f64 = samples
        .iter()
        .map(|p| {
            let y = h.evaluate_point(*p);
            boundary_density(domain, [y[0], y[1]])
        })
        .sum();
    total / samples.len() as f64
}

/// `max(−sign(d) e^{−d}, 0)`, with `sign(0) = 0`.
pub fn injectivity_density<T: Real>(det: T) -> T {
    if det.value() < 0.0 {
        (-det).exp()
    } else {
        det.constant_like(0.0)
    }
}

/// `λ_inv` times the mean injectivity density of the given determinants.
pub fn injectivity_energy(dets: &[f64], lambda_inv: f64) -> f64 {
    if dets.is_empty() {
        return 0.0;
    }
    lambda_inv * dets.iter().map(|d| injectivity_density(*d)).sum::<f64>() / dets.len() as f64
}

/// Applies the 2D rotation `r` about `center`.
/// The identity leaves `p` bit-exact.
pub fn rotate_about<T: Real>(r: &Mat2<f64>, center: [f64; 2], p: [T; 2]) -> [T; 2] {
    if *r == [[1.0, 0.0], [0.0, 1.0]] {
        return p;
    }
    let d = [p[0] - center[0], p[1] - center[1]];
    [
        d[0] * r[0][0] + d[1] * r[0][1] + center[0],
        d[0] * r[1][0] + d[1] * r[1][1] + center[1],
    ]
}

/// Keypoint energy `λ_C Σ ‖h(R Pᵢ) − Qᵢ‖²`, with `R` applied about the
/// domain center.
pub fn keypoint_energy(
    h: &NeuralMap,
    sources: &[[f64; 2]],
    targets: &[[f64; 2]],
    rotation: &Mat2<f64>,
    domain: Domain,
    lambda_c: f64,
) -> Result<f64, EnergyError> {
    if sources.len() != targets.len() {
        return Err(EnergyError::KeypointCount {
            sources: sources.len(),
            targets: targets.len(),
        });
    }
    if sources.is_empty() {
        return Err(EnergyError::NoKeypoints);
    }
    let c = domain.center();
    let sum: f64 = sources
        .iter()
        .zip(targets)
        .map(|(p, q)| {
            let y = h.evaluate_point(rotate_about(rotation, c, *p));
            (y[0] - q[0]).powi(2) + (y[1] - q[1]).powi(2)
        })
        .sum();
    Ok(lambda_c * sum)
}

/// A Monte-Carlo integral: the mean density with every sample retained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub count: usize,
    pub densities: Vec<f64>,
    /// Indices of samples whose density was not finite (and were dropped).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<usize>,
}

impl MCEstimate {
    pub fn from_densities(values: Vec<f64>, tolerate_nonfinite: bool) -> Result<Self, EnergyError> {
        if values.is_empty() {
            return Err(EnergyError::NoSamples);
        }
        let flagged: Vec<usize> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_finite())
            .map(|(i, _)| i)
            .collect();
        if !flagged.is_empty() && !tolerate_nonfinite {
            return Err(EnergyError::NonFiniteDensity(flagged));
        }
        let densities: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
        if densities.is_empty() {
            return Err(EnergyError::NonFiniteDensity(flagged));
        }
        let mean = densities.iter().sum::<f64>() / densities.len() as f64;
        Ok(MCEstimate {
            mean,
            count: densities.len(),
            densities,
            flagged,
        })
    }

    pub fn median(&self) -> f64 {
        median(&self.densities)
    }
}

/// Median (mean of the two middle values for even counts); NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Averages `density` over `samples`. Densities are evaluated in parallel and
/// summed in sample order, so the result does not depend on thread count.
pub fn mc_integrate<S, F>(samples: &[S], density: F, tolerate_nonfinite: bool) -> Result<MCEstimate, EnergyError>
where
    S: Sync,
    F: Fn(&S) -> f64 + Sync,
{
    let values: Vec<f64> = samples.par_iter().map(&density).collect();
    MCEstimate::from_densities(values, tolerate_nonfinite)
}
