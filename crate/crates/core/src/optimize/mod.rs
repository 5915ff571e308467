//! Training loops: overfitting surfaces, free parameterization, surface-to-
//! surface warps and cycle-consistent collections.
//!
//! Every objective evaluates its batch in fixed-size chunks whose results
//! are reduced in chunk order, so a run is bit-reproducible from its seed
//! whatever the number of threads.

mod collection;
mod head;
mod objective;
mod overfit;
mod param;
mod rmsprop;
mod surface;
mod trainer;


use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::composition::CompositionError;
use crate::energies::{Distortion, EnergyError, EnergyWeights};
use crate::mesh::MeshError;
use crate::neuralmap::NeuralMapError;

pub use collection::{optimize_collection, CollectionObjective};
pub use objective::{grid_mesh, LossBreakdown, Objective, Term};
pub use overfit::{overfit, OverfitObjective};
pub use param::{optimize_parameterization, ParamObjective};
pub use rmsprop::{rmsprop_step, RmsProp, Schedule};
pub use surface::{optimize_surface_map, SurfaceMapObjective};
pub use trainer::{train, TrainHooks};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("every sample has a singular source jacobian")]
    AllSamplesSingular,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Composition(#[from] CompositionError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    NeuralMap(#[from] NeuralMapError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn d_lr() -> f64 {
    1e-4
}
fn d_t0() -> usize {
    1000
}
fn d_t_mult() -> usize {
    2
}
fn d_eta_min() -> f64 {
    1e-6
}
fn d_momentum() -> f64 {
    0.9
}
fn d_smoothing() -> f64 {
    0.99
}
fn d_rms_eps() -> f64 {
    1e-8
}
fn d_batch() -> usize {
    4096
}
fn d_pool() -> usize {
    500_000
}
fn d_max_steps() -> usize {
    20_000
}
fn d_grad_threshold() -> f64 {
    0.1
}
fn d_ema_decay() -> f64 {
    0.99
}
fn d_eval_samples() -> usize {
    10_000
}
fn d_eval_every() -> usize {
    1000
}
fn d_divergence() -> f64 {
    1e3
}
fn d_chunk() -> usize {
    256
}
fn d_log_every() -> usize {
    100
}
fn d_true() -> bool {
    true
}

/// Step-size schedule and optimizer constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Base (and post-restart) learning rate.
    #[serde(default = "d_lr")]
    pub lr: f64,
    /// Length of the first cosine period, in steps.
    #[serde(default = "d_t0")]
    pub t0: usize,
    /// Period growth factor at each warm restart.
    #[serde(default = "d_t_mult")]
    pub t_mult: usize,
    #[serde(default = "d_eta_min")]
    pub eta_min: f64,
    /// Heavy-ball momentum.
    #[serde(default = "d_momentum")]
    pub momentum: f64,
    /// Decay of the running mean of squared gradients.
    #[serde(default = "d_smoothing")]
    pub smoothing: f64,
    #[serde(default = "d_rms_eps")]
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: d_lr(),
            t0: d_t0(),
            t_mult: d_t_mult(),
            eta_min: d_eta_min(),
            momentum: d_momentum(),
            smoothing: d_smoothing(),
            eps: d_rms_eps(),
        }
    }
}

/// Declarative description of one optimization run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationTask {
    #[serde(default)]
    pub weights: EnergyWeights,
    /// Distortion measure minimized by warp tasks.
    #[serde(default)]
    pub distortion: Distortion,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Interior samples per step.
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    /// Boundary samples per step (when the boundary energy is active).
    #[serde(default = "d_batch")]
    pub boundary_batch_size: usize,
    /// Size of the sample pool batches are drawn from.
    #[serde(default = "d_pool")]
    pub pool_size: usize,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,
    /// Stop once the moving average of the gradient norm drops below this.
    #[serde(default = "d_grad_threshold")]
    pub grad_threshold: f64,
    #[serde(default = "d_ema_decay")]
    pub ema_decay: f64,
    /// Abort when the loss exceeds this multiple of its initial value.
    #[serde(default = "d_divergence")]
    pub divergence_factor: f64,
    /// Held-out evaluation samples.
    #[serde(default = "d_eval_samples")]
    pub eval_samples: usize,
    /// Evaluate (and record) the held-out metric every this many steps.
    #[serde(default = "d_eval_every")]
    pub eval_every: usize,
    /// Samples per parallel work unit; part of the reduction order.
    #[serde(default = "d_chunk")]
    pub chunk_size: usize,
    #[serde(default = "d_log_every")]
    pub log_every: usize,
    /// Emit a checkpoint every this many steps (0 disables).
    #[serde(default)]
    pub checkpoint_every: usize,
    /// Boundary energy for warp tasks with a fixed boundary.
    #[serde(default = "d_true")]
    pub boundary: bool,
    #[serde(default = "d_true")]
    pub injectivity: bool,
    #[serde(default = "d_true")]
    pub keypoints: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for OptimizationTask {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every task field has a default")
    }
}

impl OptimizationTask {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        self.weights.validate()?;
        let bad = |m: String| Err(OptimizeError::InvalidTask(m));
        if self.batch_size == 0 || self.pool_size == 0 || self.chunk_size == 0 {
            return bad("batch, pool and chunk sizes must be positive".into());
        }
        if self.eval_samples == 0 {
            return bad("eval_samples must be positive".into());
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0 && o.eta_min >= 0.0 && o.eta_min <= o.lr) {
            return bad(format!("learning rates must satisfy 0 <= eta_min <= lr, lr > 0 (lr {}, eta_min {})", o.lr, o.eta_min));
        }
        if o.t0 == 0 || o.t_mult == 0 {
            return bad("t0 and t_mult must be positive".into());
        }
        if !(0.0..1.0).contains(&o.momentum) || !(0.0..1.0).contains(&o.smoothing) {
            return bad("momentum and smoothing must lie in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return bad("ema_decay must lie in [0, 1)".into());
        }
        if !(self.divergence_factor > 1.0) {
            return bad("divergence_factor must exceed 1".into());
        }
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradThreshold,
    MaxSteps,
    Divergence,
}

/// One point of the logged loss curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub total: f64,
    pub terms: BTreeMap<Term, f64>,
    pub grad_norm: f64,
    pub grad_norm_ema: f64,
    pub lr: f64,
}

/// Held-out metric recorded during training: the median density for warp
/// tasks, the position RMSE when overfitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: usize,
    pub value: f64,
}

/// Evaluation statistics; which fields are present depends on the task.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position_rmse: Option<f64>,
    /// Mean angle between fitted and mesh normals, in degrees.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal_deviation_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_density: Option<f64>,
    /// Largest keypoint (and pinned corner) miss, in domain units.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keypoint_residual: Option<f64>,
    /// Largest distance of a warped boundary point from `∂Ω`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip_percentage: Option<f64>,
    /// Per ordered pair `"i->j"`: median density (collections).
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub pair_medians: BTreeMap<String, f64>,
}

/// Outcome of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: String,
    pub steps: usize,
    pub termination: Termination,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_grad_norm_ema: f64,
    pub initial: Metrics,
    #[serde(rename = "final")]
    pub final_metrics: Metrics,
    pub loss_curve: Vec<CurvePoint>,
    pub eval_curve: Vec<EvalPoint>,
    /// Non-fatal issues (e.g. persistent flips at the step limit).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Wall-clock time; kept out of serialized reports so reruns compare
    /// byte for byte.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}
