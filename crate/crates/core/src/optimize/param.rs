use rand_chacha::ChaCha8Rng;

use super::head::{gather_jacobian, mat, run_head, scatter_jacobian, times_const};
use super::objective::{density_stats, draw_from, grid_mesh, map_chunks, reduce_chunks, uniform_points, Partial, EVAL_SALT};
use super::{train, LossBreakdown, Metrics, Objective, OptimizationTask, OptimizeError, RunReport, Term, TrainHooks};
use crate::autodiff::linalg::{self, Mat2};
use crate::autodiff::{DualBatch, Tape};
use crate::composition::{source_frame_inverse, CompositionError, SurfaceMap};
use crate::domain::Domain;
use crate::energies::{injectivity_density, Distortion};
use crate::mesh::count_flips;
use crate::neuralmap::NeuralMap;

/// Resolution of the fallback flip-counting grid.
const FLIP_GRID: usize = 64;

/// Free-boundary parameterization: distortion of the surface-to-plane map
/// `f` with `f ∘ φ = h`, over a trainable warp `h` and a frozen `φ`.
pub struct ParamObjective<'a> {
    source: &'a SurfaceMap,
    warp: NeuralMap,
    pool: Vec<[f64; 2]>,
    held_out: Vec<[f64; 2]>,
    eval_mesh: (Vec<[usize; 3]>, Vec<[f64; 2]>),
    task: OptimizationTask,
}

/// `Jφ⁺E` for every point, `None` where `φ` is singular.
pub(crate) fn source_frames(source: &SurfaceMap, pts: &[[f64; 2]]) -> Result<Vec<Option<Mat2<f64>>>, OptimizeError> {
    let (out, _) = source.forward(&DualBatch::seed_identity(pts), false)?;
    Ok((0..pts.len()).map(|i| source_frame_inverse(&out.jacobian::<3>(i)).ok()).collect())
}

impl<'a> ParamObjective<'a> {
    pub fn new(source: &'a SurfaceMap, warp: NeuralMap, domain: Domain, task: &OptimizationTask) -> Result<Self, OptimizeError> {
        task.validate()?;
        if warp.out_dim() != 2 {
            return Err(CompositionError::WarpDim(warp.out_dim()).into());
        }
        Ok(ParamObjective {
            source,
            warp,
            pool: uniform_points(domain, task.pool_size, task.seed),
            held_out: uniform_points(domain, task.eval_samples, task.seed ^ EVAL_SALT),
            eval_mesh: grid_mesh(domain, FLIP_GRID),
            task: task.clone(),
        })
    }

    /// Counts flips on this triangulation (e.g. the source mesh with its
    /// UVs) instead of a regular domain grid.
    pub fn with_eval_mesh(mut self, faces: Vec<[usize; 3]>, uv: Vec<[f64; 2]>) -> Self {
        self.eval_mesh = (faces, uv);
        self
    }

    pub fn warp(&self) -> &NeuralMap {
        &self.warp
    }

    pub fn into_warp(self) -> NeuralMap {
        self.warp
    }

    /// Density of the chosen distortion at each held-out point; NaN where
    /// the source is singular.
    fn densities(&self) -> Result<Vec<f64>, OptimizeError> {
        let distortion = self.task.distortion;
        let eps = self.task.weights.epsilon;
        map_chunks(&self.held_out, self.task.chunk_size, |pts| {
            let frames = source_frames(self.source, pts)?;
            let (h, _) = self.warp.forward_dual(&DualBatch::seed_identity(pts), false)?;
            Ok(frames
                .iter()
                .enumerate()
                .map(|(i, a)| match a {
                    Some(a) => {
                        let j = linalg::matmul(&h.jacobian::<2>(i), a);
                        distortion.density(&linalg::metric(&j), eps)
                    }
                    None => f64::NAN,
                })
                .collect())
        })
    }
}

impl Objective for ParamObjective<'_> {
    type Batch = Vec<[f64; 2]>;

    fn name(&self) -> &'static str {
        "parameterize"
    }

    fn params(&self) -> Vec<f64> {
        self.warp.params().to_vec()
    }

    fn set_params(&mut self, p: &[f64]) {
        self.warp.set_params(p).expect("optimizer keeps the parameter count");
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
        draw_from(&self.pool, self.task.batch_size, rng)
    }

    fn evaluate(&self, batch: &Vec<[f64; 2]>, only: Option<Term>) -> Result<(LossBreakdown, Vec<f64>), OptimizeError> {
        let n = batch.len() as f64;
        let w = &self.task.weights;
        let distortion: Distortion = self.task.distortion;
        let injectivity = self.task.injectivity;
        let np = self.warp.params().len();
        let total = reduce_chunks(batch, self.task.chunk_size, np, |pts| {
            let frames = source_frames(self.source, pts)?;
            let (h, trace) = self.warp.forward_dual(&DualBatch::seed_identity(pts), true)?;
            let mut adj = DualBatch::zeros(pts.len(), 2);
            let mut part = Partial::new(np);
            let mut tape = Tape::new();
            let mut inputs = Vec::with_capacity(4);
            let mut a = [0.0; 4];
            for (i, frame) in frames.iter().enumerate() {
                let Some(frame) = frame else { continue };
                part.valid += 1;
                inputs.clear();
                gather_jacobian(&h, i, &mut inputs);
                tape.clear();
                run_head(&tape, &inputs, only, &mut a, &mut part.loss, |v| {
                    let jh = mat::<_, 2>(v);
                    let j = times_const(&jh, frame);
                    let d = distortion.density(&linalg::metric(&j), w.epsilon) / n;
                    let mut terms = vec![(Term::Distortion, d)];
                    if injectivity {
                        terms.push((Term::Injectivity, injectivity_density(linalg::det2(&jh)) * (w.lambda_inv / n)));
                    }
                    terms
                });
                scatter_jacobian(&mut adj, i, &a);
            }
            let trace = trace.expect("trace was requested");
            self.warp.backward_dual(&trace, &adj, Some(&mut part.grad));
            Ok(part)
        })?;
        if total.valid == 0 {
            return Err(OptimizeError::AllSamplesSingular);
        }
        Ok((total.loss, total.grad))
    }

    fn eval_metric(&self) -> Result<f64, OptimizeError> {
        Ok(density_stats(self.densities()?)?.0)
    }

    fn metrics(&self) -> Result<Metrics, OptimizeError> {
        let (median, mean) = density_stats(self.densities()?)?;
        let (faces, uv) = &self.eval_mesh;
        let mapped: Vec<[f64; 2]> = self
            .warp
            .evaluate(uv)
            .into_iter()
            .map(|y| [y[0], y[1]])
            .collect();
        let flips = count_flips(faces, &mapped);
        Ok(Metrics {
            median_density: Some(median),
            mean_density: Some(mean),
            flip_count: Some(flips),
            flip_percentage: Some(100.0 * flips as f64 / faces.len().max(1) as f64),
            ..Metrics::default()
        })
    }

    fn trainable(&self) -> Vec<(String, NeuralMap)> {
        vec![("warp".into(), self.warp.clone())]
    }

    fn frozen_checksums(&self) -> Vec<u64> {
        vec![self.source.checksum()]
    }
}

/// Optimizes the free-boundary parameterization `φ^h` for the task's
/// distortion; returns the trained warp and the report.
pub fn optimize_parameterization(
    source: &SurfaceMap,
    warp: NeuralMap,
    domain: Domain,
    task: &OptimizationTask,
    hooks: TrainHooks<'_>,
) -> Result<(NeuralMap, RunReport), OptimizeError> {
    let mut obj = ParamObjective::new(source, warp, domain, task)?;
    let report = train(&mut obj, task, hooks)?;
    Ok((obj.into_warp(), report))
}
