use rand_chacha::ChaCha8Rng;

use super::head::{gather_jacobian, mat, run_head, scatter_jacobian, times_const};
use super::objective::{density_stats, draw_from, grid_mesh, map_chunks, reduce_chunks, sum_vars, uniform_points, Partial, EVAL_SALT};
use super::param::source_frames;
use super::{train, LossBreakdown, Metrics, Objective, OptimizationTask, OptimizeError, RunReport, Term, TrainHooks};
use crate::autodiff::linalg;
use crate::autodiff::{DualBatch, Real, Tape};
use crate::composition::SurfaceMapHandle;
use crate::energies::{boundary_density, injectivity_density};
use crate::mesh::count_flips;
use crate::neuralmap::NeuralMap;

const FLIP_GRID: usize = 64;

/// Samples of one surface-map step.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpBatch {
    pub interior: Vec<[f64; 2]>,
    /// Boundary points (empty when the boundary energy is off).
    pub boundary: Vec<[f64; 2]>,
}

/// `D(f) + C(h) + B(h) + G(h)` for `f ∘ φ = ψ ∘ h ∘ R`, over the warp `h`.
pub struct SurfaceMapObjective {
    handle: SurfaceMapHandle,
    pool: Vec<[f64; 2]>,
    held_out: Vec<[f64; 2]>,
    held_out_boundary: Vec<[f64; 2]>,
    eval_mesh: (Vec<[usize; 3]>, Vec<[f64; 2]>),
    pins: (Vec<[f64; 2]>, Vec<[f64; 2]>),
    task: OptimizationTask,
}

impl SurfaceMapObjective {
    pub fn new(handle: SurfaceMapHandle, task: &OptimizationTask) -> Result<Self, OptimizeError> {
        task.validate()?;
        let domain = handle.domain;
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(task.seed ^ EVAL_SALT ^ 1);
        let pins = handle.pins();
        Ok(SurfaceMapObjective {
            pool: uniform_points(domain, task.pool_size, task.seed),
            held_out: uniform_points(domain, task.eval_samples, task.seed ^ EVAL_SALT),
            held_out_boundary: domain.stratified_boundary(task.eval_samples, &mut rng),
            eval_mesh: grid_mesh(domain, FLIP_GRID),
            pins,
            handle,
            task: task.clone(),
        })
    }

    /// Counts flips of the source triangulation (mesh faces over their
    /// preimages) instead of a regular domain grid.
    pub fn with_eval_mesh(mut self, faces: Vec<[usize; 3]>, uv: Vec<[f64; 2]>) -> Self {
        self.eval_mesh = (faces, uv);
        self
    }

    pub fn handle(&self) -> &SurfaceMapHandle {
        &self.handle
    }

    pub fn into_handle(self) -> SurfaceMapHandle {
        self.handle
    }

    fn seed(&self, pts: &[[f64; 2]]) -> DualBatch {
        DualBatch::seed_linear(pts, &self.handle.rotation, self.handle.domain.center())
    }

    fn densities(&self) -> Result<Vec<f64>, OptimizeError> {
        let distortion = self.task.distortion;
        let eps = self.task.weights.epsilon;
        map_chunks(&self.held_out, self.task.chunk_size, |pts| {
            let frames = source_frames(&self.handle.source, pts)?;
            let (h, _) = self.handle.warp.forward_dual(&self.seed(pts), false)?;
            let (t, _) = self.handle.target.forward(&h, false)?;
            Ok(frames
                .iter()
                .enumerate()
                .map(|(i, a)| match a {
                    Some(a) => {
                        let j = linalg::matmul(&t.jacobian::<3>(i), a);
                        distortion.density(&linalg::metric(&j), eps)
                    }
                    None => f64::NAN,
                })
                .collect())
        })
    }

    fn interior(&self, pts: &[[f64; 2]], n: f64, only: Option<Term>) -> Result<Partial, OptimizeError> {
        let w = &self.task.weights;
        let distortion = self.task.distortion;
        let injectivity = self.task.injectivity;
        let warp = &self.handle.warp;
        let np = warp.params().len();
        let frames = source_frames(&self.handle.source, pts)?;
        let (h, htrace) = warp.forward_dual(&self.seed(pts), true)?;
        let (t, ttrace) = self.handle.target.forward(&h, true)?;
        let mut adj_t = DualBatch::zeros(pts.len(), 3);
        let mut adj_h = DualBatch::zeros(pts.len(), 2);
        let mut part = Partial::new(np);
        let mut tape = Tape::new();
        let mut inputs = Vec::with_capacity(10);
        let mut a = [0.0; 10];
        for (i, frame) in frames.iter().enumerate() {
            let Some(frame) = frame else { continue };
            part.valid += 1;
            inputs.clear();
            gather_jacobian(&t, i, &mut inputs);
            gather_jacobian(&h, i, &mut inputs);
            tape.clear();
            run_head(&tape, &inputs, only, &mut a, &mut part.loss, |v| {
                let j = times_const(&mat::<_, 3>(&v[..6]), frame);
                let d = distortion.density(&linalg::metric(&j), w.epsilon) / n;
                let mut terms = vec![(Term::Distortion, d)];
                if injectivity {
                    let jh = mat::<_, 2>(&v[6..]);
                    terms.push((Term::Injectivity, injectivity_density(linalg::det2(&jh)) * (w.lambda_inv / n)));
                }
                terms
            });
            scatter_jacobian(&mut adj_t, i, &a[..6]);
            scatter_jacobian(&mut adj_h, i, &a[6..]);
        }
        let mut back = self.handle.target.backward(&ttrace.expect("trace was requested"), &adj_t);
        for (b, e) in back.data_mut().iter_mut().zip(adj_h.data()) {
            *b += e;
        }
        warp.backward_dual(&htrace.expect("trace was requested"), &back, Some(&mut part.grad));
        Ok(part)
    }

    fn boundary(&self, pts: &[[f64; 2]], n: f64, only: Option<Term>) -> Result<Partial, OptimizeError> {
        let scale = self.task.weights.lambda_b / n;
        let domain = self.handle.domain;
        value_term(&self.handle.warp, &self.seed(pts), only, Term::Boundary, |_, y| {
            boundary_density(domain, y) * scale
        })
    }

    fn keypoints(&self, only: Option<Term>) -> Result<Partial, OptimizeError> {
        let (inputs, targets) = &self.pins;
        let lambda_c = self.task.weights.lambda_c;
        value_term(&self.handle.warp, &DualBatch::seed_identity(inputs), only, Term::Keypoint, |i, y| {
            sum_vars((0..2).map(|r| (y[r] - targets[i][r]).square())) * lambda_c
        })
    }
}

/// A term on warp values only: `f(i, h(xᵢ))` summed over the batch.
pub(crate) fn value_term<F>(warp: &NeuralMap, input: &DualBatch, only: Option<Term>, term: Term, f: F) -> Result<Partial, OptimizeError>
where
    F: for<'t> Fn(usize, [crate::autodiff::Var<'t>; 2]) -> crate::autodiff::Var<'t>,
{
    let np = warp.params().len();
    let (h, trace) = warp.forward_dual(input, true)?;
    let mut adj = DualBatch::zeros(input.len(), 2);
    let mut part = Partial::new(np);
    let mut tape = Tape::new();
    let mut a = [0.0; 2];
    for i in 0..input.len() {
        tape.clear();
        let y = h.value(i);
        run_head(&tape, &[y[0], y[1]], only, &mut a, &mut part.loss, |v| vec![(term, f(i, [v[0], v[1]]))]);
        adj.value_mut(i).copy_from_slice(&a);
    }
    warp.backward_dual(&trace.expect("trace was requested"), &adj, Some(&mut part.grad));
    Ok(part)
}

impl Objective for SurfaceMapObjective {
    type Batch = WarpBatch;

    fn name(&self) -> &'static str {
        "map"
    }

    fn params(&self) -> Vec<f64> {
        self.handle.warp.params().to_vec()
    }

    fn set_params(&mut self, p: &[f64]) {
        self.handle.warp.set_params(p).expect("optimizer keeps the parameter count");
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> WarpBatch {
        let interior = draw_from(&self.pool, self.task.batch_size, rng);
        let boundary = if self.task.boundary {
            self.handle.domain.stratified_boundary(self.task.boundary_batch_size, rng)
        } else {
            Vec::new()
        };
        WarpBatch { interior, boundary }
    }

    fn evaluate(&self, batch: &WarpBatch, only: Option<Term>) -> Result<(LossBreakdown, Vec<f64>), OptimizeError> {
        let np = self.handle.warp.params().len();
        let chunk = self.task.chunk_size;
        let n = batch.interior.len() as f64;
        let mut total = reduce_chunks(&batch.interior, chunk, np, |pts| self.interior(pts, n, only))?;
        if total.valid == 0 {
            return Err(OptimizeError::AllSamplesSingular);
        }
        if !batch.boundary.is_empty() {
            let nb = batch.boundary.len() as f64;
            total.absorb(reduce_chunks(&batch.boundary, chunk, np, |pts| self.boundary(pts, nb, only))?);
        }
        if self.task.keypoints && !self.pins.0.is_empty() {
            total.absorb(self.keypoints(only)?);
        }
        Ok((total.loss, total.grad))
    }

    fn eval_metric(&self) -> Result<f64, OptimizeError> {
        Ok(density_stats(self.densities()?)?.0)
    }

    fn metrics(&self) -> Result<Metrics, OptimizeError> {
        let (median, mean) = density_stats(self.densities()?)?;
        let (inputs, targets) = &self.pins;
        let keypoint_residual = (!inputs.is_empty()).then(|| {
            inputs
                .iter()
                .zip(targets)
                .map(|(p, q)| {
                    let y = self.handle.warp.evaluate_point(*p);
                    ((y[0] - q[0]).powi(2) + (y[1] - q[1]).powi(2)).sqrt()
                })
                .fold(0.0, f64::max)
        });
        let domain = self.handle.domain;
        let boundary_residual = self
            .held_out_boundary
            .iter()
            .map(|b| domain.signed_distance(self.handle.warp_point(*b)).abs())
            .fold(0.0, f64::max);
        let (faces, uv) = &self.eval_mesh;
        let mapped: Vec<[f64; 2]> = uv.iter().map(|p| self.handle.warp_point(*p)).collect();
        let flips = count_flips(faces, &mapped);
        Ok(Metrics {
            median_density: Some(median),
            mean_density: Some(mean),
            keypoint_residual,
            boundary_residual: Some(boundary_residual),
            flip_count: Some(flips),
            flip_percentage: Some(100.0 * flips as f64 / faces.len().max(1) as f64),
            ..Metrics::default()
        })
    }

    fn trainable(&self) -> Vec<(String, NeuralMap)> {
        vec![("warp".into(), self.handle.warp.clone())]
    }

    fn frozen_checksums(&self) -> Vec<u64> {
        vec![self.handle.source.checksum(), self.handle.target.checksum()]
    }

    fn warnings(&self) -> Vec<String> {
        let (faces, uv) = &self.eval_mesh;
        let mapped: Vec<[f64; 2]> = uv.iter().map(|p| self.handle.warp_point(*p)).collect();
        let flips = count_flips(faces, &mapped);
        if flips > 0 {
            vec![format!("{flips} of {} evaluation triangles remain flipped", faces.len())]
        } else {
            Vec::new()
        }
    }
}

/// Optimizes the warp of a surface-to-surface map; returns the updated
/// handle and the report.
pub fn optimize_surface_map(
    handle: SurfaceMapHandle,
    task: &OptimizationTask,
    hooks: TrainHooks<'_>,
) -> Result<(SurfaceMapHandle, RunReport), OptimizeError> {
    let mut obj = SurfaceMapObjective::new(handle, task)?;
    let report = train(&mut obj, task, hooks)?;
    Ok((obj.into_handle(), report))
}
