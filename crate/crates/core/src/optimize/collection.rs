use rand_chacha::ChaCha8Rng;

use super::head::{gather_jacobian, mat, pair_metric, run_head, scatter_jacobian};
use super::objective::{density_stats, draw_from, grid_mesh, map_chunks, reduce_chunks, sum_vars, uniform_points, Partial, EVAL_SALT};
use super::surface::{value_term, WarpBatch};
use super::{train, LossBreakdown, Metrics, Objective, OptimizationTask, OptimizeError, RunReport, Term, TrainHooks};
use crate::autodiff::linalg::{self, Mat3x2};
use crate::autodiff::{DualBatch, Real, Tape};
use crate::composition::{CollectionHandle, SurfaceTrace, SINGULAR_TOLERANCE};
use crate::energies::{boundary_density, injectivity_density};
use crate::mesh::count_flips;
use crate::neuralmap::{DualTrace, NeuralMap};

const FLIP_GRID: usize = 64;

/// Sum over all ordered pairs of `D(F_{i→j})`, plus per-warp boundary,
/// injectivity and keypoint terms, over all `k` warps at once.
pub struct CollectionObjective {
    handle: CollectionHandle,
    offsets: Vec<usize>,
    pool: Vec<[f64; 2]>,
    held_out: Vec<[f64; 2]>,
    held_out_boundary: Vec<[f64; 2]>,
    eval_mesh: (Vec<[usize; 3]>, Vec<[f64; 2]>),
    pins: Vec<(Vec<[f64; 2]>, Vec<[f64; 2]>)>,
    pairs: Vec<(usize, usize)>,
    task: OptimizationTask,
}

fn is_regular(j: &Mat3x2<f64>) -> bool {
    linalg::singular_values(j)[1] > SINGULAR_TOLERANCE
}

impl CollectionObjective {
    pub fn new(handle: CollectionHandle, task: &OptimizationTask) -> Result<Self, OptimizeError> {
        task.validate()?;
        let domain = handle.domain;
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(task.seed ^ EVAL_SALT ^ 1);
        let mut offsets = vec![0];
        for w in &handle.warps {
            offsets.push(offsets.last().unwrap() + w.params().len());
        }
        Ok(CollectionObjective {
            offsets,
            pool: uniform_points(domain, task.pool_size, task.seed),
            held_out: uniform_points(domain, task.eval_samples, task.seed ^ EVAL_SALT),
            held_out_boundary: domain.stratified_boundary(task.eval_samples, &mut rng),
            eval_mesh: grid_mesh(domain, FLIP_GRID),
            pins: (0..handle.len()).map(|i| handle.pins(i)).collect(),
            pairs: handle.ordered_pairs(),
            handle,
            task: task.clone(),
        })
    }

    pub fn handle(&self) -> &CollectionHandle {
        &self.handle
    }

    pub fn into_handle(self) -> CollectionHandle {
        self.handle
    }

    fn n_params(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Per held-out point, the density of every ordered pair (NaN where the
    /// pair's source is singular).
    fn pair_densities(&self) -> Result<Vec<Vec<f64>>, OptimizeError> {
        let distortion = self.task.distortion;
        let eps = self.task.weights.epsilon;
        map_chunks(&self.held_out, self.task.chunk_size, |pts| {
            let seed = DualBatch::seed_identity(pts);
            let mut outs = Vec::with_capacity(self.handle.len());
            for (w, s) in self.handle.warps.iter().zip(&self.handle.surfaces) {
                let (h, _) = w.forward_dual(&seed, false)?;
                outs.push(s.forward(&h, false)?.0);
            }
            Ok((0..pts.len())
                .map(|n| {
                    let js: Vec<Mat3x2<f64>> = outs.iter().map(|o| o.jacobian::<3>(n)).collect();
                    self.pairs
                        .iter()
                        .map(|&(i, j)| {
                            if is_regular(&js[i]) {
                                distortion.density(&pair_metric(&js[i], &js[j]), eps)
                            } else {
                                f64::NAN
                            }
                        })
                        .collect()
                })
                .collect())
        })
    }

    fn interior(&self, pts: &[[f64; 2]], n: f64, only: Option<Term>) -> Result<Partial, OptimizeError> {
        let w = &self.task.weights;
        let distortion = self.task.distortion;
        let injectivity = self.task.injectivity;
        let k = self.handle.len();
        let seed = DualBatch::seed_identity(pts);
        let mut hs: Vec<(DualBatch, DualTrace)> = Vec::with_capacity(k);
        let mut ss: Vec<(DualBatch, SurfaceTrace)> = Vec::with_capacity(k);
        for (warp, surface) in self.handle.warps.iter().zip(&self.handle.surfaces) {
            let (h, ht) = warp.forward_dual(&seed, true)?;
            let (s, st) = surface.forward(&h, true)?;
            hs.push((h, ht.expect("trace was requested")));
            ss.push((s, st.expect("trace was requested")));
        }
        let mut adj_s: Vec<DualBatch> = (0..k).map(|_| DualBatch::zeros(pts.len(), 3)).collect();
        let mut adj_h: Vec<DualBatch> = (0..k).map(|_| DualBatch::zeros(pts.len(), 2)).collect();
        let mut part = Partial::new(self.n_params());
        let mut tape = Tape::new();
        let mut inputs = Vec::with_capacity(10 * k);
        let mut a = vec![0.0; 10 * k];
        for m in 0..pts.len() {
            let regular: Vec<bool> = ss.iter().map(|(s, _)| is_regular(&s.jacobian::<3>(m))).collect();
            let active: Vec<(usize, usize)> = self.pairs.iter().copied().filter(|&(i, _)| regular[i]).collect();
            part.valid += active.len();
            inputs.clear();
            for (s, _) in &ss {
                gather_jacobian(s, m, &mut inputs);
            }
            for (h, _) in &hs {
                gather_jacobian(h, m, &mut inputs);
            }
            tape.clear();
            run_head(&tape, &inputs, only, &mut a, &mut part.loss, |v| {
                let js: Vec<Mat3x2<_>> = (0..k).map(|i| mat::<_, 3>(&v[6 * i..6 * i + 6])).collect();
                let mut terms = Vec::new();
                if !active.is_empty() {
                    let d = sum_vars(
                        active
                            .iter()
                            .map(|&(i, j)| distortion.density(&pair_metric(&js[i], &js[j]), w.epsilon)),
                    );
                    terms.push((Term::Distortion, d / n));
                }
                if injectivity {
                    let g = sum_vars((0..k).map(|i| {
                        let jh = mat::<_, 2>(&v[6 * k + 4 * i..6 * k + 4 * i + 4]);
                        injectivity_density(linalg::det2(&jh))
                    }));
                    terms.push((Term::Injectivity, g * (w.lambda_inv / n)));
                }
                terms
            });
            for i in 0..k {
                scatter_jacobian(&mut adj_s[i], m, &a[6 * i..6 * i + 6]);
                scatter_jacobian(&mut adj_h[i], m, &a[6 * k + 4 * i..6 * k + 4 * i + 4]);
            }
        }
        for i in 0..k {
            let mut back = self.handle.surfaces[i].backward(&ss[i].1, &adj_s[i]);
            for (b, e) in back.data_mut().iter_mut().zip(adj_h[i].data()) {
                *b += e;
            }
            let grad = &mut part.grad[self.offsets[i]..self.offsets[i + 1]];
            self.handle.warps[i].backward_dual(&hs[i].1, &back, Some(grad));
        }
        Ok(part)
    }

    /// Embeds a per-warp partial into the full parameter vector.
    fn embed(&self, i: usize, p: Partial) -> Partial {
        let mut full = Partial::new(self.n_params());
        full.loss = p.loss;
        full.valid = p.valid;
        full.grad[self.offsets[i]..self.offsets[i + 1]].copy_from_slice(&p.grad);
        full
    }
}

impl Objective for CollectionObjective {
    type Batch = WarpBatch;

    fn name(&self) -> &'static str {
        "collection"
    }

    fn params(&self) -> Vec<f64> {
        self.handle.warps.iter().flat_map(|w| w.params().iter().copied()).collect()
    }

    fn set_params(&mut self, p: &[f64]) {
        for (i, w) in self.handle.warps.iter_mut().enumerate() {
            w.set_params(&p[self.offsets[i]..self.offsets[i + 1]])
                .expect("optimizer keeps the parameter count");
        }
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
        let np = self.n_params();
        let chunk = self.task.chunk_size;
        let n = batch.interior.len() as f64;
        let mut total = reduce_chunks(&batch.interior, chunk, np, |pts| self.interior(pts, n, only))?;
        if total.valid == 0 {
            return Err(OptimizeError::AllSamplesSingular);
        }
        let domain = self.handle.domain;
        for (i, warp) in self.handle.warps.iter().enumerate() {
            if !batch.boundary.is_empty() {
                let scale = self.task.weights.lambda_b / batch.boundary.len() as f64;
                let b = reduce_chunks(&batch.boundary, chunk, warp.params().len(), |pts| {
                    value_term(warp, &DualBatch::seed_identity(pts), only, Term::Boundary, |_, y| {
                        boundary_density(domain, y) * scale
                    })
                })?;
                total.absorb(self.embed(i, b));
            }
            let (inputs, targets) = &self.pins[i];
            if self.task.keypoints && !inputs.is_empty() {
                let lambda_c = self.task.weights.lambda_c;
                let c = value_term(warp, &DualBatch::seed_identity(inputs), only, Term::Keypoint, |m, y| {
                    sum_vars((0..2).map(|r| (y[r] - targets[m][r]).square())) * lambda_c
                })?;
                total.absorb(self.embed(i, c));
            }
        }
        Ok((total.loss, total.grad))
    }

    fn eval_metric(&self) -> Result<f64, OptimizeError> {
        Ok(self.metrics()?.median_density.unwrap_or(f64::NAN))
    }

    fn metrics(&self) -> Result<Metrics, OptimizeError> {
        let per_point = self.pair_densities()?;
        let mut pair_medians = std::collections::BTreeMap::new();
        let mut all = Vec::new();
        let mut medians = Vec::new();
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            let values: Vec<f64> = per_point.iter().map(|d| d[p]).collect();
            all.extend_from_slice(&values);
            let (median, _) = density_stats(values)?;
            pair_medians.insert(format!("{i}->{j}"), median);
            medians.push(median);
        }
        let (_, mean) = density_stats(all)?;
        let mut keypoint_residual: Option<f64> = None;
        let mut boundary_residual = 0.0f64;
        let mut flips = 0;
        let (faces, grid) = &self.eval_mesh;
        let domain = self.handle.domain;
        for (i, warp) in self.handle.warps.iter().enumerate() {
            let (inputs, targets) = &self.pins[i];
            for (p, q) in inputs.iter().zip(targets) {
                let y = warp.evaluate_point(*p);
                let r = ((y[0] - q[0]).powi(2) + (y[1] - q[1]).powi(2)).sqrt();
                keypoint_residual = Some(keypoint_residual.map_or(r, |k| k.max(r)));
            }
            for b in &self.held_out_boundary {
                let y = warp.evaluate_point(*b);
                boundary_residual = boundary_residual.max(domain.signed_distance([y[0], y[1]]).abs());
            }
            let mapped: Vec<[f64; 2]> = warp.evaluate(grid).into_iter().map(|y| [y[0], y[1]]).collect();
            flips += count_flips(faces, &mapped);
        }
        let total_faces = faces.len() * self.handle.len();
        Ok(Metrics {
            median_density: Some(medians.iter().sum::<f64>() / medians.len() as f64),
            mean_density: Some(mean),
            keypoint_residual,
            boundary_residual: Some(boundary_residual),
            flip_count: Some(flips),
            flip_percentage: Some(100.0 * flips as f64 / total_faces.max(1) as f64),
            pair_medians,
            ..Metrics::default()
        })
    }

    fn trainable(&self) -> Vec<(String, NeuralMap)> {
        self.handle
            .warps
            .iter()
            .enumerate()
            .map(|(i, w)| (format!("warp_{i}"), w.clone()))
            .collect()
    }

    fn frozen_checksums(&self) -> Vec<u64> {
        self.handle.surfaces.iter().map(|s| s.checksum()).collect()
    }
}

/// Optimizes all warps of a collection jointly; returns the updated handle
/// and the report.
pub fn optimize_collection(
    handle: CollectionHandle,
    task: &OptimizationTask,
    hooks: TrainHooks<'_>,
) -> Result<(CollectionHandle, RunReport), OptimizeError> {
    let mut obj = CollectionObjective::new(handle, task)?;
    let report = train(&mut obj, task, hooks)?;
    Ok((obj.into_handle(), report))
}
