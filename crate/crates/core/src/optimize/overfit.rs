use rand_chacha::ChaCha8Rng;

use super::head::{gather, run_head, scatter};
use super::objective::{draw_from, map_chunks, reduce_chunks, sum_vars, Partial, EVAL_SALT};
use super::{train, LossBreakdown, Metrics, Objective, OptimizationTask, OptimizeError, RunReport, Term, TrainHooks};
use crate::autodiff::linalg::{cross3, dot};
use crate::autodiff::{DualBatch, Real, Tape};
use crate::composition::CompositionError;
use crate::mesh::{sample_domain, DomainSample, PLMap};
use crate::neuralmap::NeuralMap;

/// Fits a surface network `φ` to a parameterized mesh:
/// mean `‖f(p) − φ(p)‖²` plus `λ_n` times mean `‖n_φ − n_f‖²`.
pub struct OverfitObjective<'a> {
    plmap: &'a PLMap,
    map: NeuralMap,
    pool: Vec<DomainSample>,
    held_out: Vec<DomainSample>,
    task: OptimizationTask,
}

impl<'a> OverfitObjective<'a> {
    pub fn new(plmap: &'a PLMap, map: NeuralMap, task: &OptimizationTask) -> Result<Self, OptimizeError> {
        task.validate()?;
        if map.out_dim() != 3 {
            return Err(CompositionError::SurfaceDim(map.out_dim()).into());
        }
        Ok(OverfitObjective {
            plmap,
            map,
            pool: sample_domain(plmap, task.pool_size, task.seed),
            held_out: sample_domain(plmap, task.eval_samples, task.seed ^ EVAL_SALT),
            task: task.clone(),
        })
    }

    pub fn plmap(&self) -> &PLMap {
        self.plmap
    }

    pub fn map(&self) -> &NeuralMap {
        &self.map
    }

    pub fn into_map(self) -> NeuralMap {
        self.map
    }

    /// Squared position error and normal angle (degrees) per held-out sample.
    fn errors(&self) -> Result<Vec<(f64, f64)>, OptimizeError> {
        map_chunks(&self.held_out, self.task.chunk_size, |chunk| {
            let pts: Vec<[f64; 2]> = chunk.iter().map(|s| s.p).collect();
            let (out, _) = self.map.forward_dual(&DualBatch::seed_identity(&pts), false)?;
            Ok(chunk
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let y = out.value(i);
                    let e2 = (0..3).map(|r| (y[r] - s.position[r]).powi(2)).sum::<f64>();
                    let j = out.jacobian::<3>(i);
                    let c = cross3([j[0][0], j[1][0], j[2][0]], [j[0][1], j[1][1], j[2][1]]);
                    let len = dot(&c, &c).sqrt();
                    let cos = (dot(&c, &s.normal) / len).clamp(-1.0, 1.0);
                    (e2, cos.acos().to_degrees())
                })
                .collect())
        })
    }
}

impl Objective for OverfitObjective<'_> {
    type Batch = Vec<DomainSample>;

    fn name(&self) -> &'static str {
        "overfit"
    }

    fn params(&self) -> Vec<f64> {
        self.map.params().to_vec()
    }

    fn set_params(&mut self, p: &[f64]) {
        self.map.set_params(p).expect("optimizer keeps the parameter count");
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<DomainSample> {
        draw_from(&self.pool, self.task.batch_size, rng)
    }

    fn evaluate(&self, batch: &Vec<DomainSample>, only: Option<Term>) -> Result<(LossBreakdown, Vec<f64>), OptimizeError> {
        let n = batch.len() as f64;
        let lambda_n = self.task.weights.lambda_n;
        let np = self.map.params().len();
        let total = reduce_chunks(batch, self.task.chunk_size, np, |chunk| {
            let pts: Vec<[f64; 2]> = chunk.iter().map(|s| s.p).collect();
            let (out, trace) = self.map.forward_dual(&DualBatch::seed_identity(&pts), true)?;
            let mut adj = DualBatch::zeros(chunk.len(), 3);
            let mut part = Partial::new(np);
            let mut tape = Tape::new();
            let mut inputs = Vec::with_capacity(9);
            let mut a = [0.0; 9];
            for (i, s) in chunk.iter().enumerate() {
                inputs.clear();
                gather(&out, i, &mut inputs);
                tape.clear();
                run_head(&tape, &inputs, only, &mut a, &mut part.loss, |v| {
                    let pos = sum_vars((0..3).map(|r| (v[r] - s.position[r]).square())) / n;
                    let c = cross3([v[3], v[5], v[7]], [v[4], v[6], v[8]]);
                    let len = dot(&c, &c).sqrt();
                    let nrm = sum_vars((0..3).map(|r| (c[r] / len - s.normal[r]).square())) * (lambda_n / n);
                    vec![(Term::Position, pos), (Term::Normal, nrm)]
                });
                scatter(&mut adj, i, &a);
            }
            let trace = trace.expect("trace was requested");
            self.map.backward_dual(&trace, &adj, Some(&mut part.grad));
            Ok(part)
        })?;
        Ok((total.loss, total.grad))
    }

    fn eval_metric(&self) -> Result<f64, OptimizeError> {
        let e = self.errors()?;
        Ok((e.iter().map(|x| x.0).sum::<f64>() / e.len() as f64).sqrt())
    }

    fn metrics(&self) -> Result<Metrics, OptimizeError> {
        let e = self.errors()?;
        let n = e.len() as f64;
        Ok(Metrics {
            position_rmse: Some((e.iter().map(|x| x.0).sum::<f64>() / n).sqrt()),
            normal_deviation_deg: Some(e.iter().map(|x| x.1).sum::<f64>() / n),
            ..Metrics::default()
        })
    }

    fn trainable(&self) -> Vec<(String, NeuralMap)> {
        vec![("surface".into(), self.map.clone())]
    }
}

/// Overfits `map` to `plmap`; returns the trained map and the run report.
pub fn overfit(
    plmap: &PLMap,
    map: NeuralMap,
    task: &OptimizationTask,
    hooks: TrainHooks<'_>,
) -> Result<(NeuralMap, RunReport), OptimizeError> {
    let mut obj = OverfitObjective::new(plmap, map, task)?;
    let report = train(&mut obj, task, hooks)?;
    Ok((obj.into_map(), report))
}
