use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::rmsprop::{rmsprop_step, RmsProp, Schedule};
use super::{CurvePoint, EvalPoint, Objective, OptimizationTask, OptimizeError, RunReport, Termination};
use crate::autodiff::{grad_norm, AutodiffError};
use crate::composition::CompositionError;
use crate::neuralmap::NeuralMap;

/// Checkpoint callback: step and the named trainable maps.
pub type CheckpointFn<'h> = dyn FnMut(usize, &[(String, NeuralMap)]) -> Result<(), OptimizeError> + 'h;

/// Optional side channels of a run.
#[derive(Default)]
pub struct TrainHooks<'h> {
    /// Receives one JSON object per line for every logged step.
    pub log: Option<&'h mut dyn Write>,
    /// Called every `checkpoint_every` steps and once at the end.
    pub checkpoint: Option<&'h mut CheckpointFn<'h>>,
}

/// Seed offset of the batch stream, distinct from pool and held-out seeds.
const BATCH_SALT: u64 = 0x2545_f491_4f6c_dd1d;

/// A layer produced non-finite values, directly or inside a frozen map.
fn is_non_finite(e: &OptimizeError) -> bool {
    matches!(
        e,
        OptimizeError::Autodiff(AutodiffError::NonFiniteLayer { .. })
            | OptimizeError::Composition(CompositionError::Autodiff(AutodiffError::NonFiniteLayer { .. }))
    )
}

/// Runs RMSProp with warm restarts on `obj` until the moving average of the
/// gradient norm drops below the threshold, the step limit is hit, or the
/// loss diverges (the parameters of the last finite step are kept).
pub fn train<O: Objective>(obj: &mut O, task: &OptimizationTask, mut hooks: TrainHooks<'_>) -> Result<RunReport, OptimizeError> {
    let start = Instant::now();
    task.validate()?;
    let frozen = obj.frozen_checksums();
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed ^ BATCH_SALT);
    let schedule = Schedule::from_config(&task.optimizer);
    let mut params = obj.params();
    let mut opt = RmsProp::new(params.len(), &task.optimizer);
    let mut previous = params.clone();

    let initial = obj.metrics()?;
    let mut eval_curve = vec![EvalPoint {
        step: 0,
        value: obj.eval_metric()?,
    }];
    let mut loss_curve = Vec::new();
    let mut initial_loss: Option<f64> = None;
    let mut final_loss = f64::NAN;
    let mut ema: Option<f64> = None;
    let mut termination = Termination::MaxSteps;
    let mut steps = 0;

    for step in 0..task.max_steps {
        let batch = obj.draw(&mut rng);
        let evaluated = match obj.evaluate(&batch, None) {
            Ok(x) => Some(x),
            Err(e) if is_non_finite(&e) => None,
            Err(e) => return Err(e),
        };
        let finite = evaluated
            .as_ref()
            .filter(|(loss, grad)| loss.total().is_finite() && grad.iter().all(|g| g.is_finite()));
        let Some((loss, grad)) = finite else {
            termination = Termination::Divergence;
            break;
        };
        let total = loss.total();
        let reference = *initial_loss.get_or_insert(total);
        if total > task.divergence_factor * reference.abs().max(f64::MIN_POSITIVE) {
            termination = Termination::Divergence;
            break;
        }
        final_loss = total;
        let norm = grad_norm(grad);
        let avg = match ema {
            None => norm,
            Some(e) => task.ema_decay * e + (1.0 - task.ema_decay) * norm,
        };
        ema = Some(avg);
        let lr = schedule.lr_at(step);
        if task.log_every > 0 && step % task.log_every == 0 {
            let point = CurvePoint {
                step,
                total,
                terms: loss.to_map(),
                grad_norm: norm,
                grad_norm_ema: avg,
                lr,
            };
            if let Some(w) = hooks.log.as_deref_mut() {
                serde_json::to_writer(&mut *w, &point).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
            loss_curve.push(point);
        }
        if avg < task.grad_threshold {
            termination = Termination::GradThreshold;
            break;
        }
        previous.copy_from_slice(&params);
        rmsprop_step(&mut opt, &mut params, grad, lr);
        obj.set_params(&params);
        steps = step + 1;
        if task.eval_every > 0 && steps % task.eval_every == 0 {
            match obj.eval_metric() {
                Ok(value) => eval_curve.push(EvalPoint { step: steps, value }),
                // the update left the region where the frozen maps are finite
                Err(e) if is_non_finite(&e) => {
                    termination = Termination::Divergence;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if task.checkpoint_every > 0 && steps % task.checkpoint_every == 0 {
            if let Some(cb) = hooks.checkpoint.as_deref_mut() {
                cb(steps, &obj.trainable())?;
            }
        }
    }
    if termination == Termination::Divergence && steps > 0 {
        // the last update produced the non-finite or exploding state
        params.copy_from_slice(&previous);
        obj.set_params(&params);
        steps -= 1;
    }
    if eval_curve.last().is_some_and(|e| e.step != steps) {
        eval_curve.push(EvalPoint {
            step: steps,
            value: obj.eval_metric()?,
        });
    }
    if let Some(cb) = hooks.checkpoint.as_deref_mut() {
        cb(steps, &obj.trainable())?;
    }
    if obj.frozen_checksums() != frozen {
        return Err(OptimizeError::InvalidTask("a frozen map changed during training".into()));
    }
    let final_metrics = obj.metrics()?;
    let mut warnings = obj.warnings();
    if termination == Termination::Divergence {
        warnings.push(format!("loss diverged; kept the parameters of step {steps}"));
    }
    Ok(RunReport {
        task: obj.name().to_string(),
        steps,
        termination,
        initial_loss: initial_loss.unwrap_or(f64::NAN),
        final_loss,
        final_grad_norm_ema: ema.unwrap_or(f64::NAN),
        initial,
        final_metrics,
        loss_curve,
        eval_curve,
        warnings,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}
