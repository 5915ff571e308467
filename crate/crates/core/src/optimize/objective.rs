use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Metrics, OptimizeError};
use crate::autodiff::Var;
use crate::domain::Domain;
use crate::energies::MCEstimate;
use crate::neuralmap::NeuralMap;

/// One additive term of an objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    /// Squared position error of an overfitted surface.
    Position,
    /// Weighted squared normal error of an overfitted surface.
    Normal,
    Distortion,
    Boundary,
    Injectivity,
    Keypoint,
}

pub(crate) const TERM_COUNT: usize = 6;

impl Term {
    pub const ALL: [Term; TERM_COUNT] = [
        Term::Position,
        Term::Normal,
        Term::Distortion,
        Term::Boundary,
        Term::Injectivity,
        Term::Keypoint,
    ];
}

/// Weighted term values; the total is their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    values: [f64; TERM_COUNT],
    present: [bool; TERM_COUNT],
}

impl LossBreakdown {
    pub fn add(&mut self, term: Term, v: f64) {
        self.values[term as usize] += v;
        self.present[term as usize] = true;
    }

    pub fn get(&self, term: Term) -> Option<f64> {
        self.present[term as usize].then_some(self.values[term as usize])
    }

    pub fn total(&self) -> f64 {
        Term::ALL.iter().filter_map(|t| self.get(*t)).sum()
    }

    pub fn merge(&mut self, other: &LossBreakdown) {
        for t in Term::ALL {
            if let Some(v) = other.get(t) {
                self.add(t, v);
            }
        }
    }

    pub fn to_map(&self) -> BTreeMap<Term, f64> {
        Term::ALL.iter().filter_map(|t| self.get(*t).map(|v| (*t, v))).collect()
    }
}

/// A differentiable training objective over the concatenated parameters
/// of its trainable maps.
pub trait Objective: Sync {
    type Batch;

    fn name(&self) -> &'static str;

    fn params(&self) -> Vec<f64>;

    fn set_params(&mut self, p: &[f64]);

    /// Draws the samples of one step.
    fn draw(&self, rng: &mut ChaCha8Rng) -> Self::Batch;

    /// Loss terms and the gradient of their sum on `batch`. With `only`,
    /// every term is still reported but only that one is differentiated.
    fn evaluate(&self, batch: &Self::Batch, only: Option<Term>) -> Result<(LossBreakdown, Vec<f64>), OptimizeError>;

    /// Scalar tracked on the held-out set during training.
    fn eval_metric(&self) -> Result<f64, OptimizeError>;

    /// Held-out statistics for the report.
    fn metrics(&self) -> Result<Metrics, OptimizeError>;

    /// The trainable maps, named, for checkpoints.
    fn trainable(&self) -> Vec<(String, NeuralMap)>;

    /// Checksums of the maps that must stay untouched by training.
    fn frozen_checksums(&self) -> Vec<u64> {
        Vec::new()
    }

    /// Non-fatal findings about the final state.
    fn warnings(&self) -> Vec<String> {
        Vec::new()
    }
}

/// Partial result of one work unit.
pub(crate) struct Partial {
    pub loss: LossBreakdown,
    pub grad: Vec<f64>,
    pub valid: usize,
}

impl Partial {
    pub fn new(n: usize) -> Self {
        Partial {
            loss: LossBreakdown::default(),
            grad: vec![0.0; n],
            valid: 0,
        }
    }

    /// Adds `other` (in call order, which fixes the rounding).
    pub fn absorb(&mut self, other: Partial) {
        self.loss.merge(&other.loss);
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
        self.valid += other.valid;
    }
}

/// Evaluates `f` on fixed-size chunks in parallel and sums the results in
/// chunk order.
pub(crate) fn reduce_chunks<T, F>(items: &[T], chunk: usize, n_params: usize, f: F) -> Result<Partial, OptimizeError>
where
    T: Sync,
    F: Fn(&[T]) -> Result<Partial, OptimizeError> + Sync,
{
    let parts: Vec<Result<Partial, OptimizeError>> = items.par_chunks(chunk.max(1)).map(&f).collect();
    let mut total = Partial::new(n_params);
    for p in parts {
        total.absorb(p?);
    }
    Ok(total)
}

/// Maps `f` over fixed-size chunks in parallel, concatenating in order.
pub(crate) fn map_chunks<T, U, F>(items: &[T], chunk: usize, f: F) -> Result<Vec<U>, OptimizeError>
where
    T: Sync,
    U: Send,
    F: Fn(&[T]) -> Result<Vec<U>, OptimizeError> + Sync,
{
    let parts: Vec<Result<Vec<U>, OptimizeError>> = items.par_chunks(chunk.max(1)).map(&f).collect();
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Regular triangulation of the domain used to count flips when no mesh is
/// given: `(faces, vertices)`, counter-clockwise. For the disk only
/// triangles with all corners inside are kept.
pub fn grid_mesh(domain: Domain, n: usize) -> (Vec<[usize; 3]>, Vec<[f64; 2]>) {
    let (lo, span) = match domain {
        Domain::UnitSquare => (0.0, 1.0),
        Domain::UnitDisk => (-1.0, 2.0),
    };
    let mut pts = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            pts.push([lo + span * i as f64 / n as f64, lo + span * j as f64 / n as f64]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            for f in [
                [id(i, j), id(i + 1, j), id(i + 1, j + 1)],
                [id(i, j), id(i + 1, j + 1), id(i, j + 1)],
            ] {
                if f.iter().all(|&v| domain.contains(pts[v])) {
                    faces.push(f);
                }
            }
        }
    }
    (faces, pts)
}

/// Median and mean of the finite values (NaN marks skipped samples).
pub(crate) fn density_stats(values: Vec<f64>) -> Result<(f64, f64), OptimizeError> {
    let est = MCEstimate::from_densities(values, true)?;
    Ok((est.median(), est.mean))
}

pub(crate) fn sum_vars<'t>(mut it: impl Iterator<Item = Var<'t>>) -> Var<'t> {
    let first = it.next().expect("at least one term");
    it.fold(first, |a, b| a + b)
}

/// `n` uniform interior points of the domain.
pub(crate) fn uniform_points(domain: Domain, n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| domain.sample_interior(&mut rng)).collect()
}

/// Draws `n` items from `pool` with replacement.
pub(crate) fn draw_from<T: Copy>(pool: &[T], n: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    (0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

/// Seed offset of held-out evaluation sets, so they never coincide with a
/// training pool drawn from the same task seed.
pub(crate) const EVAL_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
