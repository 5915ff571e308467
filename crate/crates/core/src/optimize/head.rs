//! Per-sample loss heads: small formulas over a network's output values and
//! Jacobians, differentiated on a scalar tape to produce the adjoints the
//! batched reverse sweep starts from.

use super::objective::{LossBreakdown, Term};
use crate::autodiff::linalg::{self, Mat2, Mat3x2};
use crate::autodiff::{DualBatch, Real, Tape, Var};
use crate::composition::source_frame_inverse_generic;

/// Records `f` over `inputs`, adds every term's value to `loss` and writes
/// the adjoints of the (masked) term sum into `adj`.
pub(crate) fn run_head<'t, F>(
    tape: &'t Tape,
    inputs: &[f64],
    only: Option<Term>,
    adj: &mut [f64],
    loss: &mut LossBreakdown,
    f: F,
) where
    F: FnOnce(&[Var<'t>]) -> Vec<(Term, Var<'t>)>,
{
    let vars: Vec<Var<'t>> = inputs.iter().map(|x| tape.var(*x)).collect();
    let terms = f(&vars);
    let mut sum: Option<Var<'t>> = None;
    for (term, v) in &terms {
        loss.add(*term, v.value());
        if only.is_none_or(|o| o == *term) {
            sum = Some(match sum {
                Some(s) => s + *v,
                None => *v,
            });
        }
    }
    match sum {
        Some(s) => {
            let g = s.backward();
            for (a, v) in adj.iter_mut().zip(&vars) {
                *a = g.wrt(v);
            }
        }
        None => adj.fill(0.0),
    }
}

/// Appends the value and the row-major Jacobian of sample `i`.
pub(crate) fn gather(b: &DualBatch, i: usize, out: &mut Vec<f64>) {
    let d = b.dim();
    out.extend_from_slice(b.value(i));
    let (t0, t1) = (b.tangent(0, i), b.tangent(1, i));
    for r in 0..d {
        out.push(t0[r]);
        out.push(t1[r]);
    }
}

/// Appends only the row-major Jacobian of sample `i`.
pub(crate) fn gather_jacobian(b: &DualBatch, i: usize, out: &mut Vec<f64>) {
    let d = b.dim();
    let (t0, t1) = (b.tangent(0, i), b.tangent(1, i));
    for r in 0..d {
        out.push(t0[r]);
        out.push(t1[r]);
    }
}

/// Adds value and Jacobian adjoints laid out as by [`gather`].
pub(crate) fn scatter(b: &mut DualBatch, i: usize, adj: &[f64]) {
    let d = b.dim();
    for (r, a) in adj[..d].iter().enumerate() {
        b.value_mut(i)[r] += a;
    }
    scatter_jacobian(b, i, &adj[d..]);
}

/// Adds Jacobian adjoints laid out as by [`gather_jacobian`].
pub(crate) fn scatter_jacobian(b: &mut DualBatch, i: usize, adj: &[f64]) {
    let d = b.dim();
    for r in 0..d {
        b.tangent_mut(0, i)[r] += adj[2 * r];
        b.tangent_mut(1, i)[r] += adj[2 * r + 1];
    }
}

pub(crate) fn mat<T: Copy, const N: usize>(v: &[T]) -> [[T; 2]; N] {
    std::array::from_fn(|r| [v[2 * r], v[2 * r + 1]])
}

/// `J̃ = J · A` for a constant 2x2 factor `A`.
pub(crate) fn times_const<'t, const N: usize>(j: &[[Var<'t>; 2]; N], a: &Mat2<f64>) -> [[Var<'t>; 2]; N] {
    std::array::from_fn(|r| {
        std::array::from_fn(|c| j[r][0] * a[0][c] + j[r][1] * a[1][c])
    })
}

/// Metric of the map between two parameterized surfaces, both given by
/// their (variable) Jacobians over the same domain point.
pub(crate) fn pair_metric<T: Real>(j_src: &Mat3x2<T>, j_dst: &Mat3x2<T>) -> Mat2<T> {
    let a = source_frame_inverse_generic(j_src);
    let j = linalg::matmul(j_dst, &a);
    linalg::metric(&j)
}
