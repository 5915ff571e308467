//! Differentiation engine.
//!
//! Two layers cooperate here:
//!
//! * [`Dual2`] carries a value together with its derivatives along the two
//!   canonical input directions of the domain. Evaluating a map on `Dual2`
//!   inputs yields the map's input-Jacobian exactly.
//! * [`Tape`] records scalar operations and sweeps them in reverse to obtain
//!   gradients. `Dual2<Var>` arithmetic is recorded like any other scalar
//!   arithmetic, so losses built from Jacobian entries differentiate exactly
//!   with respect to network parameters.
//!
//! Dense network layers do not go through the scalar tape; they use the
//! batched reverse-over-forward sweep in [`crate::neuralmap`], which is
//! cross-checked against the tape in the tests.

mod batch;
mod dual;
pub mod linalg;
mod tape;

pub use batch::DualBatch;
pub use dual::Dual2;
pub use tape::{Gradients, Tape, Var};

use thiserror::Error;

use crate::neuralmap::NeuralMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
    #[error("non-finite value produced by layer {layer}")]
    NonFiniteLayer { layer: usize },
    #[error("input point ({0}, {1}) is not finite")]
    NonFiniteInput(f64, f64),
    #[error("map expects input dimension 2, found {0}")]
    InputDim(usize),
}

/// Scalar arithmetic shared by `f64`, tape variables and dual numbers.
///
/// Formulas written against this trait are evaluated plainly, recorded for
/// reverse mode, or pushed forward along input directions, unchanged.
pub trait Real:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::Add<f64, Output = Self>
    + std::ops::Sub<f64, Output = Self>
    + std::ops::Mul<f64, Output = Self>
    + std::ops::Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn recip(self) -> Self;
    fn sigmoid(self) -> Self;
    fn softplus(self) -> Self;
    fn relu(self) -> Self;
    fn leaky_relu(self, slope: f64) -> Self;

    fn square(self) -> Self {
        self * self
    }

    /// A constant carried in the same representation as `self`.
    fn constant_like(self, c: f64) -> Self {
        self * 0.0 + c
    }
}

/// Numerically stable `ln(1 + exp(x))`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Real for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn sigmoid(self) -> Self {
        sigmoid(self)
    }
    fn softplus(self) -> Self {
        softplus(self)
    }
    fn relu(self) -> Self {
        self.max(0.0)
    }
    fn leaky_relu(self, slope: f64) -> Self {
        if self > 0.0 {
            self
        } else {
            slope * self
        }
    }
    fn constant_like(self, c: f64) -> Self {
        c
    }
}

/// Evaluates `map` at `p` and returns the image together with its exact
/// `n x 2` Jacobian (row `i` holds `[d y_i / du, d y_i / dv]`).
pub fn forward_with_jacobian(
    map: &NeuralMap,
    p: [f64; 2],
) -> Result<(Vec<f64>, Vec<[f64; 2]>), AutodiffError> {
    if !(p[0].is_finite() && p[1].is_finite()) {
        return Err(AutodiffError::NonFiniteInput(p[0], p[1]));
    }
    if map.arch().in_dim != 2 {
        return Err(AutodiffError::InputDim(map.arch().in_dim));
    }
    let input = DualBatch::seed_identity(&[p]);
    let (out, _) = map.forward_dual(&input, false)?;
    let image = out.value(0).to_vec();
    let jac = (0..out.dim())
        .map(|r| [out.tangent(0, 0)[r], out.tangent(1, 0)[r]])
        .collect();
    Ok((image, jac))
}

/// Gradient of a taped scalar `loss` with respect to `params`.
///
/// Parameters the loss does not depend on get a zero entry.
pub fn gradient(loss: Var<'_>, params: &[Var<'_>]) -> Result<Vec<f64>, AutodiffError> {
    if !loss.value().is_finite() {
        return Err(AutodiffError::NonFiniteLoss(loss.value()));
    }
    let grads = loss.backward();
    Ok(params.iter().map(|p| grads.wrt(p)).collect())
}

/// Euclidean norm of a gradient vector.
pub fn grad_norm(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_overflow_safe() {
        assert!((softplus(100.0) - 100.0).abs() < 1e-12);
        assert!(softplus(1000.0).is_finite());
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(softplus(-800.0) >= 0.0);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(grad_norm(&[3.0, 4.0]), 5.0);
        assert_eq!(grad_norm(&[0.0; 7]), 0.0);
    }

    #[test]
    fn gradient_of_quadratic_and_softplus() {
        let tape = Tape::new();
        let t = tape.var(3.0);
        assert_eq!(gradient(t * t, &[t]).unwrap(), vec![6.0]);

        let tape = Tape::new();
        let t = tape.var(0.0);
        let g = gradient(t.softplus(), &[t]).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn disconnected_parameter_gets_zero() {
        let tape = Tape::new();
        let a = tape.var(2.0);
        let b = tape.var(5.0);
        let g = gradient(a * a * 0.5, &[a, b]).unwrap();
        assert_eq!(g, vec![2.0, 0.0]);
    }

    #[test]
    fn nan_loss_is_an_error() {
        let tape = Tape::new();
        let a = tape.var(-1.0);
        assert!(matches!(
            gradient(a.sqrt(), &[a]),
            Err(AutodiffError::NonFiniteLoss(_))
        ));
    }
}
