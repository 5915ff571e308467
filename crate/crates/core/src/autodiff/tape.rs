use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Real;

/// One recorded operation: up to two parents with their local partials.
#[derive(Clone, Copy, Debug)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

/// Append-only record of scalar operations for reverse-mode sweeps.
///
/// Leaves are created with [`Tape::var`]; every operation on [`Var`]s
/// pushes one node holding its parents and the local partial derivatives.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape {
            nodes: RefCell::new(Vec::with_capacity(n)),
        }
    }

    /// Creates a leaf variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let idx = self.push(Node {
            parents: [0, 0],
            partials: [0.0, 0.0],
        });
        Var {
            tape: self,
            idx,
            val: value,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every recorded node so the allocation can be reused.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len() as u32;
        nodes.push(node);
        idx
    }

    fn unary(&self, a: u32, da: f64, val: f64) -> Var<'_> {
        let idx = self.push(Node {
            parents: [a, a],
            partials: [da, 0.0],
        });
        Var {
            tape: self,
            idx,
            val,
        }
    }

    fn binary(&self, a: u32, da: f64, b: u32, db: f64, val: f64) -> Var<'_> {
        let idx = self.push(Node {
            parents: [a, b],
            partials: [da, db],
        });
        Var {
            tape: self,
            idx,
            val,
        }
    }
}

/// A scalar recorded on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

/// Adjoints of every node on a tape with respect to one output.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    pub fn wrt(&self, v: &Var<'_>) -> f64 {
        self.adjoints[v.idx as usize]
    }
}

impl<'t> Var<'t> {
    pub fn index(&self) -> usize {
        self.idx as usize
    }

    /// Reverse sweep from this variable (seed adjoint 1).
    pub fn backward(&self) -> Gradients {
        let nodes = self.tape.nodes.borrow();
        let mut adjoints = vec![0.0; self.idx as usize + 1];
        adjoints[self.idx as usize] = 1.0;
        for i in (0..=self.idx as usize).rev() {
            let adj = adjoints[i];
            if adj == 0.0 {
                continue;
            }
            let node = nodes[i];
            for k in 0..2 {
                let d = node.partials[k];
                if d != 0.0 {
                    adjoints[node.parents[k] as usize] += adj * d;
                }
            }
        }
        adjoints.resize(nodes.len(), 0.0);
        Gradients { adjoints }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.tape
            .binary(self.idx, 1.0, rhs.idx, 1.0, self.val + rhs.val)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.tape
            .binary(self.idx, 1.0, rhs.idx, -1.0, self.val - rhs.val)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.tape
            .binary(self.idx, rhs.val, rhs.idx, self.val, self.val * rhs.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let q = self.val / rhs.val;
        self.tape
            .binary(self.idx, 1.0 / rhs.val, rhs.idx, -q / rhs.val, q)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.unary(self.idx, -1.0, -self.val)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.tape.unary(self.idx, 1.0, self.val + rhs)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.tape.unary(self.idx, 1.0, self.val - rhs)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.tape.unary(self.idx, rhs, self.val * rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.tape.unary(self.idx, 1.0 / rhs, self.val / rhs)
    }
}

impl Real for Var<'_> {
    fn value(&self) -> f64 {
        self.val
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.tape.unary(self.idx, e, e)
    }
    fn ln(self) -> Self {
        self.tape.unary(self.idx, 1.0 / self.val, self.val.ln())
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.tape.unary(self.idx, 0.5 / s, s)
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.val;
        self.tape.unary(self.idx, -r * r, r)
    }
    fn sigmoid(self) -> Self {
        let s = super::sigmoid(self.val);
        self.tape.unary(self.idx, s * (1.0 - s), s)
    }
    fn softplus(self) -> Self {
        self.tape.unary(
            self.idx,
            super::sigmoid(self.val),
            super::softplus(self.val),
        )
    }
    fn relu(self) -> Self {
        if self.val > 0.0 {
            self.tape.unary(self.idx, 1.0, self.val)
        } else {
            self.tape.unary(self.idx, 0.0, 0.0)
        }
    }
    fn leaky_relu(self, slope: f64) -> Self {
        if self.val > 0.0 {
            self.tape.unary(self.idx, 1.0, self.val)
        } else {
            self.tape.unary(self.idx, slope, slope * self.val)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_difference(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn every_primitive_matches_central_differences() {
        type Case = (&'static str, f64, fn(Var<'_>) -> Var<'_>, fn(f64) -> f64);
        let cases: Vec<Case> = vec![
            ("exp", 0.7, |x| x.exp(), f64::exp),
            ("ln", 1.3, |x| x.ln(), f64::ln),
            ("sqrt", 2.1, |x| x.sqrt(), f64::sqrt),
            ("recip", -1.7, |x| x.recip(), |x| 1.0 / x),
            ("sigmoid", 0.4, |x| x.sigmoid(), crate::autodiff::sigmoid),
            ("softplus", -0.9, |x| x.softplus(), crate::autodiff::softplus),
            ("relu", 0.3, |x| x.relu(), |x| x.max(0.0)),
            ("leaky", -0.3, |x| x.leaky_relu(0.01), |x| {
                if x > 0.0 {
                    x
                } else {
                    0.01 * x
                }
            }),
            ("mul", 1.9, |x| x * x * 3.0, |x| x * x * 3.0),
            ("div", 0.8, |x| (x + 2.0) / (x * x + 1.0), |x| {
                (x + 2.0) / (x * x + 1.0)
            }),
            ("sub", 0.8, |x| (x - 2.0) - x * x / 4.0, |x| {
                (x - 2.0) - x * x / 4.0
            }),
            ("neg", 0.8, |x| -(x.exp()) + x, |x| -x.exp() + x),
        ];
        for (name, x0, taped, plain) in cases {
            let tape = Tape::new();
            let x = tape.var(x0);
            let y = taped(x);
            assert_eq!(y.value(), plain(x0), "{name} value");
            let g = y.backward().wrt(&x);
            let fd = central_difference(plain, x0);
            assert!(rel_err(g, fd) < 1e-4, "{name}: {g} vs {fd}");
        }
    }

    #[test]
    fn shared_subexpressions_accumulate() {
        let tape = Tape::new();
        let x = tape.var(1.5);
        let y = tape.var(-0.5);
        let s = x * y;
        let f = s * s + s.exp() * x;
        let g = f.backward();
        let fx = |x: f64, y: f64| (x * y) * (x * y) + (x * y).exp() * x;
        let dx = central_difference(|t| fx(t, -0.5), 1.5);
        let dy = central_difference(|t| fx(1.5, t), -0.5);
        assert!(rel_err(g.wrt(&x), dx) < 1e-6);
        assert!(rel_err(g.wrt(&y), dy) < 1e-6);
    }
}
