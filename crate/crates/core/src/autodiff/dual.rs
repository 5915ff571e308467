use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Real;

/// A value with its derivatives along the two input axes of the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual2<T> {
    pub re: T,
    pub du: T,
    pub dv: T,
}

impl<T: Real> Dual2<T> {
    pub fn new(re: T, du: T, dv: T) -> Self {
        Dual2 { re, du, dv }
    }

    /// A quantity that does not vary over the domain.
    pub fn constant(re: T) -> Self {
        let z = re * 0.0;
        Dual2 { re, du: z, dv: z }
    }

    /// The input coordinates `(u, v)` seeded with unit tangents.
    pub fn seed(u: T, v: T) -> [Self; 2] {
        let zero = u * 0.0;
        let one = zero + 1.0;
        [
            Dual2 {
                re: u,
                du: one,
                dv: zero,
            },
            Dual2 {
                re: v,
                du: zero,
                dv: one,
            },
        ]
    }

    /// Applies a scalar function with known derivative `d` at `re`.
    fn chain(self, re: T, d: T) -> Self {
        Dual2 {
            re,
            du: self.du * d,
            dv: self.dv * d,
        }
    }
}

impl<T: Real> Add for Dual2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual2 {
            re: self.re + rhs.re,
            du: self.du + rhs.du,
            dv: self.dv + rhs.dv,
        }
    }
}

impl<T: Real> Sub for Dual2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual2 {
            re: self.re - rhs.re,
            du: self.du - rhs.du,
            dv: self.dv - rhs.dv,
        }
    }
}

impl<T: Real> Mul for Dual2<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Dual2 {
            re: self.re * rhs.re,
            du: self.du * rhs.re + self.re * rhs.du,
            dv: self.dv * rhs.re + self.re * rhs.dv,
        }
    }
}

impl<T: Real> Div for Dual2<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = rhs.re.recip();
        let q = self.re * inv;
        Dual2 {
            re: q,
            du: (self.du - q * rhs.du) * inv,
            dv: (self.dv - q * rhs.dv) * inv,
        }
    }
}

impl<T: Real> Neg for Dual2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual2 {
            re: -self.re,
            du: -self.du,
            dv: -self.dv,
        }
    }
}

impl<T: Real> Add<f64> for Dual2<T> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        Dual2 {
            re: self.re + rhs,
            ..self
        }
    }
}

impl<T: Real> Sub<f64> for Dual2<T> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        Dual2 {
            re: self.re - rhs,
            ..self
        }
    }
}

impl<T: Real> Mul<f64> for Dual2<T> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Dual2 {
            re: self.re * rhs,
            du: self.du * rhs,
            dv: self.dv * rhs,
        }
    }
}

impl<T: Real> Div<f64> for Dual2<T> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        Dual2 {
            re: self.re / rhs,
            du: self.du / rhs,
            dv: self.dv / rhs,
        }
    }
}

impl<T: Real> Real for Dual2<T> {
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), self.re.recip())
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, (s * 2.0).recip())
    }
    fn recip(self) -> Self {
        let r = self.re.recip();
        self.chain(r, -(r * r))
    }
    fn sigmoid(self) -> Self {
        let s = self.re.sigmoid();
        self.chain(s, s * (-s + 1.0))
    }
    fn softplus(self) -> Self {
        self.chain(self.re.softplus(), self.re.sigmoid())
    }
    fn relu(self) -> Self {
        let slope = if self.re.value() > 0.0 { 1.0 } else { 0.0 };
        Dual2 {
            re: self.re.relu(),
            du: self.du * slope,
            dv: self.dv * slope,
        }
    }
    fn leaky_relu(self, slope: f64) -> Self {
        let s = if self.re.value() > 0.0 { 1.0 } else { slope };
        Dual2 {
            re: self.re.leaky_relu(slope),
            du: self.du * s,
            dv: self.dv * s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_partials(f: impl Fn(f64, f64) -> f64, u: f64, v: f64) -> (f64, f64) {
        let h = 1e-5;
        (
            (f(u + h, v) - f(u - h, v)) / (2.0 * h),
            (f(u, v + h) - f(u, v - h)) / (2.0 * h),
        )
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    fn check<F>(f: F, u0: f64, v0: f64)
    where
        F: Fn(Dual2<f64>, Dual2<f64>) -> Dual2<f64>,
    {
        let [u, v] = Dual2::seed(u0, v0);
        let out = f(u, v);
        let plain = |a: f64, b: f64| {
            let [u, v] = Dual2::seed(a, b);
            f(u, v).re
        };
        let (du, dv) = fd_partials(plain, u0, v0);
        assert!(rel_err(out.du, du) < 1e-4, "du {} vs {}", out.du, du);
        assert!(rel_err(out.dv, dv) < 1e-4, "dv {} vs {}", out.dv, dv);
    }

    #[test]
    fn chain_rule_matches_finite_differences() {
        check(|u, v| u + v * 3.0, 0.2, 0.9);
        check(|u, v| u * v * v, 0.3, -1.1);
        check(|u, v| u / (v + 2.0), 0.6, 0.4);
        check(|u, v| (u * v).exp(), 0.5, 0.7);
        check(|u, v| (u * u + v * v + 1.0).ln(), 0.2, 0.1);
        check(|u, v| (u - v * 2.0).softplus(), 0.3, 0.6);
        check(|u, v| (u * 4.0 - v).sigmoid(), 0.3, 0.6);
        check(|u, v| (u * u + v).sqrt(), 0.3, 0.6);
        check(|u, v| (u - v).recip() * u, 0.9, 0.2);
    }

    #[test]
    fn dual_over_tape_gives_exact_mixed_derivative() {
        // d/dθ of (d/du sp(θ u))^2 = d/dθ (θ σ(θu))^2
        use crate::autodiff::Tape;
        let theta0 = 0.8;
        let u0 = 0.35;
        let tape = Tape::new();
        let theta = tape.var(theta0);
        let [u, _] = Dual2::seed(tape.var(u0), tape.var(0.0));
        let y = (u * Dual2::constant(theta)).softplus();
        let loss = y.du * y.du;
        let g = loss.backward().wrt(&theta);
        let inner = |t: f64| {
            let d = t * crate::autodiff::sigmoid(t * u0);
            d * d
        };
        let h = 1e-5;
        let fd = (inner(theta0 + h) - inner(theta0 - h)) / (2.0 * h);
        assert!(rel_err(g, fd) < 1e-6, "{g} vs {fd}");
    }
}
