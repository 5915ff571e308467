use super::OptimizerConfig;

/// Cosine annealing with warm restarts.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub lr: f64,
    pub eta_min: f64,
    pub t0: usize,
    pub t_mult: usize,
}

impl Schedule {
    pub fn from_config(c: &OptimizerConfig) -> Self {
        Schedule {
            lr: c.lr,
            eta_min: c.eta_min,
            t0: c.t0,
            t_mult: c.t_mult,
        }
    }

    /// Position inside the current period: `(t_cur, t_i)`.
    pub fn phase(&self, step: usize) -> (usize, usize) {
        let mut t = step;
        let mut period = self.t0.max(1);
        while t >= period {
            t -= period;
            period = period.saturating_mul(self.t_mult.max(1));
        }
        (t, period)
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        let (t, period) = self.phase(step);
        let cos = (std::f64::consts::PI * t as f64 / period as f64).cos();
        self.eta_min + 0.5 * (self.lr - self.eta_min) * (1.0 + cos)
    }
}

/// RMSProp state: running mean of squared gradients and a heavy-ball
/// velocity per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsProp {
    pub square_avg: Vec<f64>,
    pub velocity: Vec<f64>,
    pub smoothing: f64,
    pub momentum: f64,
    pub eps: f64,
}

impl RmsProp {
    pub fn new(n: usize, c: &OptimizerConfig) -> Self {
        RmsProp {
            square_avg: vec![0.0; n],
            velocity: vec![0.0; n],
            smoothing: c.smoothing,
            momentum: c.momentum,
            eps: c.eps,
        }
    }
}

/// One update `v ← αv + (1−α)g²`, `b ← μb + g/(√v + ε)`, `θ ← θ − lr·b`.
pub fn rmsprop_step(state: &mut RmsProp, params: &mut [f64], grad: &[f64], lr: f64) {
    assert_eq!(params.len(), grad.len());
    let a = state.smoothing;
    for (((p, g), v), b) in params
        .iter_mut()
        .zip(grad)
        .zip(state.square_avg.iter_mut())
        .zip(state.velocity.iter_mut())
    {
        *v = a * *v + (1.0 - a) * g * g;
        *b = state.momentum * *b + g / (v.sqrt() + state.eps);
        *p -= lr * *b;
    }
}
