//! Neural surface maps: small dense networks viewed as functions `R² -> Rⁿ`.
//!
//! Wiring for an architecture of `depth` affine layers:
//!
//! ```text
//! depth == 1 : y = W₀ p + b₀
//! otherwise  : x = act(W₀ p + b₀)                 (lift 2 -> width)
//!              x = x + act(Wᵢ x + bᵢ)             (hidden blocks, residual)
//!              x = act(Wᵢ x + bᵢ)                 (hidden blocks, plain)
//!              y = W_L x + b_L                    (projection width -> out)
//! input_skip : y[0..2] += p
//! ```
//!
//! Parameters live in one flat array, layer by layer, each layer storing its
//! row-major `out x in` weight matrix followed by its bias.

mod checkpoint;

pub use checkpoint::{load, load_expecting, save, Checkpoint, CheckpointMetadata, CHECKPOINT_MAGIC};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{sigmoid, softplus, AutodiffError, DualBatch, Real};

#[derive(Debug, Error)]
pub enum NeuralMapError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { found: String, expected: String },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint has output dimension {found}, expected {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("parameter array has {found} entries, architecture needs {expected}")]
    ParamCount { expected: usize, found: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Softplus,
    Relu,
    LeakyRelu,
}

const LEAKY_SLOPE: f64 = 0.01;

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Softplus => softplus(z),
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
        }
    }

    /// First and second derivative at `z`.
    #[inline]
    fn derivatives(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Softplus => {
                let s = sigmoid(z);
                (s, s * (1.0 - s))
            }
            Activation::Relu => (if z > 0.0 { 1.0 } else { 0.0 }, 0.0),
            Activation::LeakyRelu => (if z > 0.0 { 1.0 } else { LEAKY_SLOPE }, 0.0),
        }
    }

    fn apply_generic<T: Real>(self, z: T) -> T {
        match self {
            Activation::Softplus => z.softplus(),
            Activation::Relu => z.relu(),
            Activation::LeakyRelu => z.leaky_relu(LEAKY_SLOPE),
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

fn default_two() -> usize {
    2
}

/// Shape and wiring of a [`NeuralMap`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    #[serde(default = "default_two")]
    pub in_dim: usize,
    pub out_dim: usize,
    /// Number of affine layers.
    pub depth: usize,
    pub width: usize,
    #[serde(default = "default_true")]
    pub residual: bool,
    pub activation: Activation,
    /// Adds the input point to the first two outputs.
    #[serde(default)]
    pub input_skip: bool,
    /// Scale applied to the initial weights of the final layer.
    #[serde(default = "default_one")]
    pub output_scale: f64,
}

impl Architecture {
    /// Ten residual layers of 256 softplus units into R³.
    pub fn surface_default() -> Self {
        Architecture {
            in_dim: 2,
            out_dim: 3,
            depth: 10,
            width: 256,
            residual: true,
            activation: Activation::Softplus,
            input_skip: false,
            output_scale: 1.0,
        }
    }

    /// Four plain layers of 128 softplus units into R², initialized near
    /// the identity.
    pub fn warp_default() -> Self {
        Architecture {
            in_dim: 2,
            out_dim: 2,
            depth: 4,
            width: 128,
            residual: false,
            activation: Activation::Softplus,
            input_skip: true,
            output_scale: 0.01,
        }
    }

    /// Desk-scale surface network: four residual layers of 64 units.
    pub fn surface_small() -> Self {
        Architecture {
            depth: 4,
            width: 64,
            ..Self::surface_default()
        }
    }

    /// Desk-scale warp: three layers of 32 units, near-identity at init.
    pub fn warp_small() -> Self {
        Architecture {
            depth: 3,
            width: 32,
            ..Self::warp_default()
        }
    }

    pub fn validate(&self) -> Result<(), NeuralMapError> {
        let bad = |m: &str| Err(NeuralMapError::InvalidArchitecture(m.to_string()));
        if self.in_dim != 2 {
            return bad("input dimension must be 2");
        }
        if !(self.out_dim == 2 || self.out_dim == 3) {
            return bad("output dimension must be 2 or 3");
        }
        if self.depth == 0 {
            return bad("depth must be at least 1");
        }
        if self.width == 0 {
            return bad("width must be at least 1");
        }
        if !(self.output_scale.is_finite() && self.output_scale >= 0.0) {
            return bad("output_scale must be finite and non-negative");
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every affine layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        if self.depth == 1 {
            return vec![(self.in_dim, self.out_dim)];
        }
        let mut dims = vec![(self.in_dim, self.width)];
        dims.extend(std::iter::repeat_n((self.width, self.width), self.depth - 2));
        dims.push((self.width, self.out_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct LayerShape {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl LayerShape {
    fn weights<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.offset..self.offset + self.fan_in * self.fan_out]
    }

    fn bias<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.fan_in * self.fan_out;
        &params[start..start + self.fan_out]
    }

    fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }
}

/// A dense network representing one specific map `R² -> Rⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralMap {
    arch: Architecture,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
}

/// Activations recorded by [`NeuralMap::forward_dual`] for the reverse sweep.
#[derive(Clone, Debug)]
pub struct DualTrace {
    /// Input rows of every layer (`3 len x fan_in`).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation rows of every hidden layer (`3 len x fan_out`).
    pre: Vec<Vec<f64>>,
    len: usize,
}

/// Seeded build of a network with uniform Glorot initialization.
pub fn build(arch: &Architecture, seed: u64) -> Result<NeuralMap, NeuralMapError> {
    let mut map = NeuralMap::zeros(arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_layers = map.layers.len();
    for (l, layer) in map.layers.clone().iter().enumerate() {
        let bound = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
        let scale = if l + 1 == n_layers { arch.output_scale } else { 1.0 };
        for w in &mut map.params[layer.weight_range()] {
            *w = rng.random_range(-bound..bound) * scale;
        }
    }
    Ok(map)
}

impl NeuralMap {
    /// All-zero parameters.
    pub fn zeros(arch: &Architecture) -> Result<Self, NeuralMapError> {
        arch.validate()?;
        let mut offset = 0;
        let layers = arch
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let l = LayerShape {
                    fan_in,
                    fan_out,
                    offset,
                };
                offset += fan_in * fan_out + fan_out;
                l
            })
            .collect();
        Ok(NeuralMap {
            arch: arch.clone(),
            layers,
            params: vec![0.0; offset],
        })
    }

    pub fn from_params(arch: &Architecture, params: Vec<f64>) -> Result<Self, NeuralMapError> {
        let mut map = NeuralMap::zeros(arch)?;
        map.set_params(&params)?;
        Ok(map)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn out_dim(&self) -> usize {
        self.arch.out_dim
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), NeuralMapError> {
        if p.len() != self.params.len() {
            return Err(NeuralMapError::ParamCount {
                expected: self.params.len(),
                found: p.len(),
            });
        }
        self.params.copy_from_slice(p);
        Ok(())
    }

    /// Mutable weight matrix (row-major `fan_out x fan_in`) and bias of a layer.
    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let layer = self.layers[l];
        let (w, rest) = self.params[layer.offset..].split_at_mut(layer.fan_in * layer.fan_out);
        (w, &mut rest[..layer.fan_out])
    }

    /// FNV-1a over the parameter bytes; used to assert that frozen maps stay
    /// untouched.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for p in &self.params {
            for b in p.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    fn is_last(&self, l: usize) -> bool {
        l + 1 == self.layers.len()
    }

    fn is_residual_block(&self, l: usize) -> bool {
        self.arch.residual && l > 0 && !self.is_last(l)
    }

    /// Value of the map at a single point.
    pub fn evaluate_point(&self, p: [f64; 2]) -> Vec<f64> {
        let mut x = p.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let w = layer.weights(&self.params);
            let b = layer.bias(&self.params);
            let mut z: Vec<f64> = (0..layer.fan_out)
                .map(|o| dot(&x, &w[o * layer.fan_in..(o + 1) * layer.fan_in]) + b[o])
                .collect();
            if !self.is_last(l) {
                for v in &mut z {
                    *v = self.arch.activation.apply(*v);
                }
                if self.is_residual_block(l) {
                    for (v, xi) in z.iter_mut().zip(&x) {
                        *v += xi;
                    }
                }
            }
            x = z;
        }
        if self.arch.input_skip {
            x[0] += p[0];
            x[1] += p[1];
        }
        x
    }

    /// Values at a batch of points, order preserved.
    pub fn evaluate(&self, points: &[[f64; 2]]) -> Vec<Vec<f64>> {
        points.iter().map(|p| self.evaluate_point(*p)).collect()
    }

    /// Pushes a batch of dual inputs through the network. Output rows carry
    /// values and the input tangents pushed forward, i.e. `J · ṗ`.
    ///
    /// With `keep_trace` the activations needed by
    /// [`NeuralMap::backward_dual`] are returned.
    pub fn forward_dual(
        &self,
        input: &DualBatch,
        keep_trace: bool,
    ) -> Result<(DualBatch, Option<DualTrace>), AutodiffError> {
        if input.dim() != self.arch.in_dim {
            return Err(AutodiffError::InputDim(input.dim()));
        }
        let len = input.len();
        let rows = 3 * len;
        let act = self.arch.activation;
        let mut inputs = Vec::new();
        let mut pre = Vec::new();
        let mut x = input.data().to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = affine_forward(
                &x,
                rows,
                len,
                layer.weights(&self.params),
                layer.bias(&self.params),
                layer.fan_in,
                layer.fan_out,
            );
            if self.is_last(l) {
                if keep_trace {
                    inputs.push(std::mem::take(&mut x));
                }
                x = z;
            } else {
                let w = layer.fan_out;
                let mut a = vec![0.0; rows * w];
                for i in 0..len {
                    for o in 0..w {
                        let zv = z[i * w + o];
                        let (d1, _) = act.derivatives(zv);
                        a[i * w + o] = act.apply(zv);
                        a[(len + i) * w + o] = d1 * z[(len + i) * w + o];
                        a[(2 * len + i) * w + o] = d1 * z[(2 * len + i) * w + o];
                    }
                }
                if self.is_residual_block(l) {
                    for (ai, xi) in a.iter_mut().zip(&x) {
                        *ai += xi;
                    }
                }
                if keep_trace {
                    inputs.push(std::mem::replace(&mut x, a));
                    pre.push(std::mem::take(&mut z));
                } else {
                    x = a;
                }
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(AutodiffError::NonFiniteLayer { layer: l });
            }
        }
        let mut out = DualBatch::from_data(len, self.arch.out_dim, x);
        if self.arch.input_skip {
            for r in 0..rows {
                let src = &input.row(r)[..2];
                let (s0, s1) = (src[0], src[1]);
                let d = out.dim();
                let row = &mut out.data_mut()[r * d..r * d + 2];
                row[0] += s0;
                row[1] += s1;
            }
        }
        let trace = keep_trace.then_some(DualTrace { inputs, pre, len });
        Ok((out, trace))
    }

    /// Reverse sweep through a recorded dual forward pass.
    ///
    /// `out_adjoint` holds the adjoints of the output values and of both
    /// output tangent blocks. Parameter gradients are accumulated into
    /// `param_grad` when given; the adjoints of the dual input are returned.
    pub fn backward_dual(
        &self,
        trace: &DualTrace,
        out_adjoint: &DualBatch,
        mut param_grad: Option<&mut [f64]>,
    ) -> DualBatch {
        let len = trace.len;
        let rows = 3 * len;
        assert_eq!(out_adjoint.len(), len);
        assert_eq!(out_adjoint.dim(), self.arch.out_dim);
        if let Some(g) = param_grad.as_deref() {
            assert_eq!(g.len(), self.params.len());
        }
        let act = self.arch.activation;
        let mut g = out_adjoint.data().to_vec();
        let n_layers = self.layers.len();
        for l in (0..n_layers).rev() {
            let layer = self.layers[l];
            let fo = layer.fan_out;
            let zbar = if self.is_last(l) {
                std::mem::take(&mut g)
            } else {
                let z = &trace.pre[l];
                let mut zbar = vec![0.0; rows * fo];
                for i in 0..len {
                    for o in 0..fo {
                        let zv = z[i * fo + o];
                        let (d1, d2) = act.derivatives(zv);
                        let iu = (len + i) * fo + o;
                        let iv = (2 * len + i) * fo + o;
                        zbar[i * fo + o] =
                            g[i * fo + o] * d1 + d2 * (g[iu] * z[iu] + g[iv] * z[iv]);
                        zbar[iu] = g[iu] * d1;
                        zbar[iv] = g[iv] * d1;
                    }
                }
                zbar
            };
            let x = &trace.inputs[l];
            if let Some(grad) = param_grad.as_deref_mut() {
                affine_param_grad(&zbar, x, rows, len, layer, grad);
            }
            let mut xbar = affine_input_adjoint(&zbar, rows, layer.weights(&self.params), layer);
            if self.is_residual_block(l) {
                for (xb, gi) in xbar.iter_mut().zip(&g) {
                    *xb += gi;
                }
            }
            g = xbar;
        }
        let mut input_adj = DualBatch::from_data(len, self.arch.in_dim, g);
        if self.arch.input_skip {
            let od = self.arch.out_dim;
            for r in 0..rows {
                let src = &out_adjoint.data()[r * od..r * od + 2];
                let (s0, s1) = (src[0], src[1]);
                let row = &mut input_adj.data_mut()[r * 2..r * 2 + 2];
                row[0] += s0;
                row[1] += s1;
            }
        }
        input_adj
    }

    /// Forward pass over any scalar type, with parameters supplied as `T`.
    ///
    /// This is the slow reference path (every multiply is a scalar op); it
    /// lets tests differentiate a network through the generic tape.
    pub fn forward_generic<T: Real>(&self, params: &[T], p: [T; 2]) -> Vec<T> {
        assert_eq!(params.len(), self.params.len());
        let mut x: Vec<T> = p.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let w = &params[layer.weight_range()];
            let b = &params[layer.bias_range()];
            let mut z: Vec<T> = (0..layer.fan_out)
                .map(|o| {
                    let row = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
                    let mut acc = b[o];
                    for (wi, xi) in row.iter().zip(&x) {
                        acc = acc + *wi * *xi;
                    }
                    acc
                })
                .collect();
            if !self.is_last(l) {
                for v in &mut z {
                    *v = self.arch.activation.apply_generic(*v);
                }
                if self.is_residual_block(l) {
                    for (v, xi) in z.iter_mut().zip(&x) {
                        *v = *v + *xi;
                    }
                }
            }
            x = z;
        }
        if self.arch.input_skip {
            x[0] = x[0] + p[0];
            x[1] = x[1] + p[1];
        }
        x
    }
}

/// Dot product with a fixed four-lane summation order, so a row's result
/// never depends on the batch it is evaluated in.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `z = x Wᵀ (+ b on the first `len` rows)`.
fn affine_forward(
    x: &[f64],
    rows: usize,
    len: usize,
    w: &[f64],
    b: &[f64],
    fan_in: usize,
    fan_out: usize,
) -> Vec<f64> {
    let mut z = vec![0.0; rows * fan_out];
    for r in 0..rows {
        let xr = &x[r * fan_in..(r + 1) * fan_in];
        let zr = &mut z[r * fan_out..(r + 1) * fan_out];
        for (o, zo) in zr.iter_mut().enumerate() {
            *zo = dot(xr, &w[o * fan_in..(o + 1) * fan_in]);
        }
        if r < len {
            for (zo, bo) in zr.iter_mut().zip(b) {
                *zo += bo;
            }
        }
    }
    z
}

fn affine_param_grad(
    zbar: &[f64],
    x: &[f64],
    rows: usize,
    len: usize,
    layer: LayerShape,
    grad: &mut [f64],
) {
    let (fi, fo) = (layer.fan_in, layer.fan_out);
    let (gw, rest) = grad[layer.offset..].split_at_mut(fi * fo);
    let gb = &mut rest[..fo];
    for r in 0..rows {
        let xr = &x[r * fi..(r + 1) * fi];
        let zr = &zbar[r * fo..(r + 1) * fo];
        for (o, &zb) in zr.iter().enumerate() {
            if zb != 0.0 {
                axpy(zb, xr, &mut gw[o * fi..(o + 1) * fi]);
            }
        }
        if r < len {
            for (b, zb) in gb.iter_mut().zip(zr) {
                *b += zb;
            }
        }
    }
}

fn affine_input_adjoint(zbar: &[f64], rows: usize, w: &[f64], layer: LayerShape) -> Vec<f64> {
    let (fi, fo) = (layer.fan_in, layer.fan_out);
    let mut xbar = vec![0.0; rows * fi];
    for r in 0..rows {
        let zr = &zbar[r * fo..(r + 1) * fo];
        let xr = &mut xbar[r * fi..(r + 1) * fi];
        for (o, &zb) in zr.iter().enumerate() {
            if zb != 0.0 {
                axpy(zb, &w[o * fi..(o + 1) * fi], xr);
            }
        }
    }
    xbar
}

#[cfg(test)]
mod tests;
