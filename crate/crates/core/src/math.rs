//! Dense feed-forward building blocks: row-major matrices, layers with a
//! fixed activation, batched forward/backward passes, the element-mean MSE
//! loss and cosine similarity.
//!
//! Backpropagation is written out by hand for the plain stacked-dense family;
//! there is no general autodiff graph.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `rows × cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!("{} values for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Stacks equal-length rows. An empty slice yields a `0 × cols` matrix
    /// only through [`Matrix::zeros`]; here it yields `0 × 0`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(
                    "Matrix::from_rows",
                    format!("row length {cols}"),
                    format!("row {i} of length {}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and the output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Affine map `d_in → d_out` followed by an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `d_out × d_in`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::shape(
                "DenseLayer::new",
                format!("bias of length {}", weights.rows()),
                bias.len(),
            ));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(d_in: usize, d_out: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Matrix::zeros(d_out, d_in),
            bias: vec![0.0; d_out],
            activation,
        }
    }

    /// Glorot-uniform weights `U(-a, a)`, `a = sqrt(6 / (fan_in + fan_out))`,
    /// and zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        d_in: usize,
        d_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (d_in + d_out) as f64).sqrt();
        let data = (0..d_in * d_out)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        DenseLayer {
            weights: Matrix {
                rows: d_out,
                cols: d_in,
                data,
            },
            bias: vec![0.0; d_out],
            activation,
        }
    }

    pub fn d_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn d_out(&self) -> usize {
        self.weights.rows()
    }

    /// Returns `(pre_activation, output)` for a batch.
    fn apply(&self, input: &Matrix) -> (Matrix, Matrix) {
        let mut pre = Matrix::zeros(input.rows(), self.d_out());
        for b in 0..input.rows() {
            let x = input.row(b);
            let z = pre.row_mut(b);
            for (o, zo) in z.iter_mut().enumerate() {
                *zo = dot(self.weights.row(o), x) + self.bias[o];
            }
        }
        let mut out = pre.clone();
        if self.activation != Activation::Identity {
            for v in out.as_mut_slice() {
                *v = self.activation.apply(*v);
            }
        }
        (pre, out)
    }
}

/// Per-layer gradient, laid out like the layer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients for every parameter of a [`FeedForwardStack`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
    /// Gradient with respect to the stack input.
    pub input: Matrix,
}

impl Gradients {
    /// Flat parameter views in the same order as
    /// [`FeedForwardStack::params_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|g| [g.weights.as_slice(), g.bias.as_slice()])
            .collect()
    }
}

#[derive(Debug, Clone)]
struct ForwardCache {
    /// `inputs[l]` is the input to layer `l`.
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    outputs: Vec<Matrix>,
}

/// Ordered chain of dense layers.
#[derive(Debug, Clone)]
pub struct FeedForwardStack {
    layers: Vec<DenseLayer>,
    training: bool,
    cache: Option<ForwardCache>,
}

impl PartialEq for FeedForwardStack {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl FeedForwardStack {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "stack needs at least one layer".into(),
            ));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].d_out() != pair[1].d_in() {
                return Err(Error::shape(
                    "FeedForwardStack::new",
                    format!("layer {} d_in = {}", i + 1, pair[0].d_out()),
                    pair[1].d_in(),
                ));
            }
        }
        Ok(FeedForwardStack {
            layers,
            training: false,
            cache: None,
        })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn d_in(&self) -> usize {
        self.layers[0].d_in()
    }

    pub fn d_out(&self) -> usize {
        self.layers[self.layers.len() - 1].d_out()
    }

    pub fn set_training(&mut self, on: bool) {
        self.training = on;
        if !on {
            self.cache = None;
        }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.d_in() {
            return Err(Error::shape(
                "forward",
                format!("{} input columns", self.d_in()),
                batch.cols(),
            ));
        }
        if batch.rows() == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        Ok(())
    }

    /// Inference pass; never touches the training cache.
    pub fn infer(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut cur = self.layers[0].apply(batch).1;
        for layer in &self.layers[1..] {
            cur = layer.apply(&cur).1;
        }
        Ok(cur)
    }

    /// Forward pass. In training mode the per-layer activations are cached
    /// for the next [`backward`](Self::backward).
    pub fn forward(&mut self, batch: &Matrix) -> Result<Matrix> {
        if !self.training {
            return self.infer(batch);
        }
        self.check_input(batch)?;
        let n = self.layers.len();
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            outputs: Vec::with_capacity(n),
        };
        let mut cur = batch.clone();
        for layer in &self.layers {
            let (pre, out) = layer.apply(&cur);
            cache.inputs.push(cur);
            cache.pre.push(pre);
            cur = out.clone();
            cache.outputs.push(out);
        }
        self.cache = Some(cache);
        Ok(cur)
    }

    /// Backpropagates `loss_grad = ∂L/∂output` through the cached forward
    /// pass and returns `∂L/∂θ` for every parameter. Batch averaging is
    /// whatever `loss_grad` already carries (see [`mse_grad`]). The cache
    /// is consumed.
    pub fn backward(&mut self, loss_grad: &Matrix) -> Result<Gradients> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a cached forward pass".into()))?;
        let batch = cache.inputs[0].rows();
        if loss_grad.shape() != (batch, self.d_out()) {
            return Err(Error::shape(
                "backward",
                format!("{batch}x{}", self.d_out()),
                format!("{}x{}", loss_grad.rows(), loss_grad.cols()),
            ));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = loss_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pre[l];
            let out = &cache.outputs[l];
            let input = &cache.inputs[l];
            let mut delta = upstream;
            if layer.activation != Activation::Identity {
                for ((d, &z), &a) in delta
                    .as_mut_slice()
                    .iter_mut()
                    .zip(pre.as_slice())
                    .zip(out.as_slice())
                {
                    *d *= layer.activation.derivative(z, a);
                }
            }

            let mut gw = Matrix::zeros(layer.d_out(), layer.d_in());
            let mut gb = vec![0.0; layer.d_out()];
            let mut down = Matrix::zeros(batch, layer.d_in());
            for b in 0..batch {
                let d_row = delta.row(b);
                let x = input.row(b);
                for (o, &d) in d_row.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    axpy(d, x, gw.row_mut(o));
                    axpy(d, layer.weights.row(o), down.row_mut(b));
                }
            }
            grads.push(LayerGradient {
                weights: gw,
                bias: gb,
            });
            upstream = down;
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: upstream,
        })
    }

    /// Flat mutable parameter views: `[W0, b0, W1, b1, ...]`.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice().len(), l.bias.len()])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_sizes().iter().sum()
    }
}

/// Element-mean squared error `Σ (p − t)² / (B·d)`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<f64> {
    check_same_shape("mse_loss", pred, target)?;
    if pred.as_slice().is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.as_slice().len() as f64)
}

/// `∂ mse_loss / ∂ pred = 2 (p − t) / (B·d)`.
pub fn mse_grad(pred: &Matrix, target: &Matrix) -> Result<Matrix> {
    check_same_shape("mse_grad", pred, target)?;
    let scale = 2.0 / pred.as_slice().len().max(1) as f64;
    let data = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| scale * (p - t))
        .collect();
    Matrix::from_vec(pred.rows(), pred.cols(), data)
}

fn check_same_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("{}x{}", a.rows(), a.cols()),
            format!("{}x{}", b.rows(), b.cols()),
        ));
    }
    Ok(())
}

/// Dot product with eight independent accumulators so the loop vectorizes.
/// Summation order is fixed, so results are reproducible.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Cosine similarity. A zero-norm operand gives `0.0` rather than NaN so
/// that rankings stay total.
///
/// Panics if the lengths differ.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len(), "cosine: dimension mismatch");
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    dot(u, v) / (nu * nv)
}

/// Unit-length copy of `v`; zero vectors stay zero.
pub fn normalized(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    if n == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| x / n).collect()
}

/// Mean row-wise cosine between two equally shaped matrices.
pub fn mean_row_cosine(pred: &Matrix, target: &Matrix) -> Result<f64> {
    check_same_shape("mean_row_cosine", pred, target)?;
    if pred.rows() == 0 {
        return Err(Error::InvalidArgument("mean cosine over zero rows".into()));
    }
    let total: f64 = pred
        .iter_rows()
        .zip(target.iter_rows())
        .map(|(p, t)| cosine(p, t))
        .sum();
    Ok(total / pred.rows() as f64)
}
