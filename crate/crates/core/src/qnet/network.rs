use std::fmt::Debug;
use std::ops::AddAssign;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, ScalarOperand, Zip};
use num_traits::{Float, FromPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Scalar type the network can run in. Training uses `f32`; gradient checks use `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ndarray::LinalgScalar
    + ScalarOperand
    + AddAssign
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Number of actions (left, right, no-op).
pub const N_ACTIONS: usize = 3;

// Below this fraction of nonzero inputs the first layer is computed row-wise.
const SPARSE_DENSITY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

/// Fully connected layer with its Adagrad accumulators. Weights are `(in x out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
    pub(crate) acc_weights: Array2<T>,
    pub(crate) acc_bias: Array1<T>,
}

impl<T: Real> Dense<T> {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            weights: Array2::zeros((n_in, n_out)),
            bias: Array1::zeros(n_out),
            acc_weights: Array2::zeros((n_in, n_out)),
            acc_bias: Array1::zeros(n_out),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_out(&self) -> usize {
        self.weights.ncols()
    }

    pub fn accumulators(&self) -> (&Array2<T>, &Array1<T>) {
        (&self.acc_weights, &self.acc_bias)
    }

    fn affine(&self, x: ArrayView2<T>) -> Array2<T> {
        let nnz = x.iter().filter(|v| !v.is_zero()).count();
        if x.nrows() == 1 || (nnz as f64) < SPARSE_DENSITY * x.len() as f64 {
            let mut out = Array2::from_shape_fn((x.nrows(), self.n_out()), |(_, j)| self.bias[j]);
            for (xr, mut or) in x.rows().into_iter().zip(out.rows_mut()) {
                for (j, &v) in xr.iter().enumerate() {
                    if !v.is_zero() {
                        or.scaled_add(v, &self.weights.row(j));
                    }
                }
            }
            out
        } else {
            let mut out = x.dot(&self.weights);
            out += &self.bias;
            out
        }
    }
}

/// Weight gradient, either dense or restricted to the input rows that were active.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightGrad<T> {
    Dense(Array2<T>),
    Rows { rows: Vec<usize>, values: Array2<T> },
}

impl<T: Real> WeightGrad<T> {
    pub fn to_dense(&self, n_in: usize) -> Array2<T> {
        match self {
            Self::Dense(g) => g.clone(),
            Self::Rows { rows, values } => {
                let mut g = Array2::zeros((n_in, values.ncols()));
                for (r, v) in rows.iter().zip(values.rows()) {
                    g.row_mut(*r).assign(&v);
                }
                g
            }
        }
    }

    fn all_finite(&self) -> bool {
        match self {
            Self::Dense(g) => g.iter().all(|v| v.is_finite()),
            Self::Rows { values, .. } => values.iter().all(|v| v.is_finite()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T> {
    pub weights: WeightGrad<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrad<T>>,
}

/// Inputs and post-activation outputs of every layer, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    // activations[0] is the input; the last entry is the linear output.
    activations: Vec<Array2<T>>,
}

impl<T: Real> ForwardCache<T> {
    pub fn output(&self) -> &Array2<T> {
        self.activations.last().expect("non-empty cache")
    }
}

/// Dense Q-network: affine + ReLU for every hidden layer, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork<T = f32> {
    layers: Vec<Dense<T>>,
    activation: Activation,
}

impl<T: Real> QNetwork<T> {
    /// Symmetric uniform weights in `+-sqrt(3 / fan_in)`, zero biases, zero accumulators.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        let mut rng = stream_rng(seed, Stream::Initialization);
        for layer in &mut net.layers {
            let bound = (3.0 / layer.n_in() as f64).sqrt();
            layer
                .weights
                .mapv_inplace(|_| T::from_f64(rng.random_range(-bound..bound)).expect("representable"));
        }
        Ok(net)
    }

    /// `[S*N, S*N, S*N, 3]`: two hidden layers as wide as the input.
    pub fn for_input(n_features: usize, n_slices: usize, seed: u64) -> Result<Self> {
        let width = n_features * n_slices;
        Self::new(&[width, width, width, N_ACTIONS], seed)
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {layer_sizes:?}")));
        }
        Ok(Self {
            layers: layer_sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            activation: Activation::Relu,
        })
    }

    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.is_empty() || layers.windows(2).any(|w| w[0].n_out() != w[1].n_in()) {
            return Err(Error::Shape("layer shapes do not chain".into()));
        }
        Ok(Self {
            layers,
            activation: Activation::Relu,
        })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].n_in()];
        sizes.extend(self.layers.iter().map(Dense::n_out));
        sizes
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("non-empty").n_out()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &ArrayView2<T>) -> Result<()> {
        if x.ncols() != self.input_size() {
            return Err(Error::Shape(format!(
                "observation length {} does not match input layer {}",
                x.ncols(),
                self.input_size()
            )));
        }
        Ok(())
    }

    /// Q-values, `(batch x n_actions)`.
    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut h = self.layers[0].affine(x);
        if last > 0 {
            relu(&mut h);
        }
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            h = layer.affine(h.view());
            if i < last {
                relu(&mut h);
            }
        }
        Ok(h)
    }

    pub fn forward_one(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        let n = x.len();
        let x2 = x.into_shape_with_order((1, n)).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.forward(x2)?.row(0).to_owned())
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> Result<ForwardCache<T>> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut h = layer.affine(activations[i].view());
            if i < last {
                relu(&mut h);
            }
            activations.push(h);
        }
        Ok(ForwardCache { activations })
    }

    /// Backpropagates `grad_output = dL/dQ` through the cached pass.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_output: ArrayView2<T>) -> Result<Gradients<T>> {
        if grad_output.dim() != cache.output().dim() {
            return Err(Error::Shape("output gradient does not match forward pass".into()));
        }
        let mut delta = grad_output.to_owned();
        let mut grads = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[i];
            let bias = delta.sum_axis(Axis(0));
            let weights = if i == 0 {
                input_weight_grad(input.view(), delta.view())
            } else {
                WeightGrad::Dense(input.t().dot(&delta))
            };
            grads.push(LayerGrad { weights, bias });
            if i > 0 {
                let mut upstream = delta.dot(&layer.weights.t());
                Zip::from(&mut upstream).and(input).for_each(|d, &h| {
                    if h <= T::zero() {
                        *d = T::zero();
                    }
                });
                delta = upstream;
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Backpropagation fused with [`Self::adagrad_update`]. Weight gradients are
    /// formed a block of input rows at a time and applied immediately, so the
    /// full gradient is never materialized. Nothing is modified unless every
    /// backpropagated error is finite.
    pub fn backward_adagrad(&mut self, cache: &ForwardCache<T>, grad_output: ArrayView2<T>, lr: T, eps: T) -> Result<()> {
        if grad_output.dim() != cache.output().dim() {
            return Err(Error::Shape("output gradient does not match forward pass".into()));
        }
        let n = self.layers.len();
        let mut deltas = vec![grad_output.to_owned()];
        for i in (1..n).rev() {
            let delta = deltas.last().expect("non-empty");
            let mut upstream = delta.dot(&self.layers[i].weights.t());
            Zip::from(&mut upstream).and(&cache.activations[i]).for_each(|d, &h| {
                if h <= T::zero() {
                    *d = T::zero();
                }
            });
            deltas.push(upstream);
        }
        deltas.reverse();
        if let Some(i) = deltas.iter().position(|d| d.iter().any(|v| !v.is_finite())) {
            return Err(Error::Divergence(format!("non-finite gradient in layer {i}")));
        }
        let mut block = Array2::zeros((0, 0));
        for (i, (layer, delta)) in self.layers.iter_mut().zip(&deltas).enumerate() {
            let input = cache.activations[i].view();
            let bias = delta.sum_axis(Axis(0));
            adagrad_slice(
                layer.bias.as_slice_mut().expect("contiguous"),
                layer.acc_bias.as_slice_mut().expect("contiguous"),
                bias.as_slice().expect("contiguous"),
                lr,
                eps,
            );
            let active = active_rows(input);
            if (active.len() as f64) < SPARSE_DENSITY * input.ncols() as f64 {
                let mut g = Array1::zeros(layer.n_out());
                for &j in &active {
                    g.fill(T::zero());
                    for (b, &v) in input.column(j).iter().enumerate() {
                        if !v.is_zero() {
                            g.scaled_add(v, &delta.row(b));
                        }
                    }
                    adagrad_row(layer, j, g.as_slice().expect("contiguous"), lr, eps);
                }
            } else {
                let n_in = layer.n_in();
                let rows = GRAD_BLOCK_ROWS.min(n_in);
                if block.dim() != (rows, layer.n_out()) {
                    block = Array2::zeros((rows, layer.n_out()));
                }
                for r0 in (0..n_in).step_by(rows) {
                    let r1 = (r0 + rows).min(n_in);
                    let mut g = block.slice_mut(s![..r1 - r0, ..]);
                    ndarray::linalg::general_mat_mul(T::one(), &input.slice(s![.., r0..r1]).t(), delta, T::zero(), &mut g);
                    for (k, gr) in g.rows().into_iter().enumerate() {
                        adagrad_row(layer, r0 + k, gr.as_slice().expect("contiguous"), lr, eps);
                    }
                }
            }
        }
        Ok(())
    }

    /// Per parameter: `acc += g^2; p -= lr * g / (sqrt(acc) + eps)`.
    pub fn adagrad_update(&mut self, grads: &Gradients<T>, lr: T, eps: T) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Shape("gradient layer count mismatch".into()));
        }
        for (i, (layer, g)) in self.layers.iter().zip(&grads.layers).enumerate() {
            let shape_ok = g.bias.len() == layer.n_out()
                && match &g.weights {
                    WeightGrad::Dense(w) => w.dim() == layer.weights.dim(),
                    WeightGrad::Rows { rows, values } => {
                        values.ncols() == layer.n_out()
                            && values.nrows() == rows.len()
                            && rows.iter().all(|&r| r < layer.n_in())
                    }
                };
            if !shape_ok {
                return Err(Error::Shape(format!("gradient shape mismatch in layer {i}")));
            }
            if !(g.weights.all_finite() && g.bias.iter().all(|v| v.is_finite())) {
                return Err(Error::Divergence(format!("non-finite gradient in layer {i}")));
            }
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            match &g.weights {
                WeightGrad::Dense(gw) => adagrad(
                    layer.weights.view_mut(),
                    layer.acc_weights.view_mut(),
                    gw.view(),
                    lr,
                    eps,
                ),
                WeightGrad::Rows { rows, values } => {
                    for (&r, gr) in rows.iter().zip(values.rows()) {
                        adagrad(
                            layer.weights.slice_mut(s![r, ..]),
                            layer.acc_weights.slice_mut(s![r, ..]),
                            gr,
                            lr,
                            eps,
                        );
                    }
                }
            }
            adagrad(layer.bias.view_mut(), layer.acc_bias.view_mut(), g.bias.view(), lr, eps);
        }
        Ok(())
    }
}

// Input rows of the gradient computed together in the fused update.
const GRAD_BLOCK_ROWS: usize = 64;

fn adagrad_row<T: Real>(layer: &mut Dense<T>, row: usize, g: &[T], lr: T, eps: T) {
    let mut p = layer.weights.row_mut(row);
    let mut a = layer.acc_weights.row_mut(row);
    adagrad_slice(
        p.as_slice_mut().expect("contiguous"),
        a.as_slice_mut().expect("contiguous"),
        g,
        lr,
        eps,
    );
}

fn adagrad_slice<T: Real>(params: &mut [T], acc: &mut [T], grad: &[T], lr: T, eps: T) {
    for ((p, a), &g) in params.iter_mut().zip(acc.iter_mut()).zip(grad) {
        *a += g * g;
        *p = *p - lr * g / (a.sqrt() + eps);
    }
}

fn active_rows<T: Real>(x: ArrayView2<T>) -> Vec<usize> {
    let mut active = vec![false; x.ncols()];
    for row in x.rows() {
        for (flag, v) in active.iter_mut().zip(row) {
            *flag |= !v.is_zero();
        }
    }
    active.iter().enumerate().filter(|(_, &a)| a).map(|(j, _)| j).collect()
}

fn adagrad<T: Real, D: ndarray::Dimension>(
    params: ndarray::ArrayViewMut<T, D>,
    acc: ndarray::ArrayViewMut<T, D>,
    grad: ndarray::ArrayView<T, D>,
    lr: T,
    eps: T,
) {
    Zip::from(params).and(acc).and(grad).for_each(|p, a, &g| {
        *a += g * g;
        *p = *p - lr * g / (a.sqrt() + eps);
    });
}

fn relu<T: Real>(h: &mut Array2<T>) {
    h.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
}

// x^T delta, touching only the input rows that are nonzero somewhere in the batch
// when the batch is sparse.
fn input_weight_grad<T: Real>(x: ArrayView2<T>, delta: ArrayView2<T>) -> WeightGrad<T> {
    let active = active_rows(x);
    if (active.len() as f64) < SPARSE_DENSITY * x.ncols() as f64 {
        let mut values = Array2::zeros((active.len(), delta.ncols()));
        for (mut out, &j) in values.rows_mut().into_iter().zip(&active) {
            for (b, &v) in x.column(j).iter().enumerate() {
                if !v.is_zero() {
                    out.scaled_add(v, &delta.row(b));
                }
            }
        }
        WeightGrad::Rows { rows: active, values }
    } else {
        WeightGrad::Dense(x.t().dot(&delta))
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    #[test]
    fn catch_layer_sizes() {
        let net = QNetwork::<f32>::for_input(234, 5, 0).unwrap();
        assert_eq!(net.layer_sizes(), vec![1170, 1170, 1170, 3]);
        let net = QNetwork::<f32>::for_input(234, 1, 0).unwrap();
        assert_eq!(net.input_size(), 234);
    }

    #[test]
    fn same_seed_same_weights() {
        let a = QNetwork::<f32>::new(&[10, 8, 8, 3], 42).unwrap();
        let b = QNetwork::<f32>::new(&[10, 8, 8, 3], 42).unwrap();
        let c = QNetwork::<f32>::new(&[10, 8, 8, 3], 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = (3.0f32 / 10.0).sqrt();
        assert!(a.layers()[0].weights.iter().all(|w| w.abs() <= bound));
        assert!(a.layers().iter().all(|l| l.bias.iter().all(|b| *b == 0.0)));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::<f64>::zeros(&[4, 5, 5, 3]).unwrap();
        let q = net.forward(array![[1.0, -2.0, 3.0, 0.5]].view()).unwrap();
        assert!(q.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identical_rows_identical_outputs() {
        let net = QNetwork::<f64>::new(&[4, 6, 6, 3], 1).unwrap();
        let x = array![[0.1, 0.2, 0.0, 1.0], [0.1, 0.2, 0.0, 1.0]];
        let q = net.forward(x.view()).unwrap();
        assert_eq!(q.row(0), q.row(1));
    }

    #[test]
    fn rejects_wrong_width() {
        let net = QNetwork::<f64>::new(&[4, 6, 3], 1).unwrap();
        assert!(matches!(net.forward(array![[1.0, 2.0]].view()), Err(Error::Shape(_))));
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        let net = QNetwork::<f64>::new(&[40, 12, 12, 3], 5).unwrap();
        let mut sparse = Array2::<f64>::zeros((3, 40));
        sparse[[0, 3]] = 1.0;
        sparse[[1, 17]] = 0.5;
        sparse[[2, 3]] = -2.0;
        let layer = &net.layers()[0];
        let fast = layer.affine(sparse.view());
        let mut slow = sparse.dot(&layer.weights);
        slow += &layer.bias;
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let delta = Array2::from_shape_fn((3, 12), |(i, j)| (i as f64 - j as f64) * 0.1);
        let g = input_weight_grad(sparse.view(), delta.view());
        assert!(matches!(g, WeightGrad::Rows { .. }));
        let dense = sparse.t().dot(&delta);
        let got = g.to_dense(40);
        for (a, b) in got.iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn adagrad_first_and_second_steps() {
        let mut net = QNetwork::<f64>::zeros(&[1, 1]).unwrap();
        let grads = Gradients {
            layers: vec![LayerGrad {
                weights: WeightGrad::Dense(array![[1.0]]),
                bias: array![0.0],
            }],
        };
        net.adagrad_update(&grads, 0.01, 1e-8).unwrap();
        assert_eq!(net.layers()[0].weights[[0, 0]], -0.01 / (1.0 + 1e-8));
        assert_eq!(net.layers()[0].bias[0], 0.0);
        assert_eq!(net.layers()[0].acc_bias[0], 0.0);
        let before = net.layers()[0].weights[[0, 0]];
        net.adagrad_update(&grads, 0.01, 1e-8).unwrap();
        let step = before - net.layers()[0].weights[[0, 0]];
        assert_eq!(step, 0.01 / (2f64.sqrt() + 1e-8));
    }

    fn fused_matches_separate(sizes: &[usize], x: Array2<f64>) {
        let mut a = QNetwork::<f64>::new(sizes, 9).unwrap();
        let mut b = a.clone();
        let grad_out = Array2::from_shape_fn((x.nrows(), 3), |(i, j)| 0.3 * i as f64 - 0.2 * j as f64 + 0.05);
        for _ in 0..3 {
            let cache = a.forward_cached(x.view()).unwrap();
            let grads = a.backward(&cache, grad_out.view()).unwrap();
            a.adagrad_update(&grads, 0.01, 1e-8).unwrap();
            let cache = b.forward_cached(x.view()).unwrap();
            b.backward_adagrad(&cache, grad_out.view(), 0.01, 1e-8).unwrap();
        }
        for (la, lb) in a.layers().iter().zip(b.layers()) {
            for (p, q) in la.weights.iter().zip(&lb.weights) {
                assert!((p - q).abs() < 1e-12);
            }
            for (p, q) in la.acc_weights.iter().zip(&lb.acc_weights) {
                assert!((p - q).abs() < 1e-12);
            }
            assert_eq!(la.bias, lb.bias);
        }
    }

    #[test]
    fn fused_update_matches_backward_then_adagrad() {
        let dense = Array2::from_shape_fn((5, 150), |(i, j)| ((i * 7 + j) % 5) as f64 * 0.1 - 0.2);
        fused_matches_separate(&[150, 70, 70, 3], dense);
        let mut sparse = Array2::<f64>::zeros((4, 150));
        sparse[[0, 3]] = 1.0;
        sparse[[2, 90]] = 0.5;
        fused_matches_separate(&[150, 70, 70, 3], sparse);
    }

    #[test]
    fn single_row_forward_matches_batch() {
        let net = QNetwork::<f64>::new(&[30, 20, 20, 3], 4).unwrap();
        let x = Array2::from_shape_fn((2, 30), |(i, j)| (i + j) as f64 * 0.05);
        let batch = net.forward(x.view()).unwrap();
        let one = net.forward_one(x.row(1)).unwrap();
        for (a, b) in batch.row(1).iter().zip(&one) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn adagrad_rejects_non_finite() {
        let mut net = QNetwork::<f64>::zeros(&[1, 1]).unwrap();
        let grads = Gradients {
            layers: vec![LayerGrad {
                weights: WeightGrad::Dense(array![[f64::NAN]]),
                bias: array![0.0],
            }],
        };
        assert!(matches!(net.adagrad_update(&grads, 0.01, 1e-8), Err(Error::Divergence(_))));
        assert_eq!(net.layers()[0].weights[[0, 0]], 0.0);
    }
}
