//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! A [`DenseNet`] is a stack of affine layers. The configured activation is
//! applied after every hidden layer; the output layer is linear. All
//! parameters live in one flat `Vec<f64>` laid out layer by layer as
//! `[W_0 (row-major, out x in), b_0, W_1, b_1, ...]`, which lets optimizers
//! treat a network as a single parameter slice.
//!
//! Batched calls take row-major matrices with one sample per row.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::SeededRng;

/// Negative-side slope of [`Activation::LeakyRelu`].
pub const LEAKY_RELU_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_RELU_SLOPE * z
                }
            }
            Activation::Identity => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseNet {
    dims: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    #[serde(skip)]
    revision: u64,
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.activation == other.activation && self.params == other.params
    }
}

/// Intermediate values of one batched forward pass, consumed by [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    revision: u64,
    dims: Vec<usize>,
    /// Input to each layer (post-activation of the previous one).
    layer_inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    hidden_pre: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.layer_inputs[0].nrows()
    }
}

#[derive(Debug, Clone)]
pub struct Backward {
    /// Gradient with respect to every parameter, same layout as [`DenseNet::params`].
    pub params: Vec<f64>,
    /// Gradient with respect to each input row.
    pub input: Array2<f64>,
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Config(format!(
            "a network needs at least an input and an output width, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Config(format!("layer widths must be positive, got {dims:?}")));
    }
    Ok(())
}

impl DenseNet {
    /// He-uniform initialization: weights ~ U(-s, s) with `s = sqrt(6 / fan_in)`, biases zero.
    pub fn new(dims: &[usize], activation: Activation, rng: &mut SeededRng) -> Result<Self> {
        validate_dims(dims)?;
        let mut net = Self::zeros(dims, activation)?;
        for k in 0..net.num_layers() {
            let (fan_in, fan_out) = (dims[k], dims[k + 1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let (w_off, _) = net.offsets(k);
            for w in &mut net.params[w_off..w_off + fan_in * fan_out] {
                *w = rng.uniform(-limit, limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        validate_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            activation,
            params: vec![0.0; param_count(dims)],
            revision: 0,
        })
    }

    pub fn from_params(dims: &[usize], activation: Activation, params: Vec<f64>) -> Result<Self> {
        validate_dims(dims)?;
        check_len("parameter vector", param_count(dims), params.len())?;
        Ok(Self {
            dims: dims.to_vec(),
            activation,
            params,
            revision: 0,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access to the parameters. Invalidates outstanding [`ForwardCache`]s.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.revision += 1;
        &mut self.params
    }

    /// Offsets of the weight matrix and bias vector of layer `k`.
    fn offsets(&self, k: usize) -> (usize, usize) {
        let w_off = param_count(&self.dims[..=k]);
        (w_off, w_off + self.dims[k] * self.dims[k + 1])
    }

    pub fn layer(&self, k: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (fan_in, fan_out) = (self.dims[k], self.dims[k + 1]);
        let (w_off, b_off) = self.offsets(k);
        let w = ArrayView2::from_shape((fan_out, fan_in), &self.params[w_off..b_off])
            .expect("layer slice matches its shape");
        let b = ArrayView1::from(&self.params[b_off..b_off + fan_out]);
        (w, b)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", self.input_dim(), input.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_len("network input", self.input_dim(), inputs.ncols())?;
        let last = self.num_layers() - 1;
        let mut h = self.affine(0, inputs);
        for k in 1..=last {
            h.mapv_inplace(|z| self.activation.apply(z));
            h = self.affine(k, h.view());
        }
        Ok(h)
    }

    /// Forward pass that keeps what [`DenseNet::backward`] needs.
    pub fn forward_cached(&self, inputs: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        check_len("network input", self.input_dim(), inputs.ncols())?;
        let mut layer_inputs = Vec::with_capacity(self.num_layers());
        let mut hidden_pre = Vec::with_capacity(self.num_layers() - 1);
        let mut h = inputs.to_owned();
        for k in 0..self.num_layers() {
            let z = self.affine(k, h.view());
            layer_inputs.push(h);
            if k + 1 == self.num_layers() {
                let cache = ForwardCache {
                    revision: self.revision,
                    dims: self.dims.clone(),
                    layer_inputs,
                    hidden_pre,
                };
                return Ok((z, cache));
            }
            h = z.mapv(|v| self.activation.apply(v));
            hidden_pre.push(z);
        }
        unreachable!("validated networks have at least one layer")
    }

    fn affine(&self, k: usize, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let (w, b) = self.layer(k);
        let mut z = Array2::zeros((x.nrows(), w.nrows()));
        general_mat_mul(1.0, &x, &w.t(), 0.0, &mut z);
        z += &b;
        z
    }

    /// Reverse-mode pass: gradients of the scalar whose derivative at the
    /// outputs is `output_grad`, for the batch recorded in `cache`.
    pub fn backward(&self, cache: &ForwardCache, output_grad: ArrayView2<'_, f64>) -> Result<Backward> {
        if cache.dims != self.dims || cache.revision != self.revision {
            return Err(Error::Usage(
                "backward called with a forward cache from a different network state".into(),
            ));
        }
        if output_grad.nrows() != cache.batch_size() {
            return Err(Error::Usage(format!(
                "output gradient has {} rows but the cached forward pass had {}",
                output_grad.nrows(),
                cache.batch_size()
            )));
        }
        check_len("output gradient", self.output_dim(), output_grad.ncols())?;

        let mut grads = vec![0.0; self.num_params()];
        let mut delta = output_grad.to_owned();
        for k in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.dims[k], self.dims[k + 1]);
            let (w_off, b_off) = self.offsets(k);
            let (gw, gb) = grads[w_off..b_off + fan_out].split_at_mut(fan_in * fan_out);
            let mut gw = ArrayViewMut2::from_shape((fan_out, fan_in), gw).expect("weight slice");
            general_mat_mul(1.0, &delta.t(), &cache.layer_inputs[k], 0.0, &mut gw);
            for (g, s) in gb.iter_mut().zip(delta.sum_axis(Axis(0))) {
                *g = s;
            }
            let (w, _) = self.layer(k);
            let mut dx = delta.dot(&w);
            if k > 0 {
                let act = self.activation;
                dx.zip_mut_with(&cache.hidden_pre[k - 1], |d, &z| *d *= act.derivative(z));
            }
            delta = dx;
        }
        Ok(Backward {
            params: grads,
            input: delta,
        })
    }

    /// Single-sample forward + backward.
    pub fn gradient(&self, input: &[f64], output_grad: &[f64]) -> Result<Backward> {
        check_len("network input", self.input_dim(), input.len())?;
        check_len("output gradient", self.output_dim(), output_grad.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let g = ArrayView2::from_shape((1, output_grad.len()), output_grad).expect("row vector");
        let (_, cache) = self.forward_cached(x)?;
        self.backward(&cache, g)
    }
}

/// Concatenates row blocks horizontally: row `i` of the result is `a[i] ++ b[i]`.
pub fn concat_rows(rows: usize, parts: &[(&[f64], usize)]) -> Array2<f64> {
    let width: usize = parts.iter().map(|(_, w)| w).sum();
    let mut out = Array2::zeros((rows, width));
    for i in 0..rows {
        let mut col = 0;
        for (data, w) in parts {
            for j in 0..*w {
                out[[i, col + j]] = data[i * w + j];
            }
            col += w;
        }
    }
    out
}

pub fn to_row(values: &[f64]) -> Array1<f64> {
    Array1::from(values.to_vec())
}
