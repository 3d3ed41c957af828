//! Mixture density generator: (condition, latent) to Gaussian or Laplace mixture parameters.
//!
//! The network emits one raw row per input, laid out as
//! `[logits (I) | means (I * d_x) | scale raws (S)]` where `S` depends on the
//! [`NoiseModel`]. [`MixtureLayout`] decodes that row and maps gradients back
//! onto it.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::datasets::Sample;
use crate::error::{check_len, Error, Result};
use crate::nn::{Activation, DenseNet};
use crate::rng::SeededRng;

/// Lower bound added to every learned scale.
pub const SCALE_FLOOR: f64 = 1e-6;
/// Scale of every learned mixture component at initialization (before the
/// hidden-layer contribution).
pub const INITIAL_SCALE: f64 = 0.04;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// One learned scale per component and dimension.
    Diagonal,
    /// One learned scale per component.
    Isotropic,
    /// One learned scale shared by all components.
    IsotropicAcrossClusters,
    /// Constant standard deviation.
    Fixed(f64),
    /// Laplace components with per-dimension learned scales.
    LaplaceDiagonal,
}

impl NoiseModel {
    /// The seven configurations of the noise ablation, in table order.
    pub const ABLATION: [NoiseModel; 7] = [
        NoiseModel::Diagonal,
        NoiseModel::Isotropic,
        NoiseModel::IsotropicAcrossClusters,
        NoiseModel::Fixed(1e-3),
        NoiseModel::Fixed(1e-2),
        NoiseModel::Fixed(1e-1),
        NoiseModel::LaplaceDiagonal,
    ];

    pub fn scale_params(self, components: usize, dim: usize) -> usize {
        match self {
            NoiseModel::Diagonal | NoiseModel::LaplaceDiagonal => components * dim,
            NoiseModel::Isotropic => components,
            NoiseModel::IsotropicAcrossClusters => 1,
            NoiseModel::Fixed(_) => 0,
        }
    }

    pub fn is_laplace(self) -> bool {
        matches!(self, NoiseModel::LaplaceDiagonal)
    }

    pub fn validate(self) -> Result<()> {
        match self {
            NoiseModel::Fixed(level) if !(level.is_finite() && level > 0.0) => {
                Err(Error::Config(format!("fixed noise level must be positive, got {level}")))
            }
            _ => Ok(()),
        }
    }

    /// Index into the scale raws used by component `i`, dimension `d`.
    fn scale_index(self, i: usize, d: usize, dim: usize) -> Option<usize> {
        match self {
            NoiseModel::Diagonal | NoiseModel::LaplaceDiagonal => Some(i * dim + d),
            NoiseModel::Isotropic => Some(i),
            NoiseModel::IsotropicAcrossClusters => Some(0),
            NoiseModel::Fixed(_) => None,
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::Diagonal => f.write_str("diagonal"),
            NoiseModel::Isotropic => f.write_str("isotropic"),
            NoiseModel::IsotropicAcrossClusters => f.write_str("isotropic_across_clusters"),
            NoiseModel::Fixed(level) => write!(f, "fixed:{level:e}"),
            NoiseModel::LaplaceDiagonal => f.write_str("laplace_diagonal"),
        }
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    /// Accepts the snake_case names and `fixed:<level>`.
    fn from_str(s: &str) -> Result<Self> {
        let noise = match s {
            "diagonal" => NoiseModel::Diagonal,
            "isotropic" => NoiseModel::Isotropic,
            "isotropic_across_clusters" => NoiseModel::IsotropicAcrossClusters,
            "laplace_diagonal" | "laplace" => NoiseModel::LaplaceDiagonal,
            other => {
                let level = other
                    .strip_prefix("fixed:")
                    .or_else(|| other.strip_prefix("fixed_"))
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Usage(format!("unknown noise model `{other}`")))?;
                NoiseModel::Fixed(level)
            }
        };
        noise.validate()?;
        Ok(noise)
    }
}

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

/// `ln sum exp(v)`, shifted by the maximum. Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(values: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(values);
    values.iter().map(|v| (v - lse).exp()).collect()
}

/// Mixture parameters for one condition. Scales are stored expanded, one per component and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub dim: usize,
    pub noise: NoiseModel,
}

/// One reparameterized mixture draw: `x = mean[component] + scale[component] * eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDraw {
    pub component: usize,
    pub eps: Vec<f64>,
    pub x: Vec<f64>,
}

impl GmmParams {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn mean(&self, i: usize) -> &[f64] {
        &self.means[i * self.dim..(i + 1) * self.dim]
    }

    pub fn scale(&self, i: usize) -> &[f64] {
        &self.scales[i * self.dim..(i + 1) * self.dim]
    }

    pub fn log_component_density(&self, i: usize, x: &[f64]) -> f64 {
        let (mu, s) = (self.mean(i), self.scale(i));
        if self.noise.is_laplace() {
            x.iter()
                .zip(mu)
                .zip(s)
                .map(|((x, m), b)| -(2.0 * b).ln() - (x - m).abs() / b)
                .sum()
        } else {
            x.iter()
                .zip(mu)
                .zip(s)
                .map(|((x, m), s)| {
                    let u = (x - m) / s;
                    -HALF_LN_2PI - s.ln() - 0.5 * u * u
                })
                .sum()
        }
    }

    fn joint_log_terms(&self, x: &[f64]) -> Vec<f64> {
        (0..self.components())
            .map(|i| self.weights[i].ln() + self.log_component_density(i, x))
            .collect()
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_len("mixture target", self.dim, x.len())?;
        Ok(log_sum_exp(&self.joint_log_terms(x)))
    }

    /// Posterior component probabilities given `x`.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("mixture target", self.dim, x.len())?;
        Ok(softmax(&self.joint_log_terms(x)))
    }

    pub fn draw(&self, rng: &mut SeededRng) -> MixtureDraw {
        let component = rng.categorical(&self.weights);
        let eps: Vec<f64> = (0..self.dim)
            .map(|_| if self.noise.is_laplace() { rng.laplace() } else { rng.normal() })
            .collect();
        let x = self.reparameterize(component, &eps);
        MixtureDraw { component, eps, x }
    }

    pub fn reparameterize(&self, component: usize, eps: &[f64]) -> Vec<f64> {
        self.mean(component)
            .iter()
            .zip(self.scale(component))
            .zip(eps)
            .map(|((m, s), e)| m + s * e)
            .collect()
    }
}

pub fn gmm_sample(params: &GmmParams, rng: &mut SeededRng) -> Vec<f64> {
    params.draw(rng).x
}

pub fn gmm_nll(params: &GmmParams, x: &[f64]) -> Result<f64> {
    Ok(-params.log_density(x)?)
}

/// Shape of a mixture head and the decoding of its raw output row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureLayout {
    pub components: usize,
    pub dim: usize,
    pub noise: NoiseModel,
    pub temperature: f64,
}

impl MixtureLayout {
    pub fn new(components: usize, dim: usize, noise: NoiseModel) -> Result<Self> {
        if components == 0 || dim == 0 {
            return Err(Error::Config(format!(
                "mixture needs at least one component and dimension, got {components} x {dim}"
            )));
        }
        noise.validate()?;
        Ok(Self {
            components,
            dim,
            noise,
            temperature: 1.0,
        })
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn raw_len(&self) -> usize {
        self.components + self.components * self.dim + self.noise.scale_params(self.components, self.dim)
    }

    fn means_offset(&self) -> usize {
        self.components
    }

    fn scales_offset(&self) -> usize {
        self.components * (1 + self.dim)
    }

    pub fn decode(&self, raw: &[f64]) -> Result<GmmParams> {
        check_len("mixture head", self.raw_len(), raw.len())?;
        let (i_n, dim) = (self.components, self.dim);
        let logits: Vec<f64> = raw[..i_n].iter().map(|l| l / self.temperature).collect();
        let means = raw[self.means_offset()..self.scales_offset()].to_vec();
        let scale_raw = &raw[self.scales_offset()..];
        let mut scales = Vec::with_capacity(i_n * dim);
        for i in 0..i_n {
            for d in 0..dim {
                scales.push(match self.noise.scale_index(i, d, dim) {
                    Some(k) => softplus(scale_raw[k]) + SCALE_FLOOR,
                    None => match self.noise {
                        NoiseModel::Fixed(level) => level.max(SCALE_FLOOR),
                        _ => unreachable!("only fixed noise has no scale head"),
                    },
                });
            }
        }
        Ok(GmmParams {
            weights: softmax(&logits),
            means,
            scales,
            dim,
            noise: self.noise,
        })
    }

    /// Negative log-likelihood of `x` and its gradient with respect to the raw row.
    pub fn nll_and_grad(&self, raw: &[f64], x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let params = self.decode(raw)?;
        check_len("mixture target", self.dim, x.len())?;
        let terms = params.joint_log_terms(x);
        let lse = log_sum_exp(&terms);
        let resp: Vec<f64> = terms.iter().map(|t| (t - lse).exp()).collect();
        let mut grad = vec![0.0; self.raw_len()];
        let (mo, so) = (self.means_offset(), self.scales_offset());
        for i in 0..self.components {
            grad[i] = (params.weights[i] - resp[i]) / self.temperature;
            for d in 0..self.dim {
                let k = i * self.dim + d;
                let (diff, s) = (x[d] - params.means[k], params.scales[k]);
                let (dlogf_dmu, dlogf_ds) = if self.noise.is_laplace() {
                    (diff.signum() / s, -1.0 / s + diff.abs() / (s * s))
                } else {
                    (diff / (s * s), -1.0 / s + diff * diff / (s * s * s))
                };
                grad[mo + k] = -resp[i] * dlogf_dmu;
                if let Some(j) = self.noise.scale_index(i, d, self.dim) {
                    grad[so + j] -= resp[i] * dlogf_ds * sigmoid(raw[so + j]);
                }
            }
        }
        Ok((-lse, grad))
    }

    /// Adds to `grad` the raw-row gradient of a scalar whose gradient at the
    /// reparameterized draw `x = mean + scale * eps` is `grad_x`.
    pub fn accumulate_draw_grad(&self, raw: &[f64], component: usize, eps: &[f64], grad_x: &[f64], grad: &mut [f64]) {
        let (mo, so) = (self.means_offset(), self.scales_offset());
        for d in 0..self.dim {
            let k = component * self.dim + d;
            grad[mo + k] += grad_x[d];
            if let Some(j) = self.noise.scale_index(component, d, self.dim) {
                grad[so + j] += grad_x[d] * eps[d] * sigmoid(raw[so + j]);
            }
        }
    }
}

/// Sets the scale-head biases so every learned scale starts at
/// `INITIAL_SCALE`. A zero bias would start at softplus(0) = 0.69, far wider
/// than the data noise, and Adam takes most of training to shrink it.
fn init_scale_biases(net: &mut DenseNet, layout: &MixtureLayout) {
    let start = net.num_params() - layout.raw_len() + layout.components * (1 + layout.dim);
    let raw = (INITIAL_SCALE - SCALE_FLOOR).exp_m1().ln();
    for p in &mut net.params_mut()[start..] {
        *p = raw;
    }
}

/// Mixture density network. A single dense net maps `c ++ z` to the raw
/// mixture row; its last layer plays the role of the separate π, μ and σ heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdnGenerator {
    net: DenseNet,
    layout: MixtureLayout,
    cond_dim: usize,
    latent_dim: usize,
}

impl MdnGenerator {
    pub fn new(
        cond_dim: usize,
        latent_dim: usize,
        hidden: &[usize],
        activation: Activation,
        layout: MixtureLayout,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let dims = Self::dims(cond_dim, latent_dim, hidden, &layout);
        let mut net = DenseNet::new(&dims, activation, rng)?;
        init_scale_biases(&mut net, &layout);
        Ok(Self {
            net,
            layout,
            cond_dim,
            latent_dim,
        })
    }

    pub fn zeros(cond_dim: usize, latent_dim: usize, hidden: &[usize], activation: Activation, layout: MixtureLayout) -> Result<Self> {
        let dims = Self::dims(cond_dim, latent_dim, hidden, &layout);
        Ok(Self {
            net: DenseNet::zeros(&dims, activation)?,
            layout,
            cond_dim,
            latent_dim,
        })
    }

    pub fn from_net(net: DenseNet, cond_dim: usize, latent_dim: usize, layout: MixtureLayout) -> Result<Self> {
        check_len("generator input", cond_dim + latent_dim, net.input_dim())?;
        check_len("mixture head", layout.raw_len(), net.output_dim())?;
        Ok(Self {
            net,
            layout,
            cond_dim,
            latent_dim,
        })
    }

    fn dims(cond_dim: usize, latent_dim: usize, hidden: &[usize], layout: &MixtureLayout) -> Vec<usize> {
        let mut dims = vec![cond_dim + latent_dim];
        dims.extend_from_slice(hidden);
        dims.push(layout.raw_len());
        dims
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn layout(&self) -> &MixtureLayout {
        &self.layout
    }

    pub fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn target_dim(&self) -> usize {
        self.layout.dim
    }

    pub fn set_temperature(&mut self, temperature: f64) -> Result<()> {
        self.layout = self.layout.with_temperature(temperature)?;
        Ok(())
    }

    pub fn sample_latent(&self, rng: &mut SeededRng) -> Vec<f64> {
        (0..self.latent_dim).map(|_| rng.normal()).collect()
    }

    pub fn raw(&self, c: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        check_len("generator condition", self.cond_dim, c.len())?;
        check_len("generator latent", self.latent_dim, z.len())?;
        let input: Vec<f64> = c.iter().chain(z).copied().collect();
        self.net.forward(&input)
    }

    pub fn forward(&self, c: &[f64], z: &[f64]) -> Result<GmmParams> {
        self.layout.decode(&self.raw(c, z)?)
    }

    /// Input matrix with rows `c_i ++ z_i`, fresh latents per row.
    pub(crate) fn latent_inputs(&self, conds: &[f64], rng: &mut SeededRng) -> Array2<f64> {
        let rows = conds.len() / self.cond_dim;
        let width = self.cond_dim + self.latent_dim;
        let mut input = Array2::zeros((rows, width));
        for (r, c) in conds.chunks(self.cond_dim).enumerate() {
            for (j, v) in c.iter().enumerate() {
                input[[r, j]] = *v;
            }
            for j in self.cond_dim..width {
                input[[r, j]] = rng.normal();
            }
        }
        input
    }

    /// One mixture draw per condition row of `conds` (row-major), fresh latents.
    pub fn sample_batch(&self, conds: &[f64], rng: &mut SeededRng) -> Result<Vec<f64>> {
        if !conds.len().is_multiple_of(self.cond_dim) {
            return Err(Error::Shape {
                context: "generator condition batch",
                expected: self.cond_dim,
                got: conds.len() % self.cond_dim,
            });
        }
        let input = self.latent_inputs(conds, rng);
        let raw = self.net.forward_batch(input.view())?;
        let mut out = Vec::with_capacity(raw.nrows() * self.layout.dim);
        for row in raw.rows() {
            let params = self.layout.decode(row.as_slice().expect("contiguous row"))?;
            out.extend(params.draw(rng).x);
        }
        Ok(out)
    }

    /// `k` independent actions for one condition: fresh latent, forward, mixture draw.
    pub fn sample_actions(&self, c: &[f64], k: usize, rng: &mut SeededRng) -> Result<Vec<Vec<f64>>> {
        check_len("generator condition", self.cond_dim, c.len())?;
        let conds: Vec<f64> = (0..k).flat_map(|_| c.iter().copied()).collect();
        let flat = self.sample_batch(&conds, rng)?;
        Ok(flat.chunks(self.layout.dim).map(<[f64]>::to_vec).collect())
    }
}

pub fn mdn_forward(generator: &MdnGenerator, c: &[f64], z: &[f64]) -> Result<GmmParams> {
    generator.forward(c, z)
}

/// Mean mixture NLL over a batch with a fresh latent per sample, and its parameter gradient.
pub fn mdn_loss_and_grad(generator: &MdnGenerator, batch: &[&Sample], rng: &mut SeededRng) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("mdn batch"));
    }
    let conds: Vec<f64> = batch.iter().flat_map(|s| s.c.iter().copied()).collect();
    check_len("generator condition batch", batch.len() * generator.cond_dim, conds.len())?;
    let input = generator.latent_inputs(&conds, rng);
    let (raw, cache) = generator.net.forward_cached(input.view())?;
    let scale = 1.0 / batch.len() as f64;
    let mut out_grad = Array2::zeros(raw.raw_dim());
    let mut loss = 0.0;
    for (r, s) in batch.iter().enumerate() {
        let (nll, g) = generator
            .layout
            .nll_and_grad(raw.row(r).as_slice().expect("contiguous row"), &s.x)?;
        loss += nll * scale;
        for (o, v) in out_grad.row_mut(r).iter_mut().zip(g) {
            *o = v * scale;
        }
    }
    let bw = generator.net.backward(&cache, out_grad.view())?;
    Ok((loss, bw.params))
}

/// Training loss of the standalone mixture density baseline.
pub fn mdn_loss_standalone(generator: &MdnGenerator, batch: &[Sample], rng: &mut SeededRng) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("mdn batch"));
    }
    let mut total = 0.0;
    for s in batch {
        let z = generator.sample_latent(rng);
        total += gmm_nll(&generator.forward(&s.c, &z)?, &s.x)?;
    }
    Ok(total / batch.len() as f64)
}
