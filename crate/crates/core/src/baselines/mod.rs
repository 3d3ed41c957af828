//! Comparison models: explicit regression, standalone MDN, conditional GAN,
//! EBGAN with a plain generator, and implicit (energy-only) behavior cloning.

mod cgan;
mod ebgan;
mod explicit_bc;
mod ibc;
mod mdn;

pub use cgan::{discriminator_loss_and_grad, generator_nonsaturating_loss_and_grad, train_cgan, CganModel};
pub use ebgan::{train_ebgan, EbganModel};
pub use explicit_bc::{mse_loss_and_grad, train_explicit_bc};
pub use ibc::{ibc_infer, train_ibc, IBC_CANDIDATES, IBC_INITIAL_SCALE, IBC_ROUNDS};
pub use mdn::train_mdn;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::datasets::Sample;
use crate::energy::EnergyNet;
use crate::error::{check_len, Error, Result};
use crate::nn::{Activation, DenseNet};
use crate::rng::SeededRng;
use crate::trainer::{AdversarialGenerator, GeneratorLoss};

/// Deterministic generator network `(c ++ z) -> x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpGenerator {
    net: DenseNet,
    cond_dim: usize,
    latent_dim: usize,
}

impl MlpGenerator {
    pub fn new(
        cond_dim: usize,
        latent_dim: usize,
        target_dim: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let mut dims = vec![cond_dim + latent_dim];
        dims.extend_from_slice(hidden);
        dims.push(target_dim);
        Ok(Self {
            net: DenseNet::new(&dims, activation, rng)?,
            cond_dim,
            latent_dim,
        })
    }

    pub fn from_net(net: DenseNet, cond_dim: usize, latent_dim: usize) -> Result<Self> {
        check_len("generator input", cond_dim + latent_dim, net.input_dim())?;
        Ok(Self {
            net,
            cond_dim,
            latent_dim,
        })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    /// Rows `c_i ++ z_i` with fresh standard-normal latents.
    pub(crate) fn latent_inputs(&self, conds: &[f64], rng: &mut SeededRng) -> Result<Array2<f64>> {
        if !conds.len().is_multiple_of(self.cond_dim) {
            return Err(Error::Shape {
                context: "generator condition batch",
                expected: self.cond_dim,
                got: conds.len() % self.cond_dim,
            });
        }
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
        Ok(input)
    }

    pub fn sample_actions(&self, c: &[f64], k: usize, rng: &mut SeededRng) -> Result<Vec<Vec<f64>>> {
        check_len("generator condition", self.cond_dim, c.len())?;
        let conds: Vec<f64> = (0..k).flat_map(|_| c.iter().copied()).collect();
        let out = self.net.forward_batch(self.latent_inputs(&conds, rng)?.view())?;
        Ok(out.rows().into_iter().map(|r| r.to_vec()).collect())
    }
}

impl AdversarialGenerator for MlpGenerator {
    fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    fn target_dim(&self) -> usize {
        self.net.output_dim()
    }

    fn params(&self) -> &[f64] {
        self.net.params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.net.params_mut()
    }

    fn sample_batch(&self, conds: &[f64], rng: &mut SeededRng) -> Result<Vec<f64>> {
        let out = self.net.forward_batch(self.latent_inputs(conds, rng)?.view())?;
        Ok(out.into_raw_vec_and_offset().0)
    }

    /// Energy term only: `mean E(c, G(c, z))`.
    fn loss_and_grad(&self, energy: &EnergyNet, batch: &[&Sample], rng: &mut SeededRng) -> Result<GeneratorLoss> {
        if batch.is_empty() {
            return Err(Error::Empty("generator batch"));
        }
        let (dc, dx) = (self.cond_dim, self.net.output_dim());
        let conds: Vec<f64> = batch.iter().flat_map(|s| s.c.iter().copied()).collect();
        let input = self.latent_inputs(&conds, rng)?;
        let (x_g, cache) = self.net.forward_cached(input.view())?;
        let b = batch.len();
        let mut e_in = Array2::zeros((b, dc + dx));
        for r in 0..b {
            for j in 0..dc {
                e_in[[r, j]] = conds[r * dc + j];
            }
            for d in 0..dx {
                e_in[[r, dc + d]] = x_g[[r, d]];
            }
        }
        let (e_out, e_cache) = energy.net().forward_cached(e_in.view())?;
        let scale = 1.0 / b as f64;
        let in_grad = energy
            .net()
            .backward(&e_cache, Array2::from_elem((b, 1), scale).view())?
            .input;
        let x_grad = in_grad.slice(ndarray::s![.., dc..]).to_owned();
        let grad = self.net.backward(&cache, x_grad.view())?.params;
        let e_mean = e_out.column(0).sum() * scale;
        Ok(GeneratorLoss {
            total: e_mean,
            energy: e_mean,
            nll: 0.0,
            grad,
        })
    }
}

/// Shuffled index batches covering `0..n`, the last one possibly partial.
pub(crate) fn shuffled_batches(n: usize, batch_size: usize, rng: &mut SeededRng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}
