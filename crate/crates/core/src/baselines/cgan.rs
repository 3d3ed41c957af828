use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::config::TrainConfig;
use crate::datasets::{DatasetSplits, Sample};
use crate::error::{Error, Result};
use crate::mdn::{sigmoid, softplus};
use crate::nn::DenseNet;
use crate::rng::{SeededRng, Stream};
use crate::trainer::{AdversarialGenerator, EpochRecord, LossTrace};

use super::{shuffled_batches, MlpGenerator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CganModel {
    pub generator: MlpGenerator,
    /// Maps `c ++ x` to a raw logit; real pairs score high.
    pub discriminator: DenseNet,
}

/// Binary cross-entropy on logits, real pairs labelled 1 and fakes 0:
/// `mean softplus(-D(real)) + mean softplus(D(fake))`.
pub fn discriminator_loss_and_grad(disc: &DenseNet, real: &Array2<f64>, fake: &Array2<f64>) -> Result<(f64, Vec<f64>)> {
    if real.nrows() == 0 || fake.nrows() == 0 {
        return Err(Error::Empty("discriminator batch"));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; disc.num_params()];
    for (rows, label_real) in [(real, true), (fake, false)] {
        let (logits, cache) = disc.forward_cached(rows.view())?;
        let scale = 1.0 / rows.nrows() as f64;
        let mut g = Array2::zeros(logits.raw_dim());
        for (r, l) in logits.column(0).iter().enumerate() {
            if label_real {
                loss += softplus(-l) * scale;
                g[[r, 0]] = -sigmoid(-l) * scale;
            } else {
                loss += softplus(*l) * scale;
                g[[r, 0]] = sigmoid(*l) * scale;
            }
        }
        for (a, b) in grad.iter_mut().zip(disc.backward(&cache, g.view())?.params) {
            *a += b;
        }
    }
    Ok((loss, grad))
}

/// Non-saturating generator loss `mean softplus(-D(c, G(c, z)))` for the given latent inputs.
pub fn generator_nonsaturating_loss_and_grad(
    generator: &MlpGenerator,
    disc: &DenseNet,
    inputs: &Array2<f64>,
) -> Result<(f64, Vec<f64>)> {
    let b = inputs.nrows();
    if b == 0 {
        return Err(Error::Empty("generator batch"));
    }
    let dc = generator.cond_dim();
    let (x_g, cache) = generator.net().forward_cached(inputs.view())?;
    let mut d_in = Array2::zeros((b, dc + x_g.ncols()));
    d_in.slice_mut(s![.., ..dc]).assign(&inputs.slice(s![.., ..dc]));
    d_in.slice_mut(s![.., dc..]).assign(&x_g);
    let (logits, d_cache) = disc.forward_cached(d_in.view())?;
    let scale = 1.0 / b as f64;
    let mut loss = 0.0;
    let mut g = Array2::zeros((b, 1));
    for (r, l) in logits.column(0).iter().enumerate() {
        loss += softplus(-l) * scale;
        g[[r, 0]] = -sigmoid(-l) * scale;
    }
    let in_grad = disc.backward(&d_cache, g.view())?.input;
    let x_grad = in_grad.slice(s![.., dc..]).to_owned();
    Ok((loss, generator.net().backward(&cache, x_grad.view())?.params))
}

fn pair_rows(batch: &[&Sample]) -> Array2<f64> {
    let width = batch[0].c.len() + batch[0].x.len();
    let mut rows = Array2::zeros((batch.len(), width));
    for (r, s) in batch.iter().enumerate() {
        for (j, v) in s.c.iter().chain(&s.x).enumerate() {
            rows[[r, j]] = *v;
        }
    }
    rows
}

/// Conditional GAN with `inner_steps` discriminator updates per generator update.
pub fn train_cgan(config: &TrainConfig, data: &DatasetSplits, seed: u64) -> Result<(CganModel, LossTrace)> {
    config.validate()?;
    let task = &data.task;
    let (dc, dx) = (task.cond_dim(), task.target_dim());
    let mut init = SeededRng::stream(seed, Stream::Init);
    let mut generator = MlpGenerator::new(dc, config.latent_dim, dx, &config.generator_hidden(), config.activation, &mut init)?;
    let mut d_dims = vec![dc + dx];
    d_dims.extend(config.energy_hidden());
    d_dims.push(1);
    let mut disc = DenseNet::new(&d_dims, config.activation, &mut init)?;
    let mut g_opt = AdamState::new(generator.params().len(), config.lr_generator);
    let mut d_opt = AdamState::new(disc.num_params(), config.lr_energy);
    let mut rng = SeededRng::stream(seed, Stream::Train);
    let mut trace = LossTrace::default();
    for epoch in 0..config.epochs {
        let (mut d_sum, mut g_sum, mut d_n, mut g_n) = (0.0, 0.0, 0usize, 0usize);
        for idx in shuffled_batches(data.train.len(), config.batch_size, &mut rng) {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &data.train[i]).collect();
            let real = pair_rows(&batch);
            let conds: Vec<f64> = batch.iter().flat_map(|s| s.c.iter().copied()).collect();
            for _ in 0..config.inner_steps {
                let inputs = generator.latent_inputs(&conds, &mut rng)?;
                let x_g = generator.net().forward_batch(inputs.view())?;
                let mut fake = real.clone();
                fake.slice_mut(s![.., dc..]).assign(&x_g);
                let (loss, grad) = discriminator_loss_and_grad(&disc, &real, &fake)?;
                d_opt.step(disc.params_mut(), &grad)?;
                d_sum += loss;
                d_n += 1;
            }
            let inputs = generator.latent_inputs(&conds, &mut rng)?;
            let (loss, grad) = generator_nonsaturating_loss_and_grad(&generator, &disc, &inputs)?;
            g_opt.step(generator.params_mut(), &grad)?;
            g_sum += loss;
            g_n += 1;
        }
        trace.records.push(EpochRecord {
            epoch,
            em_loss: d_sum / d_n.max(1) as f64,
            gen_energy: g_sum / g_n.max(1) as f64,
            gen_nll: f64::NAN,
            alpha: f64::NAN,
            mi_bound: f64::NAN,
        });
    }
    Ok((CganModel { generator, discriminator: disc }, trace))
}
