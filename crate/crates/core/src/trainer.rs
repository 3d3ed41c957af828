//! Alternating energy / generator training.
//!
//! Per batch: `inner_steps` InfoNCE updates of the energy model, each with
//! fresh latents, negatives and generator samples, then one generator update.
//! The generator loss for the mixture generator is
//! `mean[E(c, x_g) + NLL(x | c)]` where `x_g = μ_k + σ_k ⊙ ε` with the
//! component `k` and noise `ε` held fixed, so the energy gradient reaches the
//! generator through the means and scales.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::config::TrainConfig;
use crate::datasets::{DatasetSplits, Sample, SyntheticTask};
use crate::energy::{infonce_batch_grad, mi_lower_bound, ContrastiveBatch, EnergyNet, InfonceConfig};
use crate::error::{check_len, Error, Result};
use crate::mdn::{GmmParams, MdnGenerator, MixtureLayout};
use crate::rng::{SeededRng, Stream};
use crate::serialize::nan_as_null;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    #[serde(with = "nan_as_null")]
    pub em_loss: f64,
    #[serde(with = "nan_as_null")]
    pub gen_energy: f64,
    #[serde(with = "nan_as_null")]
    pub gen_nll: f64,
    #[serde(with = "nan_as_null")]
    pub alpha: f64,
    #[serde(with = "nan_as_null")]
    pub mi_bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub records: Vec<EpochRecord>,
}

/// Terms a model does not have are NaN in memory and empty in CSV.
impl LossTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "em_loss", "gen_energy", "gen_nll", "alpha", "mi_bound"])?;
        for r in &self.records {
            let cell = |v: f64| if v.is_nan() { String::new() } else { v.to_string() };
            w.write_record([
                r.epoch.to_string(),
                cell(r.em_loss),
                cell(r.gen_energy),
                cell(r.gen_nll),
                cell(r.alpha),
                cell(r.mi_bound),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Generator loss terms averaged over a batch, with the gradient on the generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorLoss {
    pub total: f64,
    pub energy: f64,
    pub nll: f64,
    pub grad: Vec<f64>,
}

/// Randomness of one generator-loss evaluation, held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenDraw {
    pub z: Vec<f64>,
    pub component: usize,
    pub eps: Vec<f64>,
}

/// A generator that can be trained against a frozen energy model.
pub trait AdversarialGenerator {
    fn cond_dim(&self) -> usize;
    fn target_dim(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    /// One detached draw per row of `conds` (row-major `rows x d_c`).
    fn sample_batch(&self, conds: &[f64], rng: &mut SeededRng) -> Result<Vec<f64>>;
    /// Generator loss with fresh randomness; the energy model is not modified.
    fn loss_and_grad(&self, energy: &EnergyNet, batch: &[&Sample], rng: &mut SeededRng) -> Result<GeneratorLoss>;
}

impl AdversarialGenerator for MdnGenerator {
    fn cond_dim(&self) -> usize {
        MdnGenerator::cond_dim(self)
    }

    fn target_dim(&self) -> usize {
        MdnGenerator::target_dim(self)
    }

    fn params(&self) -> &[f64] {
        self.net().params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.net_mut().params_mut()
    }

    fn sample_batch(&self, conds: &[f64], rng: &mut SeededRng) -> Result<Vec<f64>> {
        MdnGenerator::sample_batch(self, conds, rng)
    }

    fn loss_and_grad(&self, energy: &EnergyNet, batch: &[&Sample], rng: &mut SeededRng) -> Result<GeneratorLoss> {
        let conds: Vec<f64> = batch.iter().flat_map(|s| s.c.iter().copied()).collect();
        let input = self.latent_inputs(&conds, rng);
        mixture_generator_pass(energy, self, batch, input, |params, _| {
            let d = params.draw(rng);
            (d.component, d.eps)
        })
    }
}

/// Shared batch computation of the mixture generator loss. `pick` returns the
/// component and noise for each row given its decoded parameters.
fn mixture_generator_pass(
    energy: &EnergyNet,
    generator: &MdnGenerator,
    batch: &[&Sample],
    input: Array2<f64>,
    mut pick: impl FnMut(&GmmParams, usize) -> (usize, Vec<f64>),
) -> Result<GeneratorLoss> {
    if batch.is_empty() {
        return Err(Error::Empty("generator batch"));
    }
    let layout: &MixtureLayout = generator.layout();
    let (dc, dx) = (generator.cond_dim(), layout.dim);
    check_len("energy condition", energy.cond_dim(), dc)?;
    check_len("energy target", energy.target_dim(), dx)?;
    let b = batch.len();
    let scale = 1.0 / b as f64;
    let (raw, gen_cache) = generator.net().forward_cached(input.view())?;

    let mut draws = Vec::with_capacity(b);
    let mut energy_input = Array2::zeros((b, dc + dx));
    for (r, s) in batch.iter().enumerate() {
        let params = layout.decode(raw.row(r).as_slice().expect("contiguous row"))?;
        let (component, eps) = pick(&params, r);
        check_len("reparameterization noise", dx, eps.len())?;
        let x_g = params.reparameterize(component, &eps);
        for (j, v) in s.c.iter().chain(&x_g).enumerate() {
            energy_input[[r, j]] = *v;
        }
        draws.push((component, eps));
    }
    let (e_out, e_cache) = energy.net().forward_cached(energy_input.view())?;
    let e_grad = Array2::from_elem((b, 1), scale);
    let x_grad = energy.net().backward(&e_cache, e_grad.view())?.input;

    let mut out_grad = Array2::zeros(raw.raw_dim());
    let (mut e_sum, mut nll_sum) = (0.0, 0.0);
    for (r, s) in batch.iter().enumerate() {
        let raw_row = raw.row(r);
        let raw_row = raw_row.as_slice().expect("contiguous row");
        let (nll, mut g) = layout.nll_and_grad(raw_row, &s.x)?;
        for v in &mut g {
            *v *= scale;
        }
        let gx: Vec<f64> = (0..dx).map(|d| x_grad[[r, dc + d]]).collect();
        let (component, eps) = &draws[r];
        layout.accumulate_draw_grad(raw_row, *component, eps, &gx, &mut g);
        for (o, v) in out_grad.row_mut(r).iter_mut().zip(g) {
            *o = v;
        }
        e_sum += e_out[[r, 0]];
        nll_sum += nll;
    }
    let grad = generator.net().backward(&gen_cache, out_grad.view())?.params;
    let (energy_term, nll) = (e_sum * scale, nll_sum * scale);
    Ok(GeneratorLoss {
        total: energy_term + nll,
        energy: energy_term,
        nll,
        grad,
    })
}

/// Mixture generator loss over a batch with all randomness supplied by the caller.
pub fn generator_loss_batch(
    energy: &EnergyNet,
    generator: &MdnGenerator,
    batch: &[&Sample],
    draws: &[FrozenDraw],
) -> Result<GeneratorLoss> {
    check_len("frozen draws", batch.len(), draws.len())?;
    let (dc, dz) = (generator.cond_dim(), generator.latent_dim());
    let mut input = Array2::zeros((batch.len(), dc + dz));
    for (r, (s, d)) in batch.iter().zip(draws).enumerate() {
        check_len("generator condition", dc, s.c.len())?;
        check_len("generator latent", dz, d.z.len())?;
        for (j, v) in s.c.iter().chain(&d.z).enumerate() {
            input[[r, j]] = *v;
        }
    }
    mixture_generator_pass(energy, generator, batch, input, |_, r| (draws[r].component, draws[r].eps.clone()))
}

/// `E(c, x_g) + NLL(x | c, z)` for one sample with frozen randomness.
pub fn generator_loss(
    energy: &EnergyNet,
    generator: &MdnGenerator,
    c: &[f64],
    x: &[f64],
    draw: &FrozenDraw,
) -> Result<GeneratorLoss> {
    let s = Sample {
        c: c.to_vec(),
        x: x.to_vec(),
    };
    generator_loss_batch(energy, generator, &[&s], std::slice::from_ref(draw))
}

/// One InfoNCE update of `energy` on `batch`. Negatives come from the task
/// oracle, generator samples from `generator` (detached).
#[allow(clippy::too_many_arguments)]
pub(crate) fn contrastive_step<G: AdversarialGenerator + ?Sized>(
    task: &SyntheticTask,
    energy: &mut EnergyNet,
    opt: &mut AdamState,
    generator: Option<&G>,
    batch: &[&Sample],
    negatives: usize,
    generated: usize,
    alpha: f64,
    rng: &mut SeededRng,
) -> Result<f64> {
    let conditions: Vec<f64> = batch.iter().flat_map(|s| s.c.iter().copied()).collect();
    let positives: Vec<f64> = batch.iter().flat_map(|s| s.x.iter().copied()).collect();
    let mut neg = Vec::with_capacity(batch.len() * negatives * task.target_dim());
    for s in batch {
        task.fill_negatives(&task.modes(&s.c)?, negatives, rng, &mut neg);
    }
    let gen = match (generator, generated) {
        (Some(g), n) if n > 0 => {
            let repeated: Vec<f64> = batch
                .iter()
                .flat_map(|s| std::iter::repeat_n(s.c.iter().copied(), n).flatten())
                .collect();
            g.sample_batch(&repeated, rng)?
        }
        _ => Vec::new(),
    };
    let generated = if gen.is_empty() { 0 } else { generated };
    let cb = ContrastiveBatch {
        conditions: &conditions,
        positives: &positives,
        negatives: &neg,
        generated: &gen,
        negatives_per_positive: negatives,
        generated_per_positive: generated,
        alpha,
    };
    let (loss, grad) = infonce_batch_grad(energy, &cb)?;
    opt.step(energy.net_mut().params_mut(), &grad)?;
    Ok(loss)
}

/// Training state of an energy model paired with a generator.
pub struct AdversarialTrainer<G> {
    task: SyntheticTask,
    infonce: InfonceConfig,
    inner_steps: usize,
    batch_size: usize,
    energy: EnergyNet,
    generator: G,
    energy_opt: AdamState,
    generator_opt: AdamState,
    rng: SeededRng,
    energy_updates: u64,
    generator_updates: u64,
    trace: LossTrace,
}

impl<G: AdversarialGenerator> AdversarialTrainer<G> {
    pub fn new(config: &TrainConfig, task: SyntheticTask, energy: EnergyNet, generator: G, rng: SeededRng) -> Result<Self> {
        config.validate()?;
        check_len("energy condition", task.cond_dim(), energy.cond_dim())?;
        check_len("energy target", task.target_dim(), energy.target_dim())?;
        check_len("generator condition", task.cond_dim(), generator.cond_dim())?;
        check_len("generator target", task.target_dim(), generator.target_dim())?;
        let energy_opt = AdamState::new(energy.net().num_params(), config.lr_energy);
        let generator_opt = AdamState::new(generator.params().len(), config.lr_generator);
        Ok(Self {
            task,
            infonce: config.infonce(),
            inner_steps: config.inner_steps,
            batch_size: config.batch_size,
            energy,
            generator,
            energy_opt,
            generator_opt,
            rng,
            energy_updates: 0,
            generator_updates: 0,
            trace: LossTrace::default(),
        })
    }

    pub fn energy(&self) -> &EnergyNet {
        &self.energy
    }

    pub fn generator(&self) -> &G {
        &self.generator
    }

    pub fn energy_updates(&self) -> u64 {
        self.energy_updates
    }

    pub fn generator_updates(&self) -> u64 {
        self.generator_updates
    }

    pub fn trace(&self) -> &LossTrace {
        &self.trace
    }

    pub fn energy_step(&mut self, batch: &[&Sample], alpha: f64) -> Result<f64> {
        let loss = contrastive_step(
            &self.task,
            &mut self.energy,
            &mut self.energy_opt,
            Some(&self.generator),
            batch,
            self.infonce.negatives,
            self.infonce.generator_terms(),
            alpha,
            &mut self.rng,
        )?;
        self.energy_updates += 1;
        Ok(loss)
    }

    pub fn generator_step(&mut self, batch: &[&Sample]) -> Result<GeneratorLoss> {
        let loss = self.generator.loss_and_grad(&self.energy, batch, &mut self.rng)?;
        self.generator_opt.step(self.generator.params_mut(), &loss.grad)?;
        self.generator_updates += 1;
        Ok(loss)
    }

    /// One pass over `data` in shuffled batches. `epoch` is 0-based.
    pub fn train_epoch(&mut self, data: &[Sample], epoch: usize) -> Result<EpochRecord> {
        if data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        let alpha = self.infonce.alpha(epoch);
        let mut order: Vec<usize> = (0..data.len()).collect();
        self.rng.shuffle(&mut order);
        let (mut em, mut ge, mut gn) = (0.0, 0.0, 0.0);
        let (mut em_n, mut gen_n) = (0usize, 0usize);
        for chunk in order.chunks(self.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            for _ in 0..self.inner_steps {
                em += self.energy_step(&batch, alpha)?;
                em_n += 1;
            }
            let g = self.generator_step(&batch)?;
            ge += g.energy;
            gn += g.nll;
            gen_n += 1;
        }
        let em_loss = em / em_n.max(1) as f64;
        let record = EpochRecord {
            epoch,
            em_loss,
            gen_energy: ge / gen_n as f64,
            gen_nll: gn / gen_n as f64,
            alpha,
            mi_bound: mi_lower_bound(em_loss, self.infonce.denominator_count()),
        };
        self.trace.records.push(record);
        Ok(record)
    }

    pub fn fit(mut self, data: &DatasetSplits, epochs: usize) -> Result<(EnergyNet, G, LossTrace)> {
        for epoch in 0..epochs {
            let r = self.train_epoch(&data.train, epoch)?;
            log::debug!(
                "epoch {epoch}: em_loss {:.4} gen_energy {:.4} gen_nll {:.4} alpha {:.3}",
                r.em_loss,
                r.gen_energy,
                r.gen_nll,
                r.alpha
            );
        }
        Ok((self.energy, self.generator, self.trace))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbganMdnModel {
    pub energy: EnergyNet,
    pub generator: MdnGenerator,
}

/// Fresh energy model and mixture generator for `config`, from the init stream of `seed`.
pub fn init_ebgan_mdn(config: &TrainConfig, task: &SyntheticTask, seed: u64) -> Result<EbganMdnModel> {
    let mut rng = SeededRng::stream(seed, Stream::Init);
    let energy = EnergyNet::new(task.cond_dim(), task.target_dim(), &config.energy_hidden(), config.activation, &mut rng)?;
    let layout = MixtureLayout::new(config.components, task.target_dim(), config.noise)?.with_temperature(config.temperature)?;
    let generator = MdnGenerator::new(
        task.cond_dim(),
        config.latent_dim,
        &config.generator_hidden(),
        config.activation,
        layout,
        &mut rng,
    )?;
    Ok(EbganMdnModel { energy, generator })
}

pub fn train_ebgan_mdn(config: &TrainConfig, data: &DatasetSplits, seed: u64) -> Result<(EbganMdnModel, LossTrace)> {
    let init = init_ebgan_mdn(config, &data.task, seed)?;
    let trainer = AdversarialTrainer::new(
        config,
        data.task,
        init.energy,
        init.generator,
        SeededRng::stream(seed, Stream::Train),
    )?;
    let (energy, generator, trace) = trainer.fit(data, config.epochs)?;
    if let Some(last) = trace.records.last() {
        log::info!(
            "ebgan_mdn seed {seed}: final em_loss {:.4}, gen_nll {:.4}",
            last.em_loss,
            last.gen_nll
        );
    }
    Ok((EbganMdnModel { energy, generator }, trace))
}

pub fn sample_actions(generator: &MdnGenerator, c: &[f64], k: usize, rng: &mut SeededRng) -> Result<Vec<Vec<f64>>> {
    generator.sample_actions(c, k, rng)
}
