use crate::adam::AdamState;
use crate::config::TrainConfig;
use crate::datasets::{DatasetSplits, Sample};
use crate::error::Result;
use crate::mdn::{mdn_loss_and_grad, MdnGenerator, MixtureLayout};
use crate::rng::{SeededRng, Stream};
use crate::trainer::{EpochRecord, LossTrace};

use super::shuffled_batches;

/// Standalone mixture density network on the condition alone.
pub fn train_mdn(config: &TrainConfig, data: &DatasetSplits, seed: u64) -> Result<(MdnGenerator, LossTrace)> {
    config.validate()?;
    let task = &data.task;
    let layout = MixtureLayout::new(config.components, task.target_dim(), config.noise)?.with_temperature(config.temperature)?;
    let mut generator = MdnGenerator::new(
        task.cond_dim(),
        0,
        &config.generator_hidden(),
        config.activation,
        layout,
        &mut SeededRng::stream(seed, Stream::Init),
    )?;
    let mut opt = AdamState::new(generator.net().num_params(), config.lr_generator);
    let mut rng = SeededRng::stream(seed, Stream::Train);
    let mut trace = LossTrace::default();
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        let batches = shuffled_batches(data.train.len(), config.batch_size, &mut rng);
        for idx in &batches {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &data.train[i]).collect();
            let (loss, grad) = mdn_loss_and_grad(&generator, &batch, &mut rng)?;
            opt.step(generator.net_mut().params_mut(), &grad)?;
            total += loss;
        }
        trace.records.push(EpochRecord {
            epoch,
            em_loss: f64::NAN,
            gen_energy: f64::NAN,
            gen_nll: total / batches.len() as f64,
            alpha: f64::NAN,
            mi_bound: f64::NAN,
        });
    }
    Ok((generator, trace))
}
