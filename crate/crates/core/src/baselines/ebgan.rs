use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::datasets::DatasetSplits;
use crate::energy::EnergyNet;
use crate::error::Result;
use crate::rng::{SeededRng, Stream};
use crate::trainer::{AdversarialTrainer, LossTrace};

use super::MlpGenerator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbganModel {
    pub energy: EnergyNet,
    pub generator: MlpGenerator,
}

/// Same loop as the mixture model with a deterministic generator and no likelihood term.
pub fn train_ebgan(config: &TrainConfig, data: &DatasetSplits, seed: u64) -> Result<(EbganModel, LossTrace)> {
    let task = data.task;
    let mut rng = SeededRng::stream(seed, Stream::Init);
    let energy = EnergyNet::new(task.cond_dim(), task.target_dim(), &config.energy_hidden(), config.activation, &mut rng)?;
    let generator = MlpGenerator::new(
        task.cond_dim(),
        config.latent_dim,
        task.target_dim(),
        &config.generator_hidden(),
        config.activation,
        &mut rng,
    )?;
    let trainer = AdversarialTrainer::new(config, task, energy, generator, SeededRng::stream(seed, Stream::Train))?;
    let (energy, generator, trace) = trainer.fit(data, config.epochs)?;
    Ok((EbganModel { energy, generator }, trace))
}
