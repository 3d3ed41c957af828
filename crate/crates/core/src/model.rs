//! A trained model of any kind behind one sampling interface.

use serde::{Deserialize, Serialize};

use crate::baselines::{
    ibc_infer, train_cgan, train_ebgan, train_explicit_bc, train_ibc, train_mdn, CganModel, EbganModel,
};
use crate::config::{ModelKind, TrainConfig};
use crate::datasets::{DatasetSplits, SyntheticTask, Units};
use crate::energy::{energy_landscape_grid, scalar_net_landscape, EnergyNet, Landscape};
use crate::error::{check_len, Error, Result};
use crate::mdn::MdnGenerator;
use crate::nn::DenseNet;
use crate::rng::SeededRng;
use crate::trainer::{train_ebgan_mdn, EbganMdnModel, LossTrace};

/// Trained networks together with the units they were fitted in. Callers
/// pass raw conditions and get raw actions back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub nets: ModelNets,
    pub units: Units,
}

impl From<ModelNets> for TrainedModel {
    fn from(nets: ModelNets) -> Self {
        Self { nets, units: Units::RAW }
    }
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.nets.kind()
    }

    /// `k` actions for the raw condition `c`.
    pub fn sample_actions(&self, c: &[f64], k: usize, rng: &mut SeededRng) -> Result<Vec<Vec<f64>>> {
        if self.units.is_raw() {
            return self.nets.sample_actions(c, k, rng);
        }
        let xs = self.nets.sample_actions(&self.units.condition_in(c), k, rng)?;
        Ok(xs.iter().map(|x| self.units.target_out(x)).collect())
    }

    /// Energy landscape over the task ranges, in the units the model was fitted in.
    pub fn landscape(&self, task: &SyntheticTask, resolution: usize) -> Result<Option<Landscape>> {
        self.nets.landscape(&task.with_units(self.units), resolution)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelNets {
    EbganMdn(EbganMdnModel),
    ExplicitBc { regressor: DenseNet },
    Mdn { generator: MdnGenerator },
    Cgan(CganModel),
    Ebgan(EbganModel),
    Ibc { energy: EnergyNet, bounds: Vec<(f64, f64)> },
}

impl ModelNets {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelNets::EbganMdn(_) => ModelKind::EbganMdn,
            ModelNets::ExplicitBc { .. } => ModelKind::ExplicitBc,
            ModelNets::Mdn { .. } => ModelKind::Mdn,
            ModelNets::Cgan(_) => ModelKind::Cgan,
            ModelNets::Ebgan(_) => ModelKind::Ebgan,
            ModelNets::Ibc { .. } => ModelKind::Ibc,
        }
    }

    /// `k` actions for condition `c`.
    pub fn sample_actions(&self, c: &[f64], k: usize, rng: &mut SeededRng) -> Result<Vec<Vec<f64>>> {
        match self {
            ModelNets::EbganMdn(m) => m.generator.sample_actions(c, k, rng),
            ModelNets::Mdn { generator } => generator.sample_actions(c, k, rng),
            ModelNets::ExplicitBc { regressor } => {
                check_len("regression condition", regressor.input_dim(), c.len())?;
                let x = regressor.forward(c)?;
                Ok(vec![x; k])
            }
            ModelNets::Cgan(m) => m.generator.sample_actions(c, k, rng),
            ModelNets::Ebgan(m) => m.generator.sample_actions(c, k, rng),
            ModelNets::Ibc { energy, bounds } => ibc_infer(energy, c, k, bounds, rng),
        }
    }

    /// Energy (or negated discriminator logit) over the task's condition and target ranges.
    /// `None` for models without such a network or for tasks that are not 1-D.
    pub fn landscape(&self, task: &SyntheticTask, resolution: usize) -> Result<Option<Landscape>> {
        if task.cond_dim() != 1 || task.target_dim() != 1 {
            return Ok(None);
        }
        let c_range = task.condition_bounds()[0];
        let x_range = task.target_bounds()[0];
        let res = (resolution, resolution);
        let l = match self {
            ModelNets::EbganMdn(m) => energy_landscape_grid(&m.energy, c_range, x_range, res)?,
            ModelNets::Ebgan(m) => energy_landscape_grid(&m.energy, c_range, x_range, res)?,
            ModelNets::Ibc { energy, .. } => energy_landscape_grid(energy, c_range, x_range, res)?,
            ModelNets::Cgan(m) => scalar_net_landscape(&m.discriminator, -1.0, c_range, x_range, res)?,
            ModelNets::ExplicitBc { .. } | ModelNets::Mdn { .. } => return Ok(None),
        };
        Ok(Some(l))
    }
}

/// Trains the model selected by `config.model` on `data`, after moving the
/// data into the task's network units.
pub fn train_model(config: &TrainConfig, data: &DatasetSplits, seed: u64) -> Result<(TrainedModel, LossTrace)> {
    let units = data.task.network_units();
    let scaled;
    let data = if data.task.units == units {
        data
    } else {
        scaled = data.to_units(units);
        &scaled
    };
    let (nets, trace) = train_nets(config, data, seed)?;
    Ok((TrainedModel { nets, units }, trace))
}

fn train_nets(config: &TrainConfig, data: &DatasetSplits, seed: u64) -> Result<(ModelNets, LossTrace)> {
    config.validate()?;
    if config.task != data.task.kind {
        return Err(Error::Config(format!(
            "config is for task {} but data is {}",
            config.task.name(),
            data.task.kind.name()
        )));
    }
    Ok(match config.model {
        ModelKind::EbganMdn => {
            let (m, t) = train_ebgan_mdn(config, data, seed)?;
            (ModelNets::EbganMdn(m), t)
        }
        ModelKind::ExplicitBc => {
            let (regressor, t) = train_explicit_bc(config, data, seed)?;
            (ModelNets::ExplicitBc { regressor }, t)
        }
        ModelKind::Mdn => {
            let (generator, t) = train_mdn(config, data, seed)?;
            (ModelNets::Mdn { generator }, t)
        }
        ModelKind::Cgan => {
            let (m, t) = train_cgan(config, data, seed)?;
            (ModelNets::Cgan(m), t)
        }
        ModelKind::Ebgan => {
            let (m, t) = train_ebgan(config, data, seed)?;
            (ModelNets::Ebgan(m), t)
        }
        ModelKind::Ibc => {
            let (energy, t) = train_ibc(config, data, seed)?;
            (
                ModelNets::Ibc {
                    energy,
                    bounds: data.task.target_bounds(),
                },
                t,
            )
        }
    })
}
