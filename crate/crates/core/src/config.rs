//! Model kinds and training hyperparameters with per-(task, model) presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::TaskKind;
use crate::energy::{InfonceConfig, InfonceMode, ALPHA_MIN};
use crate::error::{Error, Result};
use crate::mdn::NoiseModel;
use crate::nn::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    EbganMdn,
    ExplicitBc,
    Mdn,
    Cgan,
    Ebgan,
    Ibc,
}

impl ModelKind {
    /// Table order.
    pub const ALL: [ModelKind; 6] = [
        ModelKind::EbganMdn,
        ModelKind::ExplicitBc,
        ModelKind::Mdn,
        ModelKind::Cgan,
        ModelKind::Ebgan,
        ModelKind::Ibc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::EbganMdn => "ebgan_mdn",
            ModelKind::ExplicitBc => "explicit_bc",
            ModelKind::Mdn => "mdn",
            ModelKind::Cgan => "cgan",
            ModelKind::Ebgan => "ebgan",
            ModelKind::Ibc => "ibc",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::EbganMdn => "EBGAN-MDN",
            ModelKind::ExplicitBc => "Explicit BC",
            ModelKind::Mdn => "MDN",
            ModelKind::Cgan => "cGAN",
            ModelKind::Ebgan => "EBGAN",
            ModelKind::Ibc => "IBC",
        }
    }

    /// Whether the model has an energy or discriminator network to export as a landscape.
    pub fn has_landscape(self) -> bool {
        matches!(self, ModelKind::EbganMdn | ModelKind::Cgan | ModelKind::Ebgan | ModelKind::Ibc)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown model `{s}`")))
    }
}

/// Every hyperparameter of one training run.
///
/// Fields that a model does not use keep their preset values and are ignored.
/// "Generator" means the network that produces targets (MDN, MLP generator or
/// explicit regressor); "energy" means the energy model or discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: TaskKind,
    pub model: ModelKind,
    pub epochs: usize,
    pub batch_size: usize,
    /// Energy or discriminator updates per generator update.
    pub inner_steps: usize,
    pub negatives: usize,
    pub lr_generator: f64,
    pub lr_energy: f64,
    pub infonce_mode: InfonceMode,
    pub alpha_min: f64,
    pub noise: NoiseModel,
    pub components: usize,
    pub latent_dim: usize,
    pub temperature: f64,
    pub hidden_width: usize,
    pub energy_layers: usize,
    pub generator_layers: usize,
    pub activation: Activation,
}

impl TrainConfig {
    pub fn preset(task: TaskKind, model: ModelKind) -> Self {
        match task {
            TaskKind::Hyperbola | TaskKind::Lines => Self::benchmark1(task, model),
            TaskKind::Ik2link => Self::ik2link(model),
        }
    }

    fn benchmark1(task: TaskKind, model: ModelKind) -> Self {
        let components = if task == TaskKind::Lines { 4 } else { 2 };
        let mut c = Self {
            task,
            model,
            epochs: 100,
            batch_size: 32,
            inner_steps: 5,
            negatives: 32,
            lr_generator: 0.0005,
            lr_energy: 0.001,
            infonce_mode: InfonceMode::StandardInclusion,
            alpha_min: ALPHA_MIN,
            noise: NoiseModel::Diagonal,
            components,
            latent_dim: 2,
            temperature: 1.0,
            hidden_width: 64,
            energy_layers: 2,
            generator_layers: 2,
            activation: Activation::Relu,
        };
        match model {
            ModelKind::EbganMdn | ModelKind::Ebgan => {}
            ModelKind::ExplicitBc => {
                c.lr_generator = 0.001;
                c.generator_layers = 5;
                c.latent_dim = 0;
            }
            ModelKind::Mdn => {
                c.lr_generator = 0.001;
                c.noise = NoiseModel::Isotropic;
                c.latent_dim = 0;
            }
            ModelKind::Cgan => {
                c.lr_generator = 0.0002;
                c.lr_energy = 0.002;
            }
            ModelKind::Ibc => {
                c.negatives = 64;
                c.inner_steps = 1;
                c.energy_layers = 4;
                c.infonce_mode = InfonceMode::NoGenerator;
            }
        }
        c
    }

    fn ik2link(model: ModelKind) -> Self {
        let mut c = Self::benchmark1(TaskKind::Ik2link, model);
        c.components = 10;
        c.latent_dim = if matches!(model, ModelKind::ExplicitBc | ModelKind::Mdn) { 0 } else { 8 };
        c.energy_layers = 2;
        c.generator_layers = 2;
        match model {
            ModelKind::EbganMdn | ModelKind::Ebgan | ModelKind::Ibc => c.negatives = 256,
            ModelKind::Cgan => {
                c.lr_generator = 0.0005;
                c.lr_energy = 0.001;
                c.activation = Activation::LeakyRelu;
            }
            ModelKind::ExplicitBc | ModelKind::Mdn => {}
        }
        c
    }

    pub fn energy_hidden(&self) -> Vec<usize> {
        vec![self.hidden_width; self.energy_layers]
    }

    pub fn generator_hidden(&self) -> Vec<usize> {
        vec![self.hidden_width; self.generator_layers]
    }

    pub fn infonce(&self) -> InfonceConfig {
        InfonceConfig {
            mode: self.infonce_mode,
            negatives: self.negatives,
            alpha_min: self.alpha_min,
            total_epochs: self.epochs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.epochs == 0 || self.batch_size == 0 {
            return fail("epochs and batch size must be positive".into());
        }
        if self.hidden_width == 0 {
            return fail("hidden width must be positive".into());
        }
        if !(self.lr_generator > 0.0 && self.lr_energy > 0.0) {
            return fail("learning rates must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.alpha_min) {
            return fail(format!("alpha_min must lie in [0, 1], got {}", self.alpha_min));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return fail(format!("temperature must be positive, got {}", self.temperature));
        }
        self.noise.validate()?;
        let adversarial = matches!(self.model, ModelKind::EbganMdn | ModelKind::Ebgan | ModelKind::Cgan | ModelKind::Ibc);
        if adversarial && self.inner_steps == 0 {
            return fail("inner update count must be positive".into());
        }
        if matches!(self.model, ModelKind::EbganMdn | ModelKind::Mdn) && self.components == 0 {
            return fail("mixture needs at least one component".into());
        }
        if self.infonce_mode == InfonceMode::EqualRatio && self.negatives == 0 {
            return fail("equal-ratio inclusion needs at least one negative".into());
        }
        if self.model == ModelKind::Ibc && self.negatives == 0 {
            return fail("contrastive training needs at least one negative".into());
        }
        Ok(())
    }
}
