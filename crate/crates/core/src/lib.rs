//! Multi-modal behavior cloning with an energy model trained jointly
//! against a mixture-density generator, plus the baselines, metrics and
//! experiment runner used to compare them on synthetic tasks.
//!
//! ```no_run
//! use mmbc::{DatasetSplits, SyntheticTask, TrainConfig, TaskKind, ModelKind, train_model, SeededRng};
//!
//! let data = DatasetSplits::generate(SyntheticTask::hyperbola(), 0).unwrap();
//! let config = TrainConfig::preset(TaskKind::Hyperbola, ModelKind::EbganMdn);
//! let (model, _trace) = train_model(&config, &data, 0).unwrap();
//! let actions = model.sample_actions(&[0.5], 10, &mut SeededRng::new(1)).unwrap();
//! assert_eq!(actions.len(), 10);
//! ```

pub mod adam;
pub mod baselines;
pub mod config;
pub mod datasets;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod mdn;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod rng;
pub mod serialize;
pub mod trainer;

pub use adam::AdamState;
pub use config::{ModelKind, TrainConfig};
pub use datasets::{DatasetSplits, Sample, SyntheticTask, TaskKind, TestPoint, Units};
pub use energy::{EnergyNet, InfonceConfig, InfonceMode};
pub use error::{Error, Result};
pub use experiment::{run_experiment, run_suite, EvalConfig, ExperimentConfig, RunRecord, Suite};
pub use mdn::{GmmParams, MdnGenerator, MixtureLayout, NoiseModel};
pub use metrics::MetricsReport;
pub use model::{train_model, ModelNets, TrainedModel};
pub use nn::{Activation, DenseNet};
pub use rng::{SeededRng, Stream};
pub use trainer::{AdversarialTrainer, EbganMdnModel, LossTrace};
