//! Versioned JSON parameter files for trained models.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datasets::TaskKind;
use crate::error::{Error, Result};
use crate::model::TrainedModel;
use crate::trainer::LossTrace;

pub const PARAMS_FORMAT: &str = "mmbc-params";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub format: String,
    pub version: u32,
    pub task: TaskKind,
    pub seed: u64,
    pub model: TrainedModel,
    pub trace: LossTrace,
}

impl ParamsFile {
    pub fn new(task: TaskKind, seed: u64, model: TrainedModel, trace: LossTrace) -> Self {
        Self {
            format: PARAMS_FORMAT.to_string(),
            version: PARAMS_VERSION,
            task,
            seed,
            model,
            trace,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: serde_json::Value = serde_json::from_str(text)?;
        let format = header.get("format").and_then(|v| v.as_str());
        let version = header.get("version").and_then(|v| v.as_u64());
        if format != Some(PARAMS_FORMAT) {
            return Err(Error::Format(format!("expected format `{PARAMS_FORMAT}`, found {format:?}")));
        }
        if version != Some(PARAMS_VERSION as u64) {
            return Err(Error::Format(format!("unsupported version {version:?}")));
        }
        Ok(serde_json::from_value(header)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Serializes non-finite floats as `null` and reads `null` back as NaN.
pub(crate) mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}
