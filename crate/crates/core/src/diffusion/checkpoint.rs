//! Versioned JSON checkpoints of trained denoisers.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::embedding::RbfGrid;
use super::model::{DenoiserParams, ModelConfig};
use super::schedule::NoiseSchedule;
use super::tensor::Tensor;
use crate::error::DiffusionError;
use crate::property::PropertyKind;

pub const CHECKPOINT_FORMAT: &str = "symgen.checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    #[serde(flatten)]
    tensor: Tensor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    property: PropertyKind,
    config: ModelConfig,
    rbf: RbfGrid,
    schedule: NoiseSchedule,
    tensors: Vec<NamedTensor>,
}

/// A trained denoiser with the schedule it was trained under.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: DenoiserParams,
    pub schedule: NoiseSchedule,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String, DiffusionError> {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            property: self.params.property,
            config: self.params.config,
            rbf: self.params.rbf,
            schedule: self.schedule.clone(),
            tensors: self
                .params
                .named_tensors()
                .map(|(n, t)| NamedTensor { name: n.to_string(), tensor: t.clone() })
                .collect(),
        };
        serde_json::to_string(&file).map_err(|e| DiffusionError::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, DiffusionError> {
        let head: serde_json::Value =
            serde_json::from_str(text).map_err(|e| DiffusionError::Checkpoint(e.to_string()))?;
        if head.get("format").and_then(|v| v.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(DiffusionError::Checkpoint("not a symgen checkpoint".into()));
        }
        let version = head.get("version").and_then(|v| v.as_u64());
        if version != Some(CHECKPOINT_VERSION as u64) {
            return Err(DiffusionError::Checkpoint(format!(
                "unsupported checkpoint version {version:?}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let file: CheckpointFile =
            serde_json::from_value(head).map_err(|e| DiffusionError::Checkpoint(e.to_string()))?;
        let schedule = file.schedule.validated()?;
        let named = file.tensors.into_iter().map(|n| (n.name, n.tensor)).collect();
        let params = DenoiserParams::from_named(file.config, file.property, file.rbf, named)?;
        Ok(Self { params, schedule })
    }

    pub fn save(&self, path: &Path) -> Result<(), DiffusionError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DiffusionError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
