//! Trained model on disk: `model.json` header plus `weights.f32` (little-endian).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Architecture, Model};
use super::train::{EpochRecord, TrainConfig, TrainOutcome};
use crate::dsp::NormStats;
use crate::error::{read_json, write_json, Error, Result};

pub const HEADER_FILE: &str = "model.json";
pub const WEIGHTS_FILE: &str = "weights.f32";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub architecture: Architecture,
    pub train_config: TrainConfig,
    /// Regression target the model predicts, e.g. `activation`.
    pub target: String,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_validation_ccc: Option<f64>,
    /// Feature normalization fitted on the training subjects.
    pub norm_stats: Option<NormStats>,
    pub n_params: usize,
    #[serde(skip)]
    pub weights: Vec<f32>,
}

impl ModelArtifact {
    /// Weights are rounded to f32 here, so a saved and reloaded artifact
    /// predicts exactly what this one does.
    pub fn from_outcome(
        outcome: &TrainOutcome,
        train_config: TrainConfig,
        target: impl Into<String>,
        norm_stats: Option<NormStats>,
    ) -> Self {
        let weights: Vec<f32> = outcome.model.params().iter().map(|&p| p as f32).collect();
        ModelArtifact {
            architecture: *outcome.model.architecture(),
            train_config,
            target: target.into(),
            history: outcome.history.clone(),
            best_epoch: outcome.best_epoch,
            best_validation_ccc: outcome.best_validation_ccc,
            norm_stats,
            n_params: weights.len(),
            weights,
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::from_params(self.architecture, self.weights.iter().map(|&w| w as f64).collect())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join(HEADER_FILE), self)?;
        let bytes: Vec<u8> = self.weights.iter().flat_map(|w| w.to_le_bytes()).collect();
        let path = dir.join(WEIGHTS_FILE);
        std::fs::write(&path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut art: ModelArtifact = read_json(&dir.join(HEADER_FILE))?;
        let path = dir.join(WEIGHTS_FILE);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let expected = Model::n_params(&art.architecture);
        if art.n_params != expected || bytes.len() != expected * 4 {
            return Err(Error::Shape(format!(
                "{}: {} bytes, header says {} params, architecture needs {expected}",
                path.display(),
                bytes.len(),
                art.n_params
            )));
        }
        art.weights = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(art)
    }
}
