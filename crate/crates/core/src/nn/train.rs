use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::model::{Architecture, Example, Input, Model};
use crate::error::{Error, Result};
use crate::eval::metrics::ccc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Batch 64 with 100 epochs for the dense net and 15 for the convolutional one.
    pub fn for_architecture(arch: &Architecture, seed: u64) -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            batch_size: 64,
            epochs: match arch {
                Architecture::Ffnn(_) => 100,
                Architecture::ConvPool(_) => 15,
            },
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Root of the example-weighted mean of minibatch MSEs seen during the epoch.
    pub train_rmse: f64,
    /// `None` when concordance is undefined (e.g. constant predictions).
    pub validation_ccc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the highest validation concordance.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    /// 1-based index into `history`.
    pub best_epoch: usize,
    pub best_validation_ccc: Option<f64>,
}

/// Index of the first maximum defined score, or the last epoch when none is defined.
pub fn best_epoch(history: &[EpochRecord]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for r in history {
        if let Some(c) = r.validation_ccc {
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((r.epoch, c));
            }
        }
    }
    best.map(|(e, _)| e).unwrap_or(history.len())
}

pub fn validation_ccc(model: &Model, validation: &[Example<'_>]) -> Result<Option<f64>> {
    let inputs: Vec<Input> = validation.iter().map(|e| e.input).collect();
    let preds = model.predict_many(&inputs)?;
    let truth: Vec<f64> = validation.iter().map(|e| e.target).collect();
    match ccc(&preds, &truth) {
        Ok(c) => Ok(Some(c)),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Minibatch Adam on MSE, evaluating validation concordance after every epoch
/// and keeping the best epoch's weights.
pub fn train(
    arch: Architecture,
    train_set: &[Example<'_>],
    validation: &[Example<'_>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    if validation.len() < 2 {
        return Err(Error::Config("validation set needs at least 2 examples".into()));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::Config("batch size and epochs must be positive".into()));
    }
    if let Some(i) = train_set.iter().chain(validation).position(|e| !e.target.is_finite()) {
        return Err(Error::NonFinite(format!("target of example {i}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::init(arch, &mut rng)?;
    let mut state = AdamState::new(model.params().len());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sq_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set[i]));
            let (loss, grad) = model.mse_and_gradient(&batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
            }
            sq_sum += loss * batch.len() as f64;
            adam_step(&cfg.adam, model.params_mut(), &grad, &mut state)?;
        }
        let train_rmse = (sq_sum / train_set.len() as f64).sqrt();
        let vc = validation_ccc(&model, validation)?;
        debug!("epoch {epoch}: train rmse {train_rmse:.4}, validation ccc {vc:?}");
        if let Some(c) = vc {
            if best.as_ref().is_none_or(|(b, _)| c > *b) {
                best = Some((c, model.params().to_vec()));
            }
        }
        history.push(EpochRecord {
            epoch,
            train_rmse,
            validation_ccc: vc,
        });
    }

    let best_epoch = best_epoch(&history);
    let best_validation_ccc = history[best_epoch - 1].validation_ccc;
    if let Some((_, params)) = best {
        model = Model::from_params(arch, params)?;
    }
    info!(
        "trained {} for {} epochs, best epoch {best_epoch} (validation ccc {best_validation_ccc:?})",
        arch.name(),
        cfg.epochs
    );
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_validation_ccc,
    })
}
