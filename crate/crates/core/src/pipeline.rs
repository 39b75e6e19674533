//! Glue between stages: feature extraction over a manifest, labeled datasets,
//! a [`Learner`] backed by the neural models, and ensemble prediction.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::aggregate::LabelRecord;
use crate::corpus::{Manifest, Segment};
use crate::dsp::{functionals, log_mfb, read_wav, zscore_apply_rows, zscore_fit_rows, FeatureItem, FeatureKind, FeatureSet, NormStats};
use crate::error::{Error, Result};
use crate::eval::Learner;
use crate::mood::{Dimension, MemberOutputs};
use crate::sad::{form_segments, sad, SadConfig, SegmentMode};
use crate::nn::{train, Architecture, Example, Input, Model, ModelArtifact, TrainConfig, TrainOutcome};

/// Runs speech detection on every admissible call and forms segments.
/// Calls over the length limit are skipped with a warning.
pub fn segment_calls(manifest: &Manifest, audio_root: &Path, cfg: &SadConfig, mode: SegmentMode) -> Result<Vec<Segment>> {
    cfg.validate()?;
    let per_call: Vec<Vec<Segment>> = manifest
        .calls
        .par_iter()
        .map(|call| {
            if !call.admissible() {
                warn!("call {} is {:.0} s long, skipping", call.call_id, call.duration_s);
                return Ok(Vec::new());
            }
            let audio = read_wav(&audio_root.join(&call.audio_path))?;
            let mask = sad(&audio, cfg)?;
            Ok(form_segments(&mask, &call.call_id, cfg, mode))
        })
        .collect::<Result<_>>()?;
    Ok(per_call.into_iter().flatten().collect())
}

/// Features for every segment, reading each call's audio once. Audio paths
/// resolve against `audio_root`. Segments too short to frame, or without
/// voiced frames for functionals, come back with `valid = false`.
pub fn extract_features(manifest: &Manifest, segments: &[Segment], audio_root: &Path, kind: FeatureKind) -> Result<FeatureSet> {
    let mut by_call: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in segments.iter().enumerate() {
        by_call.entry(s.call_id.as_str()).or_default().push(i);
    }
    let per_call: Vec<Vec<(usize, FeatureItem)>> = by_call
        .into_par_iter()
        .map(|(call_id, idx)| {
            let call = manifest
                .call(call_id)
                .ok_or_else(|| Error::NotFound(format!("call {call_id}")))?;
            let audio = read_wav(&audio_root.join(&call.audio_path))?;
            idx.into_iter()
                .map(|i| {
                    let s = &segments[i];
                    let clip = audio.slice_seconds(s.start_s, s.end_s);
                    let (data, valid) = match kind {
                        FeatureKind::LogMfb => {
                            let seq = log_mfb(&clip)?;
                            let ok = !seq.is_empty();
                            (seq.frames, ok)
                        }
                        FeatureKind::Functionals => {
                            if clip.samples.is_empty() {
                                (vec![0.0; kind.dim()], false)
                            } else {
                                let f = functionals(&clip)?;
                                (f.values, f.valid)
                            }
                        }
                    };
                    Ok((
                        i,
                        FeatureItem {
                            id: s.segment_id.clone(),
                            data,
                            valid,
                        },
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut items: Vec<(usize, FeatureItem)> = per_call.into_iter().flatten().collect();
    items.sort_by_key(|(i, _)| *i);
    let mut set = FeatureSet::new(kind);
    set.items = items.into_iter().map(|(_, it)| it).collect();
    Ok(set)
}

/// Labeled items for one target, each pointing at a feature item.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub target: Dimension,
    pub ids: Vec<String>,
    pub subjects: Vec<String>,
    pub targets: Vec<f64>,
    /// Index into the feature set's items.
    pub feature_index: Vec<usize>,
}

impl Dataset {
    /// Joins labels with valid feature items by segment id. Labels without
    /// usable features are dropped with a warning.
    pub fn build(set: &FeatureSet, labels: &[LabelRecord], target: Dimension) -> Result<Self> {
        let pos: HashMap<&str, usize> = set.items.iter().enumerate().map(|(i, it)| (it.id.as_str(), i)).collect();
        let mut d = Dataset {
            target,
            ids: Vec::new(),
            subjects: Vec::new(),
            targets: Vec::new(),
            feature_index: Vec::new(),
        };
        let mut dropped = 0;
        for l in labels {
            match pos.get(l.segment_id.as_str()) {
                Some(&i) if set.items[i].valid && !set.items[i].data.is_empty() => {
                    d.ids.push(l.segment_id.clone());
                    d.subjects.push(l.subject_id.clone());
                    d.targets.push(match target {
                        Dimension::Activation => l.activation,
                        Dimension::Valence => l.valence,
                    });
                    d.feature_index.push(i);
                }
                _ => dropped += 1,
            }
        }
        if dropped > 0 {
            warn!("{dropped} labeled segment(s) have no usable features and were dropped");
        }
        if d.ids.is_empty() {
            return Err(Error::Config("no labeled segment has usable features".into()));
        }
        Ok(d)
    }

    /// Distinct subject ids, sorted.
    pub fn unique_subjects(&self) -> Vec<String> {
        let mut s = self.subjects.clone();
        s.sort();
        s.dedup();
        s
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Optimizer settings applied on top of each architecture's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOverrides {
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
}

impl TrainOverrides {
    pub fn config(&self, arch: &Architecture, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::for_architecture(arch, seed);
        if let Some(lr) = self.learning_rate {
            cfg.adam.learning_rate = lr;
        }
        if let Some(b) = self.batch_size {
            cfg.batch_size = b;
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        cfg
    }
}

/// A trained network with the normalization fitted on its training subjects.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub outcome: TrainOutcome,
    pub train_config: TrainConfig,
    pub norm: NormStats,
}

impl FittedModel {
    pub fn artifact(&self, target: Dimension) -> ModelArtifact {
        ModelArtifact::from_outcome(&self.outcome, self.train_config.clone(), target.as_str(), Some(self.norm.clone()))
    }
}

fn check_arch(arch: &Architecture, kind: FeatureKind) -> Result<()> {
    let ok = match arch {
        Architecture::Ffnn(c) => kind == FeatureKind::Functionals && c.input_dim == kind.dim(),
        Architecture::ConvPool(c) => kind == FeatureKind::LogMfb && c.input_channels == kind.dim(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{} architecture does not fit {:?} features of dimension {}",
            arch.name(),
            kind,
            kind.dim()
        )))
    }
}

fn as_input<'a>(arch: &Architecture, data: &'a [f64], dim: usize) -> Input<'a> {
    match arch {
        Architecture::Ffnn(_) => Input::Vector(data),
        Architecture::ConvPool(_) => Input::Sequence {
            frames: data,
            len: data.len() / dim,
        },
    }
}

/// Normalized copies of the given feature items.
fn normalized(set: &FeatureSet, items: impl Iterator<Item = usize>, norm: &NormStats) -> Vec<Vec<f64>> {
    items
        .map(|i| {
            let mut v = set.items[i].data.clone();
            zscore_apply_rows(&mut v, norm);
            v
        })
        .collect()
}

/// Trains one network per call: z-normalization is fitted on the training
/// items only, then Adam runs with per-epoch validation concordance.
#[derive(Debug, Clone)]
pub struct NeuralLearner<'a> {
    pub features: &'a FeatureSet,
    pub data: &'a Dataset,
    pub overrides: TrainOverrides,
}

impl NeuralLearner<'_> {
    fn examples<'b>(&self, arch: &Architecture, data: &'b [Vec<f64>], items: &[usize]) -> Vec<Example<'b>> {
        let dim = self.features.dim();
        data.iter()
            .zip(items)
            .map(|(x, &i)| Example {
                input: as_input(arch, x, dim),
                target: self.data.targets[i],
            })
            .collect()
    }

    /// Fits on explicit item lists; used by both the experiment and `train`.
    pub fn fit_items(&self, arch: &Architecture, train_items: &[usize], validation: &[usize], seed: u64) -> Result<FittedModel> {
        check_arch(arch, self.features.kind)?;
        let fi = |items: &[usize]| items.iter().map(|&i| self.data.feature_index[i]).collect::<Vec<_>>();
        let (tf, vf) = (fi(train_items), fi(validation));
        let norm = zscore_fit_rows(tf.iter().map(|&i| self.features.items[i].data.as_slice()), self.features.dim())?;
        let tx = normalized(self.features, tf.iter().copied(), &norm);
        let vx = normalized(self.features, vf.iter().copied(), &norm);
        let cfg = self.overrides.config(arch, seed);
        let outcome = train(*arch, &self.examples(arch, &tx, train_items), &self.examples(arch, &vx, validation), &cfg)?;
        Ok(FittedModel {
            outcome,
            train_config: cfg,
            norm,
        })
    }
}

impl Learner for NeuralLearner<'_> {
    type Config = Architecture;
    type Model = FittedModel;

    fn fit(&self, config: &Architecture, train: &[usize], validation: &[usize], seed: u64) -> Result<(FittedModel, Option<f64>)> {
        let m = self.fit_items(config, train, validation, seed)?;
        let vc = m.outcome.best_validation_ccc;
        Ok((m, vc))
    }

    fn predict(&self, model: &FittedModel, items: &[usize]) -> Result<Vec<f64>> {
        let arch = *model.outcome.model.architecture();
        let x = normalized(self.features, items.iter().map(|&i| self.data.feature_index[i]), &model.norm);
        let inputs: Vec<Input> = x.iter().map(|v| as_input(&arch, v, self.features.dim())).collect();
        model.outcome.model.predict_many(&inputs)
    }
}

/// Predictions of a saved model on the named feature items, normalized with
/// the statistics stored in the artifact.
pub fn artifact_predict(art: &ModelArtifact, set: &FeatureSet, ids: &[String]) -> Result<Vec<f64>> {
    check_arch(&art.architecture, set.kind)?;
    let model: Model = art.model()?;
    let pos: HashMap<&str, usize> = set.items.iter().enumerate().map(|(i, it)| (it.id.as_str(), i)).collect();
    let idx: Vec<usize> = ids
        .iter()
        .map(|id| {
            pos.get(id.as_str())
                .copied()
                .ok_or_else(|| Error::NotFound(format!("features for segment {id}")))
        })
        .collect::<Result<_>>()?;
    let x: Vec<Vec<f64>> = match &art.norm_stats {
        Some(n) => normalized(set, idx.iter().copied(), n),
        None => idx.iter().map(|&i| set.items[i].data.clone()).collect(),
    };
    let inputs: Vec<Input> = x.iter().map(|v| as_input(&art.architecture, v, set.dim())).collect();
    model.predict_many(&inputs)
}

/// One ensemble member: an activation model paired with a valence model.
pub fn member_outputs(activation: &ModelArtifact, valence: &ModelArtifact, set: &FeatureSet, ids: &[String]) -> Result<MemberOutputs> {
    Ok(MemberOutputs {
        activation: artifact_predict(activation, set, ids)?,
        valence: artifact_predict(valence, set, ids)?,
    })
}

/// Loads every artifact in the immediate subdirectories of `dir`, in name order.
pub fn load_artifacts(dir: &Path) -> Result<Vec<ModelArtifact>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut subdirs: Vec<_> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(crate::nn::artifact::HEADER_FILE).is_file())
        .collect();
    subdirs.sort();
    subdirs.iter().map(|p| ModelArtifact::load(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{build_fold_plans_with, run_experiment, ExperimentData};
    use crate::nn::FfnnConfig;

    /// Functionals-shaped items whose first feature carries the target.
    fn toy(n_subjects: usize, per: usize) -> (FeatureSet, Vec<LabelRecord>) {
        let mut set = FeatureSet::new(FeatureKind::Functionals);
        let mut labels = Vec::new();
        for s in 0..n_subjects {
            for k in 0..per {
                let y = ((s * per + k) as f64 * 0.618).fract() * 2.0 - 1.0;
                let id = format!("S{s}_c0_s{k:03}");
                let mut data: Vec<f64> = (0..88).map(|j| ((j * 7 + k * 3 + s) as f64 * 0.37).sin()).collect();
                data[0] = 3.0 * y;
                set.items.push(FeatureItem {
                    id: id.clone(),
                    data,
                    valid: true,
                });
                labels.push(LabelRecord {
                    segment_id: id,
                    call_id: format!("S{s}_c0"),
                    subject_id: format!("S{s}"),
                    activation: y,
                    valence: -y,
                });
            }
        }
        (set, labels)
    }

    #[test]
    fn dataset_skips_invalid_and_unknown() {
        let (mut set, mut labels) = toy(2, 3);
        set.items[0].valid = false;
        labels.push(LabelRecord {
            segment_id: "ghost".into(),
            ..labels[0].clone()
        });
        let d = Dataset::build(&set, &labels, Dimension::Valence).unwrap();
        assert_eq!(d.len(), 5);
        assert_eq!(d.targets[0], labels[1].valence);
    }

    #[test]
    fn learner_runs_cross_validation() {
        let (set, labels) = toy(6, 12);
        let data = Dataset::build(&set, &labels, Dimension::Activation).unwrap();
        let learner = NeuralLearner {
            features: &set,
            data: &data,
            overrides: TrainOverrides {
                learning_rate: Some(1e-2),
                batch_size: Some(8),
                epochs: Some(20),
            },
        };
        let plans = build_fold_plans_with(&data.unique_subjects(), 1, 1, 2).unwrap();
        let grid = [Architecture::Ffnn(FfnnConfig {
            input_dim: 88,
            hidden_layers: 1,
            width: 8,
        })];
        let exp = run_experiment(
            &plans,
            &grid,
            ExperimentData {
                subjects: &data.subjects,
                targets: &data.targets,
            },
            &learner,
            3,
        )
        .unwrap();
        assert_eq!(exp.folds.len(), 3);
        let s = exp.summary().unwrap();
        assert!(s.pcc.mean > 0.8, "pcc {}", s.pcc.mean);

        let dir = tempfile::tempdir().unwrap();
        let art = exp.models[0].artifact(Dimension::Activation);
        art.save(&dir.path().join("m0")).unwrap();
        let loaded = load_artifacts(dir.path()).unwrap();
        assert_eq!(loaded.len(), 1);
        let rec = &exp.folds[0];
        let ids: Vec<String> = rec.test_items.iter().map(|&i| data.ids[i].clone()).collect();
        let p = artifact_predict(&loaded[0], &set, &ids).unwrap();
        for (a, b) in p.iter().zip(&rec.predictions) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn architecture_must_match_features() {
        let (set, labels) = toy(3, 2);
        let data = Dataset::build(&set, &labels, Dimension::Activation).unwrap();
        let learner = NeuralLearner {
            features: &set,
            data: &data,
            overrides: TrainOverrides::default(),
        };
        let bad = Architecture::Ffnn(FfnnConfig {
            input_dim: 40,
            hidden_layers: 1,
            width: 4,
        });
        assert!(matches!(learner.fit_items(&bad, &[0, 1], &[2, 3], 0), Err(Error::Config(_))));
    }
}
