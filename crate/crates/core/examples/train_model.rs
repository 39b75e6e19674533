//! Trains one FFNN on utterance functionals for a fixed subject split, saves
//! the artifact and reloads it for prediction.

use moodcall::dsp::FeatureKind;
use moodcall::eval::{pcc, FoldSpec};
use moodcall::mood::Dimension;
use moodcall::nn::{Architecture, FfnnConfig, ModelArtifact};
use moodcall::pipeline::{artifact_predict, extract_features, Dataset, NeuralLearner, TrainOverrides};
use moodcall::synth::{generate_corpus, SynthConfig};

fn main() -> moodcall::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| moodcall::Error::Config(e.to_string()))?;
    let (corpus, _) = generate_corpus(
        &SynthConfig {
            n_subjects: 6,
            seed: 2,
            ..SynthConfig::default()
        },
        dir.path(),
    )?;
    let set = extract_features(&corpus.manifest, &corpus.manifest.segments, dir.path(), FeatureKind::Functionals)?;
    let data = Dataset::build(&set, &corpus.truth.labels(), Dimension::Activation)?;
    let subjects = data.unique_subjects();
    let split = FoldSpec {
        train: subjects[..4].to_vec(),
        validation: vec![subjects[4].clone()],
        test: vec![subjects[5].clone()],
    };
    split.validate()?;
    let items = |ss: &[String]| -> Vec<usize> { (0..data.len()).filter(|&i| ss.contains(&data.subjects[i])).collect() };

    let learner = NeuralLearner {
        features: &set,
        data: &data,
        overrides: TrainOverrides {
            learning_rate: Some(1e-3),
            batch_size: Some(16),
            epochs: Some(20),
        },
    };
    let arch = Architecture::Ffnn(FfnnConfig {
        input_dim: FeatureKind::Functionals.dim(),
        hidden_layers: 2,
        width: 64,
    });
    let fitted = learner.fit_items(&arch, &items(&split.train), &items(&split.validation), 1)?;
    for e in &fitted.outcome.history {
        println!("epoch {:>2}: train rmse {:.4}  validation ccc {:?}", e.epoch, e.train_rmse, e.validation_ccc);
    }

    let model_dir = dir.path().join("model");
    fitted.artifact(Dimension::Activation).save(&model_dir)?;
    let art = ModelArtifact::load(&model_dir)?;
    let test = items(&split.test);
    let ids: Vec<String> = test.iter().map(|&i| data.ids[i].clone()).collect();
    let pred = artifact_predict(&art, &set, &ids)?;
    let truth: Vec<f64> = test.iter().map(|&i| data.targets[i]).collect();
    println!("held-out subject {}: pcc {:.3}", split.test[0], pcc(&pred, &truth)?);
    Ok(())
}
