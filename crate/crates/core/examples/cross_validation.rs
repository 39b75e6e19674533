//! Subject-independent repeated cross-validation of two compact Conv-Pool
//! settings on a synthetic corpus, compared with the corrected paired t-test.
//!
//! Small on purpose: two runs and a few epochs finish in about a minute.

use moodcall::dsp::FeatureKind;
use moodcall::eval::{
    build_fold_plans_with, corrected_paired_ttest, run_experiment, summary_table, ExperimentData, DEFAULT_DF,
    DEFAULT_TEST_TRAIN_RATIO,
};
use moodcall::mood::Dimension;
use moodcall::nn::{Architecture, ConvPoolConfig};
use moodcall::pipeline::{extract_features, Dataset, NeuralLearner, TrainOverrides};
use moodcall::synth::{generate_corpus, SynthConfig};

fn main() -> moodcall::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| moodcall::Error::Config(e.to_string()))?;
    let (corpus, _) = generate_corpus(
        &SynthConfig {
            seed: 1,
            calls_per_week: 1,
            ..SynthConfig::default()
        },
        dir.path(),
    )?;
    let set = extract_features(&corpus.manifest, &corpus.manifest.segments, dir.path(), FeatureKind::LogMfb)?;
    let labels = corpus.truth.labels();
    let data = Dataset::build(&set, &labels, Dimension::Activation)?;
    let plans = build_fold_plans_with(&data.unique_subjects(), 7, 2, 2)?;
    let learner = NeuralLearner {
        features: &set,
        data: &data,
        overrides: TrainOverrides {
            learning_rate: Some(1e-3),
            batch_size: Some(16),
            epochs: Some(6),
        },
    };
    let conv = |width| {
        Architecture::ConvPool(ConvPoolConfig {
            input_channels: FeatureKind::LogMfb.dim(),
            layers: 1,
            width,
            kernel: 4,
        })
    };
    let exp_data = ExperimentData {
        subjects: &data.subjects,
        targets: &data.targets,
    };
    let narrow = run_experiment(&plans, &[conv(2)], exp_data, &learner, 3)?;
    let wide = run_experiment(&plans, &[conv(8)], exp_data, &learner, 3)?;

    let (sn, sw) = (narrow.summary()?, wide.summary()?);
    print!(
        "{}",
        summary_table(
            &["width 2", "width 8"],
            &[
                ("PCC".into(), vec![Some(sn.pcc), Some(sw.pcc)]),
                ("CCC".into(), vec![Some(sn.ccc), Some(sw.ccc)]),
                ("RMSE".into(), vec![Some(sn.rmse), Some(sw.rmse)]),
            ],
        )
    );
    // a width-2 net can collapse to a constant output, leaving PCC undefined
    // on that fold, so the paired test runs on RMSE, which always exists
    let diffs = wide.rmse.differences(&narrow.rmse)?;
    let t = corrected_paired_ttest(&diffs, DEFAULT_TEST_TRAIN_RATIO, DEFAULT_DF)?;
    println!("wide - narrow RMSE: mean {:+.3}, t = {:.2}, p = {:.3}", t.mean, t.t, t.p);
    Ok(())
}
