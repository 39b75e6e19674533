//! Metrics, subject-independent cross-validation and significance testing.

pub mod experiment;
pub mod folds;
pub mod metrics;
pub mod report;
pub mod ttest;

pub use experiment::{
    derive_seed, run_experiment, Experiment, ExperimentData, ExperimentReport, ExperimentSummary, FoldRecord, Learner,
    MeanLearner, ResultMatrix, Summary,
};
pub use folds::{build_fold_plans, build_fold_plans_with, FoldPlan, FoldRoles, FoldSpec};
pub use metrics::{ccc, pcc, rmse};
pub use report::summary_table;
pub use ttest::{corrected_paired_ttest, CorrectedTTest, DEFAULT_DF, DEFAULT_TEST_TRAIN_RATIO};
