//! Repeated cross-validation with per-fold model selection.

use std::fmt::Debug;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{FoldPlan, FoldSpec};
use super::metrics::{ccc, pcc, rmse};
use crate::error::{Error, Result};
use crate::stats::std_population;

/// Anything that can be fitted on a set of items and then predict others.
///
/// Items are indices into the experiment's data; the learner owns the features.
pub trait Learner: Sync {
    type Config: Clone + Debug + Serialize + Send + Sync;
    type Model: Send;

    /// Fits on `train`, choosing epochs on `validation`. Returns the model and
    /// its validation concordance (`None` if undefined).
    fn fit(&self, config: &Self::Config, train: &[usize], validation: &[usize], seed: u64) -> Result<(Self::Model, Option<f64>)>;

    fn predict(&self, model: &Self::Model, items: &[usize]) -> Result<Vec<f64>>;
}

/// Subject and regression target of every item.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentData<'a> {
    pub subjects: &'a [String],
    pub targets: &'a [f64],
}

impl ExperimentData<'_> {
    pub fn items_of(&self, subjects: &[String]) -> Vec<usize> {
        (0..self.subjects.len())
            .filter(|&i| subjects.contains(&self.subjects[i]))
            .collect()
    }
}

/// Test measures laid out `folds x runs`; `None` marks an undefined metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMatrix {
    pub values: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Mean over every defined entry.
    pub mean: f64,
    /// Mean over runs of the (population) standard deviation across that run's folds.
    pub spread: f64,
    pub n_defined: usize,
    pub n_undefined: usize,
}

impl ResultMatrix {
    pub fn new(n_folds: usize, n_runs: usize) -> Self {
        ResultMatrix {
            values: vec![vec![None; n_runs]; n_folds],
        }
    }

    pub fn n_folds(&self) -> usize {
        self.values.len()
    }

    pub fn n_runs(&self) -> usize {
        self.values.first().map_or(0, |r| r.len())
    }

    pub fn defined(&self) -> Vec<f64> {
        self.values.iter().flatten().flatten().copied().collect()
    }

    pub fn run_column(&self, run: usize) -> Vec<f64> {
        self.values.iter().filter_map(|row| row[run]).collect()
    }

    pub fn summary(&self) -> Result<Summary> {
        let all = self.defined();
        let n_undefined = self.n_folds() * self.n_runs() - all.len();
        if all.is_empty() {
            return Err(Error::Undefined("no defined entries in result matrix".into()));
        }
        let spreads: Vec<f64> = (0..self.n_runs())
            .map(|r| self.run_column(r))
            .filter(|c| !c.is_empty())
            .map(|c| std_population(&c))
            .collect();
        Ok(Summary {
            mean: all.iter().sum::<f64>() / all.len() as f64,
            spread: spreads.iter().sum::<f64>() / spreads.len() as f64,
            n_defined: all.len(),
            n_undefined,
        })
    }

    /// Entry-wise `self - other`, in fold-major order; both must be fully defined.
    pub fn differences(&self, other: &ResultMatrix) -> Result<Vec<f64>> {
        if self.n_folds() != other.n_folds() || self.n_runs() != other.n_runs() {
            return Err(Error::Shape("result matrices differ in shape".into()));
        }
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Ok(a - b),
                _ => Err(Error::Undefined("paired comparison over an undefined entry".into())),
            })
            .collect()
    }
}

/// Outcome of one (run, test fold) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub run: usize,
    /// 1-based index of the test fold.
    pub fold: usize,
    pub split: FoldSpec,
    /// Index into the grid of the configuration chosen on validation.
    pub config_index: usize,
    pub validation_ccc: Option<f64>,
    pub pcc: Option<f64>,
    pub ccc: Option<f64>,
    pub rmse: Option<f64>,
    pub test_items: Vec<usize>,
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub pcc: Summary,
    pub ccc: Summary,
    pub rmse: Summary,
}

#[derive(Debug)]
pub struct Experiment<M> {
    pub pcc: ResultMatrix,
    pub ccc: ResultMatrix,
    pub rmse: ResultMatrix,
    pub folds: Vec<FoldRecord>,
    /// Selected model for each entry of `folds`.
    pub models: Vec<M>,
}

/// Serializable view of an experiment without its models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub pcc: ResultMatrix,
    pub ccc: ResultMatrix,
    pub rmse: ResultMatrix,
    pub summary: ExperimentSummary,
    pub folds: Vec<FoldRecord>,
}

impl<M> Experiment<M> {
    pub fn summary(&self) -> Result<ExperimentSummary> {
        Ok(ExperimentSummary {
            pcc: self.pcc.summary()?,
            ccc: self.ccc.summary()?,
            rmse: self.rmse.summary()?,
        })
    }

    pub fn report(&self) -> Result<ExperimentReport> {
        Ok(ExperimentReport {
            pcc: self.pcc.clone(),
            ccc: self.ccc.clone(),
            rmse: self.rmse.clone(),
            summary: self.summary()?,
            folds: self.folds.clone(),
        })
    }
}

/// SplitMix64 finalizer over a base seed and a cell coordinate.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Undefined(msg)) => {
            warn!("undefined test metric: {msg}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// For each (run, test fold): trains every grid config, keeps the one with the
/// best validation concordance (first on ties) and scores it once on the test fold.
pub fn run_experiment<L: Learner>(
    plans: &[FoldPlan],
    grid: &[L::Config],
    data: ExperimentData<'_>,
    learner: &L,
    seed: u64,
) -> Result<Experiment<L::Model>> {
    if plans.is_empty() || grid.is_empty() {
        return Err(Error::Config("experiment needs at least one plan and one config".into()));
    }
    if data.subjects.len() != data.targets.len() {
        return Err(Error::Shape("subjects and targets differ in length".into()));
    }
    let n_folds = plans[0].n_folds();
    if plans.iter().any(|p| p.n_folds() != n_folds) {
        return Err(Error::Config("fold plans differ in fold count".into()));
    }
    let cells: Vec<(usize, usize)> = (0..plans.len())
        .flat_map(|r| (0..n_folds).map(move |s| (r, s)))
        .collect();

    let results: Vec<Result<(FoldRecord, L::Model)>> = cells
        .par_iter()
        .map(|&(r, s)| {
            let plan = &plans[r];
            let split = FoldSpec::from_plan(plan, s);
            let train = data.items_of(&split.train);
            let validation = data.items_of(&split.validation);
            let test = data.items_of(&split.test);
            let mut best: Option<(usize, Option<f64>, L::Model)> = None;
            for (ci, cfg) in grid.iter().enumerate() {
                let cell_seed = derive_seed(seed, &[plan.run as u64, s as u64, ci as u64]);
                let (model, vc) = learner.fit(cfg, &train, &validation, cell_seed)?;
                let better = match &best {
                    None => true,
                    Some((_, prev, _)) => match (vc, prev) {
                        (Some(c), Some(p)) => c > *p,
                        (Some(_), None) => true,
                        _ => false,
                    },
                };
                if better {
                    best = Some((ci, vc, model));
                }
            }
            let (config_index, validation_ccc, model) = best.expect("grid is nonempty");
            let predictions = learner.predict(&model, &test)?;
            let truth: Vec<f64> = test.iter().map(|&i| data.targets[i]).collect();
            let rec = FoldRecord {
                run: plan.run,
                fold: s + 1,
                split,
                config_index,
                validation_ccc,
                pcc: defined(pcc(&predictions, &truth))?,
                ccc: defined(ccc(&predictions, &truth))?,
                rmse: defined(rmse(&predictions, &truth))?,
                test_items: test,
                predictions,
            };
            info!(
                "run {} fold {}: config {} pcc {:?} ccc {:?}",
                rec.run, rec.fold, rec.config_index, rec.pcc, rec.ccc
            );
            Ok((rec, model))
        })
        .collect();

    let mut exp = Experiment {
        pcc: ResultMatrix::new(n_folds, plans.len()),
        ccc: ResultMatrix::new(n_folds, plans.len()),
        rmse: ResultMatrix::new(n_folds, plans.len()),
        folds: Vec::with_capacity(cells.len()),
        models: Vec::with_capacity(cells.len()),
    };
    for ((r, s), res) in cells.into_iter().zip(results) {
        let (rec, model) = res?;
        exp.pcc.values[s][r] = rec.pcc;
        exp.ccc.values[s][r] = rec.ccc;
        exp.rmse.values[s][r] = rec.rmse;
        exp.folds.push(rec);
        exp.models.push(model);
    }
    Ok(exp)
}

/// Mean target of the training items; a baseline and a stand-in for tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanLearner<'a> {
    pub targets: &'a [f64],
}

impl Learner for MeanLearner<'_> {
    type Config = ();
    type Model = f64;

    fn fit(&self, _: &(), train: &[usize], _: &[usize], _: u64) -> Result<(f64, Option<f64>)> {
        if train.is_empty() {
            return Err(Error::Config("empty training split".into()));
        }
        Ok((train.iter().map(|&i| self.targets[i]).sum::<f64>() / train.len() as f64, None))
    }

    fn predict(&self, model: &f64, items: &[usize]) -> Result<Vec<f64>> {
        Ok(vec![*model; items.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::folds::{build_fold_plans, build_fold_plans_with};

    /// Predicts target + a config-dependent offset; config 1 is the best.
    struct Offset<'a> {
        targets: &'a [f64],
    }

    impl Learner for Offset<'_> {
        type Config = f64;
        type Model = f64;
        fn fit(&self, cfg: &f64, _: &[usize], val: &[usize], _: u64) -> Result<(f64, Option<f64>)> {
            let p: Vec<f64> = val.iter().map(|&i| self.targets[i] + cfg).collect();
            let t: Vec<f64> = val.iter().map(|&i| self.targets[i]).collect();
            Ok((*cfg, ccc(&p, &t).ok()))
        }
        fn predict(&self, m: &f64, items: &[usize]) -> Result<Vec<f64>> {
            Ok(items.iter().map(|&i| self.targets[i] + m + 0.01 * (i % 3) as f64).collect())
        }
    }

    fn corpus(n_subjects: usize) -> (Vec<String>, Vec<f64>) {
        let mut s = Vec::new();
        let mut t = Vec::new();
        for j in 0..n_subjects {
            for k in 0..5 {
                s.push(format!("S{j:02}"));
                t.push(((j * 5 + k) as f64 * 0.37).sin());
            }
        }
        (s, t)
    }

    #[test]
    fn thirty_entries_and_selection() {
        let (s, t) = corpus(12);
        let ids: Vec<String> = (0..12).map(|j| format!("S{j:02}")).collect();
        let plans = build_fold_plans(&ids, 1).unwrap();
        let learner = Offset { targets: &t };
        let data = ExperimentData {
            subjects: &s,
            targets: &t,
        };
        let exp = run_experiment(&plans, &[0.5, 0.0, 0.2], data, &learner, 9).unwrap();
        assert_eq!(exp.folds.len(), 30);
        assert_eq!(exp.pcc.defined().len(), 30);
        assert!(exp.folds.iter().all(|f| f.config_index == 1));
        let sum = exp.summary().unwrap();
        let mean30 = exp.ccc.defined().iter().sum::<f64>() / 30.0;
        assert!((sum.ccc.mean - mean30).abs() < 1e-15);
    }

    #[test]
    fn constant_model_metrics_are_undefined() {
        let (s, t) = corpus(6);
        let ids: Vec<String> = (0..6).map(|j| format!("S{j:02}")).collect();
        let plans = build_fold_plans_with(&ids, 2, 1, 2).unwrap();
        let data = ExperimentData {
            subjects: &s,
            targets: &t,
        };
        let exp = run_experiment(&plans, &[()], data, &MeanLearner { targets: &t }, 0).unwrap();
        assert_eq!(exp.folds.len(), 3);
        assert!(exp.pcc.defined().is_empty());
        assert_eq!(exp.rmse.defined().len(), 3);
        assert!(exp.pcc.summary().is_err());
    }

    #[test]
    fn summary_rule() {
        let mut m = ResultMatrix::new(2, 2);
        m.values = vec![vec![Some(1.0), Some(3.0)], vec![Some(2.0), Some(7.0)]];
        let s = m.summary().unwrap();
        assert_eq!(s.mean, 13.0 / 4.0);
        assert_eq!(s.spread, (0.5 + 2.0) / 2.0);
    }

    #[test]
    fn seeds_are_distinct_per_cell() {
        let a = derive_seed(1, &[1, 0, 0]);
        assert_ne!(a, derive_seed(1, &[1, 1, 0]));
        assert_ne!(a, derive_seed(2, &[1, 0, 0]));
        assert_eq!(a, derive_seed(1, &[1, 0, 0]));
    }
}
