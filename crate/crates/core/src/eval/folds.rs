use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RUNS: usize = 5;
pub const DEFAULT_FOLD_SIZE: usize = 2;

/// One random partition of the subjects into equal folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    /// 1-based.
    pub run: usize,
    pub folds: Vec<Vec<String>>,
}

/// Fold indices playing each role at one rotation step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldRoles {
    pub test: usize,
    pub validation: usize,
    pub train: Vec<usize>,
}

impl FoldPlan {
    pub fn n_folds(&self) -> usize {
        self.folds.len()
    }

    /// Step `s` tests fold `s`, validates on the next fold (cyclically) and
    /// trains on the rest.
    pub fn roles(&self, step: usize) -> FoldRoles {
        let k = self.folds.len();
        let validation = (step + 1) % k;
        FoldRoles {
            test: step,
            validation,
            train: (0..k).filter(|&f| f != step && f != validation).collect(),
        }
    }

    pub fn subjects_of(&self, folds: &[usize]) -> Vec<String> {
        folds.iter().flat_map(|&f| self.folds[f].iter().cloned()).collect()
    }
}

/// Subject membership of one (run, step) split, as passed to a trainer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

impl FoldSpec {
    pub fn from_plan(plan: &FoldPlan, step: usize) -> Self {
        let r = plan.roles(step);
        FoldSpec {
            train: plan.subjects_of(&r.train),
            validation: plan.subjects_of(&[r.validation]),
            test: plan.subjects_of(&[r.test]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for s in self.train.iter().chain(&self.validation).chain(&self.test) {
            if !seen.insert(s) {
                return Err(Error::Validation(format!("subject {s} appears in more than one split")));
            }
        }
        if self.train.is_empty() || self.validation.is_empty() {
            return Err(Error::Config("fold spec needs train and validation subjects".into()));
        }
        Ok(())
    }
}

/// Five runs of two-subject folds.
pub fn build_fold_plans(subject_ids: &[String], seed: u64) -> Result<Vec<FoldPlan>> {
    build_fold_plans_with(subject_ids, seed, DEFAULT_RUNS, DEFAULT_FOLD_SIZE)
}

/// Independent shuffles per run from one seeded stream. Subjects are sorted
/// first so the plans do not depend on input order.
pub fn build_fold_plans_with(subject_ids: &[String], seed: u64, runs: usize, fold_size: usize) -> Result<Vec<FoldPlan>> {
    let mut subjects: Vec<String> = subject_ids.to_vec();
    subjects.sort();
    if subjects.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Validation("duplicate subject id in fold plan input".into()));
    }
    if fold_size == 0 || subjects.len() % fold_size != 0 {
        return Err(Error::Config(format!(
            "{} subjects cannot be split into folds of {fold_size}",
            subjects.len()
        )));
    }
    if subjects.len() / fold_size < 3 {
        return Err(Error::Config("need at least three folds (test, validation, train)".into()));
    }
    if runs == 0 {
        return Err(Error::Config("need at least one run".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((1..=runs)
        .map(|run| {
            let mut order = subjects.clone();
            order.shuffle(&mut rng);
            FoldPlan {
                run,
                folds: order.chunks(fold_size).map(|c| c.to_vec()).collect(),
            }
        })
        .collect())
}
