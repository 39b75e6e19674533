//! From segment-level emotion predictions to mood findings.
//!
//! Predictions on assessment-call segments are averaged over an ensemble,
//! z-normalized per subject against that subject's euthymic calls, and then
//! tested: manic vs depressed contrasts, correlation with clinical scores,
//! between-subject ANOVA and within-call variance.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CallKind, Manifest, MoodLabel};
use crate::error::{Error, Result};
use crate::eval::pcc;
use crate::stats::{correlation_test, one_way_anova, tukey_kramer_01, variance, welch_t_test, PairComparison, TTest};

/// Significance level of every test in the report.
pub const ALPHA: f64 = 0.01;
/// One model per (run, fold) of the default cross-validation.
pub const ENSEMBLE_SIZE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Activation,
    Valence,
}

impl Dimension {
    pub const ALL: [Dimension; 2] = [Dimension::Activation, Dimension::Valence];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Activation => "activation",
            Dimension::Valence => "valence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Ymrs,
    Hamd,
}

impl Scale {
    pub const ALL: [Scale; 2] = [Scale::Ymrs, Scale::Hamd];

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Ymrs => "YMRS",
            Scale::Hamd => "HamD",
        }
    }
}

/// Outputs of one ensemble member, aligned with a list of segment ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberOutputs {
    pub activation: Vec<f64>,
    pub valence: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub segment_id: String,
    pub activation: f64,
    pub valence: f64,
    pub member_activation: Vec<f64>,
    pub member_valence: Vec<f64>,
}

/// Mean of member outputs per segment. The member count must equal `expected`.
pub fn ensemble_mean(segment_ids: &[String], members: &[MemberOutputs], expected: usize) -> Result<Vec<EnsemblePrediction>> {
    if members.len() != expected {
        return Err(Error::Config(format!(
            "ensemble has {} members, expected {expected}",
            members.len()
        )));
    }
    for (m, out) in members.iter().enumerate() {
        if out.activation.len() != segment_ids.len() || out.valence.len() != segment_ids.len() {
            return Err(Error::Shape(format!(
                "member {m} has {}/{} outputs for {} segments",
                out.activation.len(),
                out.valence.len(),
                segment_ids.len()
            )));
        }
    }
    let n = members.len() as f64;
    Ok(segment_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let member_activation: Vec<f64> = members.iter().map(|m| m.activation[i]).collect();
            let member_valence: Vec<f64> = members.iter().map(|m| m.valence[i]).collect();
            EnsemblePrediction {
                segment_id: id.clone(),
                activation: member_activation.iter().sum::<f64>() / n,
                valence: member_valence.iter().sum::<f64>() / n,
                member_activation,
                member_valence,
            }
        })
        .collect())
}

/// A prediction on an assessment-call segment, joined with that call's scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub segment_id: String,
    pub call_id: String,
    pub subject_id: String,
    pub activation: f64,
    pub valence: f64,
    pub hamd: u32,
    pub ymrs: u32,
    pub mood: MoodLabel,
}

impl ScoredPrediction {
    pub fn value(&self, d: Dimension) -> f64 {
        match d {
            Dimension::Activation => self.activation,
            Dimension::Valence => self.valence,
        }
    }

    fn value_mut(&mut self, d: Dimension) -> &mut f64 {
        match d {
            Dimension::Activation => &mut self.activation,
            Dimension::Valence => &mut self.valence,
        }
    }

    pub fn score(&self, s: Scale) -> f64 {
        match s {
            Scale::Ymrs => self.ymrs as f64,
            Scale::Hamd => self.hamd as f64,
        }
    }
}

/// Keeps predictions on segments of assessment calls with a linked assessment;
/// each inherits its call's HamD and YMRS. Unknown segment ids are an error.
pub fn link_scores(predictions: &[EnsemblePrediction], manifest: &Manifest) -> Result<Vec<ScoredPrediction>> {
    let segments: HashMap<&str, &str> = manifest
        .segments
        .iter()
        .map(|s| (s.segment_id.as_str(), s.call_id.as_str()))
        .collect();
    let mut out = Vec::new();
    for p in predictions {
        let call_id = segments
            .get(p.segment_id.as_str())
            .ok_or_else(|| Error::NotFound(format!("segment {} is not in the manifest", p.segment_id)))?;
        let call = manifest
            .call(call_id)
            .ok_or_else(|| Error::NotFound(format!("call {call_id}")))?;
        if call.kind != CallKind::Assessment {
            continue;
        }
        let Some(a) = call.linked_assessment_id.as_deref().and_then(|id| manifest.assessment(id)) else {
            continue;
        };
        out.push(ScoredPrediction {
            segment_id: p.segment_id.clone(),
            call_id: call.call_id.clone(),
            subject_id: call.subject_id.clone(),
            activation: p.activation,
            valence: p.valence,
            hamd: a.hamd,
            ymrs: a.ymrs,
            mood: a.mood,
        });
    }
    Ok(out)
}

fn by_subject(rows: &[ScoredPrediction]) -> BTreeMap<&str, Vec<&ScoredPrediction>> {
    let mut m: BTreeMap<&str, Vec<&ScoredPrediction>> = BTreeMap::new();
    for r in rows {
        m.entry(r.subject_id.as_str()).or_default().push(r);
    }
    m
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std_population(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Mean and population standard deviation of a subject's euthymic predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuthymicStats {
    pub subject_id: String,
    pub n_segments: usize,
    pub activation_mean: f64,
    pub activation_std: f64,
    pub valence_mean: f64,
    pub valence_std: f64,
}

impl EuthymicStats {
    pub fn fit(subject_id: &str, rows: &[&ScoredPrediction]) -> Result<Self> {
        let euth: Vec<&&ScoredPrediction> = rows.iter().filter(|r| r.mood == MoodLabel::Euthymic).collect();
        if euth.len() < 2 {
            return Err(Error::Validation(format!(
                "{} euthymic segment(s), need at least 2",
                euth.len()
            )));
        }
        let a: Vec<f64> = euth.iter().map(|r| r.activation).collect();
        let v: Vec<f64> = euth.iter().map(|r| r.valence).collect();
        let stats = EuthymicStats {
            subject_id: subject_id.to_string(),
            n_segments: euth.len(),
            activation_mean: mean(&a),
            activation_std: std_population(&a),
            valence_mean: mean(&v),
            valence_std: std_population(&v),
        };
        for d in Dimension::ALL {
            if !(stats.std(d) > 0.0) {
                return Err(Error::Degenerate(format!("euthymic {} has zero spread (sigma = 0)", d.as_str())));
            }
        }
        Ok(stats)
    }

    pub fn mean(&self, d: Dimension) -> f64 {
        match d {
            Dimension::Activation => self.activation_mean,
            Dimension::Valence => self.valence_mean,
        }
    }

    pub fn std(&self, d: Dimension) -> f64 {
        match d {
            Dimension::Activation => self.activation_std,
            Dimension::Valence => self.valence_std,
        }
    }

    pub fn z(&self, d: Dimension, x: f64) -> f64 {
        (x - self.mean(d)) / self.std(d)
    }
}

/// A subject left out of the analysis, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub subject_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub rows: Vec<ScoredPrediction>,
    pub stats: Vec<EuthymicStats>,
    pub excluded: Vec<Exclusion>,
}

/// Per subject and dimension, z = (x - mean_euthymic) / std_euthymic over all of
/// the subject's segments. Subjects without usable euthymic data are excluded.
pub fn euthymic_normalize(rows: &[ScoredPrediction]) -> Normalized {
    let mut out = Normalized {
        rows: Vec::new(),
        stats: Vec::new(),
        excluded: Vec::new(),
    };
    for (subject, group) in by_subject(rows) {
        match EuthymicStats::fit(subject, &group) {
            Ok(st) => {
                for r in group {
                    let mut z = r.clone();
                    for d in Dimension::ALL {
                        *z.value_mut(d) = st.z(d, r.value(d));
                    }
                    out.rows.push(z);
                }
                out.stats.push(st);
            }
            Err(e) => out.excluded.push(Exclusion {
                subject_id: subject.to_string(),
                reason: e.to_string(),
            }),
        }
    }
    out
}

/// Manic vs depressed means of one subject on one dimension. The test is
/// omitted (with a note) unless both states have at least 2 segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateContrast {
    pub subject_id: String,
    pub dimension: Dimension,
    pub n_manic: usize,
    pub n_depressed: usize,
    pub manic_mean: Option<f64>,
    pub depressed_mean: Option<f64>,
    pub test: Option<TTest>,
    pub significant: Option<bool>,
    pub note: Option<String>,
}

fn contrast_one(subject: &str, rows: &[&ScoredPrediction], d: Dimension) -> StateContrast {
    let of = |m: MoodLabel| -> Vec<f64> { rows.iter().filter(|r| r.mood == m).map(|r| r.value(d)).collect() };
    let (manic, dep) = (of(MoodLabel::Manic), of(MoodLabel::Depressed));
    let mean_opt = |x: &[f64]| (!x.is_empty()).then(|| mean(x));
    let (test, note) = if manic.len() < 2 || dep.len() < 2 {
        (
            None,
            Some(format!("{} manic / {} depressed segments; test needs 2 of each", manic.len(), dep.len())),
        )
    } else {
        match welch_t_test(&manic, &dep) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    StateContrast {
        subject_id: subject.to_string(),
        dimension: d,
        n_manic: manic.len(),
        n_depressed: dep.len(),
        manic_mean: mean_opt(&manic),
        depressed_mean: mean_opt(&dep),
        significant: test.map(|t| t.significant(ALPHA)),
        test,
        note,
    }
}

/// Welch t-test of manic minus depressed, per subject and dimension.
pub fn state_contrast(rows: &[ScoredPrediction]) -> Vec<StateContrast> {
    let groups: Vec<(&str, Vec<&ScoredPrediction>)> = by_subject(rows).into_iter().collect();
    groups
        .par_iter()
        .flat_map_iter(|(s, g)| Dimension::ALL.map(|d| contrast_one(s, g, d)))
        .collect()
}

/// Whether correlations pair individual segments or call means with scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationLevel {
    #[default]
    Segment,
    Call,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityCorrelation {
    pub subject_id: String,
    pub dimension: Dimension,
    pub scale: Scale,
    pub n: usize,
    pub n_assessments: usize,
    /// `None` when undefined; `note` says why.
    pub pcc: Option<f64>,
    pub test: Option<TTest>,
    pub significant: Option<bool>,
    pub note: Option<String>,
}

fn call_means<'a>(rows: &[&'a ScoredPrediction]) -> Vec<(&'a ScoredPrediction, Vec<&'a ScoredPrediction>)> {
    let mut calls: BTreeMap<&str, Vec<&ScoredPrediction>> = BTreeMap::new();
    for r in rows {
        calls.entry(r.call_id.as_str()).or_default().push(r);
    }
    calls.into_values().map(|v| (v[0], v)).collect()
}

fn correlate(x: &[f64], y: &[f64]) -> (Option<f64>, Option<TTest>, Option<String>) {
    match pcc(x, y) {
        Ok(r) => match correlation_test(r, x.len()) {
            Ok(t) => (Some(r), Some(t), None),
            Err(e) => (Some(r), None, Some(e.to_string())),
        },
        Err(e) => (None, None, Some(e.to_string())),
    }
}

fn severity_one(subject: &str, rows: &[&ScoredPrediction], d: Dimension, s: Scale, level: CorrelationLevel) -> SeverityCorrelation {
    let calls = call_means(rows);
    let (x, y): (Vec<f64>, Vec<f64>) = match level {
        CorrelationLevel::Segment => rows.iter().map(|r| (r.value(d), r.score(s))).unzip(),
        CorrelationLevel::Call => calls
            .iter()
            .map(|(head, segs)| {
                let v: Vec<f64> = segs.iter().map(|r| r.value(d)).collect();
                (mean(&v), head.score(s))
            })
            .unzip(),
    };
    let (pcc, test, mut note) = if calls.len() < 3 {
        (None, None, Some(format!("{} assessment call(s), need at least 3", calls.len())))
    } else {
        correlate(&x, &y)
    };
    if note.is_none() && test.is_none() {
        note = Some("undefined".into());
    }
    SeverityCorrelation {
        subject_id: subject.to_string(),
        dimension: d,
        scale: s,
        n: x.len(),
        n_assessments: calls.len(),
        pcc,
        significant: test.map(|t| t.significant(ALPHA)),
        test,
        note,
    }
}

/// Per-subject PCC of each dimension against YMRS and HamD.
pub fn severity_correlation(rows: &[ScoredPrediction], level: CorrelationLevel) -> Vec<SeverityCorrelation> {
    let groups: Vec<(&str, Vec<&ScoredPrediction>)> = by_subject(rows).into_iter().collect();
    groups
        .par_iter()
        .flat_map_iter(|(subj, g)| {
            Dimension::ALL
                .into_iter()
                .flat_map(move |d| Scale::ALL.map(|s| severity_one(subj, g, d, s, level)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectAnova {
    pub dimension: Dimension,
    pub subjects: Vec<String>,
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub significant: bool,
    /// Every pair of subjects, `i`/`j` indexing `subjects`.
    pub pairs: Vec<PairComparison>,
    pub n_significant_pairs: usize,
}

/// One-way ANOVA across subjects with Tukey-Kramer pairwise comparisons.
/// Subjects with fewer than 2 segments are left out.
pub fn subject_anova(rows: &[ScoredPrediction], d: Dimension) -> Result<SubjectAnova> {
    let (subjects, groups): (Vec<String>, Vec<Vec<f64>>) = by_subject(rows)
        .into_iter()
        .filter(|(_, g)| g.len() >= 2)
        .map(|(s, g)| (s.to_string(), g.iter().map(|r| r.value(d)).collect()))
        .unzip();
    let anova = one_way_anova(&groups)?;
    let pairs = tukey_kramer_01(&anova)?;
    Ok(SubjectAnova {
        dimension: d,
        subjects,
        f: anova.f,
        p: anova.p,
        df_between: anova.df_between,
        df_within: anova.df_within,
        significant: anova.p < ALPHA,
        n_significant_pairs: pairs.iter().filter(|p| p.significant).count(),
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceCorrelation {
    pub scale: Scale,
    pub pcc: Option<f64>,
    pub test: Option<TTest>,
    pub significant: Option<bool>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithinCallVariance {
    pub dimension: Dimension,
    /// Calls with at least 2 segments.
    pub n_calls: usize,
    pub correlations: Vec<VarianceCorrelation>,
}

/// Sample variance of the predictions within each call, correlated across
/// calls with the call's scores. Single-segment calls are skipped.
pub fn within_call_variance(rows: &[ScoredPrediction], d: Dimension) -> WithinCallVariance {
    let all: Vec<&ScoredPrediction> = rows.iter().collect();
    let calls: Vec<(f64, &ScoredPrediction)> = call_means(&all)
        .into_iter()
        .filter(|(_, segs)| segs.len() >= 2)
        .map(|(head, segs)| {
            let v: Vec<f64> = segs.iter().map(|r| r.value(d)).collect();
            (variance(&v), head)
        })
        .collect();
    let vars: Vec<f64> = calls.iter().map(|c| c.0).collect();
    let correlations = Scale::ALL
        .into_iter()
        .map(|s| {
            let scores: Vec<f64> = calls.iter().map(|c| c.1.score(s)).collect();
            let (pcc, test, note) = correlate(&vars, &scores);
            VarianceCorrelation {
                scale: s,
                pcc,
                significant: test.map(|t| t.significant(ALPHA)),
                test,
                note,
            }
        })
        .collect();
    WithinCallVariance {
        dimension: d,
        n_calls: calls.len(),
        correlations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaOutcome {
    pub dimension: Dimension,
    pub result: Option<SubjectAnova>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoodReport {
    pub alpha: f64,
    pub level: CorrelationLevel,
    pub n_segments: usize,
    pub euthymic: Vec<EuthymicStats>,
    pub excluded: Vec<Exclusion>,
    pub contrasts: Vec<StateContrast>,
    pub correlations: Vec<SeverityCorrelation>,
    pub anova: Vec<AnovaOutcome>,
    pub within_call: Vec<WithinCallVariance>,
}

/// Runs every analysis on raw (not yet normalized) scored predictions.
pub fn analyze(rows: &[ScoredPrediction], level: CorrelationLevel) -> MoodReport {
    let norm = euthymic_normalize(rows);
    let anova = Dimension::ALL
        .into_iter()
        .map(|d| match subject_anova(&norm.rows, d) {
            Ok(r) => AnovaOutcome {
                dimension: d,
                result: Some(r),
                error: None,
            },
            Err(e) => AnovaOutcome {
                dimension: d,
                result: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    MoodReport {
        alpha: ALPHA,
        level,
        n_segments: norm.rows.len(),
        contrasts: state_contrast(&norm.rows),
        correlations: severity_correlation(&norm.rows, level),
        anova,
        within_call: Dimension::ALL.map(|d| within_call_variance(&norm.rows, d)).to_vec(),
        euthymic: norm.stats,
        excluded: norm.excluded,
    }
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

fn sig(s: Option<bool>) -> &'static str {
    match s {
        Some(true) => "*",
        Some(false) => "",
        None => "-",
    }
}

fn fmt_p(p: f64) -> String {
    if p < 1e-3 {
        format!("{p:.1e}")
    } else {
        format!("{p:.3}")
    }
}

fn p_cell(t: Option<TTest>) -> String {
    t.map_or_else(|| "-".to_string(), |t| fmt_p(t.p))
}

impl MoodReport {
    /// Plain-text tables; `*` marks p < alpha, `-` marks an omitted value or test.
    pub fn tables(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "State means (euthymic-normalized), manic vs depressed, Welch t-test");
        let _ = writeln!(
            s,
            "{:<10} {:<10} {:>7} {:>7} {:>8} {:>9} {:>4}",
            "subject", "dimension", "manic", "depr", "t", "p", "sig"
        );
        for c in &self.contrasts {
            let _ = writeln!(
                s,
                "{:<10} {:<10} {:>7} {:>7} {:>8} {:>9} {:>4}",
                c.subject_id,
                c.dimension.as_str(),
                cell(c.manic_mean),
                cell(c.depressed_mean),
                c.test.map_or_else(|| "-".into(), |t| format!("{:.2}", t.t)),
                p_cell(c.test),
                sig(c.significant)
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "Correlation with clinical scores ({:?} level)", self.level);
        let _ = writeln!(
            s,
            "{:<10} {:<10} {:<5} {:>5} {:>7} {:>9} {:>4}",
            "subject", "dimension", "scale", "n", "pcc", "p", "sig"
        );
        for c in &self.correlations {
            let _ = writeln!(
                s,
                "{:<10} {:<10} {:<5} {:>5} {:>7} {:>9} {:>4}",
                c.subject_id,
                c.dimension.as_str(),
                c.scale.as_str(),
                c.n,
                cell(c.pcc),
                p_cell(c.test),
                sig(c.significant)
            );
        }
        let _ = writeln!(s);
        for a in &self.anova {
            match &a.result {
                Some(r) => {
                    let _ = writeln!(
                        s,
                        "ANOVA {}: F({}, {}) = {:.2}, p = {}{}; Tukey-Kramer significant pairs {}/{}",
                        a.dimension.as_str(),
                        r.df_between,
                        r.df_within,
                        r.f,
                        fmt_p(r.p),
                        if r.significant { " *" } else { "" },
                        r.n_significant_pairs,
                        r.pairs.len()
                    );
                }
                None => {
                    let _ = writeln!(s, "ANOVA {}: not computed ({})", a.dimension.as_str(), a.error.as_deref().unwrap_or(""));
                }
            }
        }
        for w in &self.within_call {
            for c in &w.correlations {
                let _ = writeln!(
                    s,
                    "within-call variance of {} vs {} over {} calls: pcc {}, p {}{}",
                    w.dimension.as_str(),
                    c.scale.as_str(),
                    w.n_calls,
                    cell(c.pcc),
                    p_cell(c.test),
                    if c.significant == Some(true) { " *" } else { "" }
                );
            }
        }
        if !self.excluded.is_empty() {
            let _ = writeln!(s);
            for e in &self.excluded {
                let _ = writeln!(s, "excluded {}: {}", e.subject_id, e.reason);
            }
        }
        s
    }
}
