use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{normalize_rating, Flag, RatingRecord};
use crate::error::{Error, Result};
use crate::eval::pcc;
use crate::sampling::SelectedSegment;
use crate::stats::correlation_test;

/// Fewer ratings than this leaves a segment unlabeled.
pub const MIN_RATINGS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedLabel {
    pub segment_id: String,
    /// Annotators whose latest record carries ratings.
    pub n_ratings: usize,
    pub activation_raw: Option<f64>,
    pub valence_raw: Option<f64>,
    pub activation: Option<f64>,
    pub valence: Option<f64>,
    pub flags: BTreeSet<Flag>,
    pub excluded: bool,
    pub exclusion_reason: Option<String>,
}

/// Training target for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub segment_id: String,
    pub call_id: String,
    pub subject_id: String,
    pub activation: f64,
    pub valence: f64,
}

/// Latest record of each annotator for each segment, keyed by segment.
fn effective(records: &[RatingRecord]) -> BTreeMap<&str, Vec<&RatingRecord>> {
    let mut latest: HashMap<(&str, &str), usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        latest.insert((r.segment_id.as_str(), r.annotator_id.as_str()), i);
    }
    let mut idx: Vec<usize> = latest.into_values().collect();
    idx.sort_unstable();
    let mut out: BTreeMap<&str, Vec<&RatingRecord>> = BTreeMap::new();
    for i in idx {
        out.entry(records[i].segment_id.as_str()).or_default().push(&records[i]);
    }
    out
}

fn fold(segment_id: &str, recs: &[&RatingRecord]) -> AggregatedLabel {
    let flags: BTreeSet<Flag> = recs.iter().flat_map(|r| r.flags.iter().copied()).collect();
    let rated: Vec<&&RatingRecord> = recs.iter().filter(|r| r.has_ratings()).collect();
    let n = rated.len();
    let mean = |f: fn(&RatingRecord) -> u8| {
        (n > 0).then(|| rated.iter().map(|r| f(r) as f64).sum::<f64>() / n as f64)
    };
    let activation_raw = mean(|r| r.activation.unwrap_or_default());
    let valence_raw = mean(|r| r.valence.unwrap_or_default());
    let exclusion_reason = if !flags.is_empty() {
        let names: Vec<String> = flags
            .iter()
            .map(|f| serde_json::to_value(f).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
            .collect();
        Some(format!("flagged: {}", names.join(", ")))
    } else if n < MIN_RATINGS {
        Some(format!("{n} rating(s), need {MIN_RATINGS}"))
    } else {
        None
    };
    AggregatedLabel {
        segment_id: segment_id.to_string(),
        n_ratings: n,
        activation_raw,
        valence_raw,
        activation: activation_raw.map(normalize_rating),
        valence: valence_raw.map(normalize_rating),
        flags,
        excluded: exclusion_reason.is_some(),
        exclusion_reason,
    }
}

/// Mean of the latest rating per annotator, normalized to [-1, 1].
pub fn aggregate(segment_id: &str, records: &[RatingRecord]) -> Result<AggregatedLabel> {
    let eff = effective(records);
    match eff.get(segment_id) {
        Some(recs) => Ok(fold(segment_id, recs)),
        None => Err(Error::NotReady(format!("no ratings for segment {segment_id}"))),
    }
}

/// Aggregates every rated segment, ordered by segment id.
pub fn aggregate_all(records: &[RatingRecord]) -> Vec<AggregatedLabel> {
    effective(records).iter().map(|(s, recs)| fold(s, recs)).collect()
}

/// Usable labels joined with their call and subject from the selection.
pub fn label_records(labels: &[AggregatedLabel], selection: &[SelectedSegment]) -> Result<Vec<LabelRecord>> {
    let by_id: HashMap<&str, &SelectedSegment> = selection.iter().map(|s| (s.segment_id.as_str(), s)).collect();
    labels
        .iter()
        .filter(|l| !l.excluded)
        .map(|l| {
            let s = by_id
                .get(l.segment_id.as_str())
                .ok_or_else(|| Error::NotFound(format!("segment {} is not in the selection", l.segment_id)))?;
            Ok(LabelRecord {
                segment_id: l.segment_id.clone(),
                call_id: s.call_id.clone(),
                subject_id: s.subject_id.clone(),
                activation: l.activation.expect("usable labels have ratings"),
                valence: l.valence.expect("usable labels have ratings"),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_segments: usize,
    pub n_labeled: usize,
    pub n_excluded: usize,
    /// Labeled segments by raw mean rounded to the nearest Likert point (index 0 is 1).
    pub activation_histogram: [usize; 9],
    pub valence_histogram: [usize; 9],
    /// Number of segments having each count of ratings.
    pub ratings_per_segment: BTreeMap<usize, usize>,
    /// `None` when undefined (e.g. all labels identical).
    pub activation_valence_pcc: Option<f64>,
    pub pcc_p_value: Option<f64>,
}

fn bin(x: f64) -> usize {
    ((x + 0.5).floor() as i64).clamp(1, 9) as usize - 1
}

pub fn corpus_stats(labels: &[AggregatedLabel]) -> CorpusStats {
    let usable: Vec<&AggregatedLabel> = labels.iter().filter(|l| !l.excluded).collect();
    let mut activation_histogram = [0; 9];
    let mut valence_histogram = [0; 9];
    for l in &usable {
        activation_histogram[bin(l.activation_raw.unwrap_or(5.0))] += 1;
        valence_histogram[bin(l.valence_raw.unwrap_or(5.0))] += 1;
    }
    let mut ratings_per_segment = BTreeMap::new();
    for l in labels {
        *ratings_per_segment.entry(l.n_ratings).or_insert(0) += 1;
    }
    let a: Vec<f64> = usable.iter().filter_map(|l| l.activation).collect();
    let v: Vec<f64> = usable.iter().filter_map(|l| l.valence).collect();
    let r = pcc(&a, &v).ok();
    let p = r.and_then(|r| correlation_test(r, a.len()).ok()).map(|t| t.p);
    CorpusStats {
        n_segments: labels.len(),
        n_labeled: usable.len(),
        n_excluded: labels.len() - usable.len(),
        activation_histogram,
        valence_histogram,
        ratings_per_segment,
        activation_valence_pcc: r,
        pcc_p_value: p,
    }
}
