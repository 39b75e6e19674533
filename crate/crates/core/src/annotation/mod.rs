//! Annotation workflow: rating records, the append-only log, per-annotator
//! queues, aggregation into normalized labels and the HTTP service.

pub mod aggregate;
pub mod http;
pub mod log;
pub mod service;
pub mod session;

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use aggregate::{aggregate, aggregate_all, corpus_stats, label_records, AggregatedLabel, CorpusStats, LabelRecord};
pub use http::{router, serve};
pub use log::RatingLog;
pub use service::{AnnotationService, NextItem, Progress, RatingSubmission, SessionInfo, StatsReport};
pub use session::{build_queue, Session};

pub const LIKERT_MIN: u8 = 1;
pub const LIKERT_MAX: u8 = 9;
pub const LIKERT_MID: f64 = 5.0;

/// Inspection reasons an annotator can attach to a segment. Any of them
/// excludes the segment from the labeled set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    NoiseDominant,
    UnderTwoSecondsSpeech,
    NotTalkingToPhone,
    EmotionVaries,
    IdentifiableInfo,
}

impl Flag {
    pub const ALL: [Flag; 5] = [
        Flag::NoiseDominant,
        Flag::UnderTwoSecondsSpeech,
        Flag::NotTalkingToPhone,
        Flag::EmotionVaries,
        Flag::IdentifiableInfo,
    ];
}

/// One line of the rating log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub timestamp: DateTime<Utc>,
    pub annotator_id: String,
    pub session_id: String,
    pub segment_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valence: Option<u8>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<Flag>,
}

impl RatingRecord {
    /// Both ratings in 1..=9, or no ratings and at least one flag.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("activation", self.activation), ("valence", self.valence)] {
            if let Some(v) = v {
                if !(LIKERT_MIN..=LIKERT_MAX).contains(&v) {
                    return Err(Error::Validation(format!("{name} {v} outside {LIKERT_MIN}..={LIKERT_MAX}")));
                }
            }
        }
        match (self.activation, self.valence) {
            (Some(_), Some(_)) => Ok(()),
            (None, None) if !self.flags.is_empty() => Ok(()),
            (None, None) => Err(Error::Validation("record has neither ratings nor flags".into())),
            _ => Err(Error::Validation("activation and valence must be given together".into())),
        }
    }

    pub fn has_ratings(&self) -> bool {
        self.activation.is_some() && self.valence.is_some()
    }
}

/// Maps a Likert value (or a mean of them) from [1, 9] onto [-1, 1].
pub fn normalize_rating(x: f64) -> f64 {
    (x - LIKERT_MID) / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(annotator: &str, segment: &str, a: Option<u8>, v: Option<u8>, flags: &[Flag]) -> RatingRecord {
        RatingRecord {
            timestamp: DateTime::from_timestamp(1_700_000_000, 0).unwrap(),
            annotator_id: annotator.into(),
            session_id: "s".into(),
            segment_id: segment.into(),
            activation: a,
            valence: v,
            flags: flags.iter().copied().collect(),
        }
    }

    #[test]
    fn normalization_is_exact_on_likert_points() {
        let got: Vec<f64> = (1..=9).map(|x| normalize_rating(x as f64)).collect();
        let want = [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0];
        assert_eq!(got, want);
    }

    #[test]
    fn validation_rules() {
        assert!(rec("a", "x", Some(5), Some(5), &[]).validate().is_ok());
        assert!(matches!(rec("a", "x", Some(10), Some(5), &[]).validate(), Err(Error::Validation(_))));
        assert!(rec("a", "x", Some(0), Some(5), &[]).validate().is_err());
        assert!(rec("a", "x", None, None, &[Flag::IdentifiableInfo]).validate().is_ok());
        assert!(rec("a", "x", None, None, &[]).validate().is_err());
        assert!(rec("a", "x", Some(3), None, &[]).validate().is_err());
    }

    #[test]
    fn json_shape() {
        let r = rec("a", "x", None, None, &[Flag::NoiseDominant]);
        let j = serde_json::to_value(&r).unwrap();
        assert_eq!(j["flags"], serde_json::json!(["noise_dominant"]));
        assert!(j.get("activation").is_none());
        let back: RatingRecord = serde_json::from_value(j).unwrap();
        assert_eq!(back, r);
    }
}
