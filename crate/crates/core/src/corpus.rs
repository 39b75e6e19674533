//! Corpus data model: subjects, calls, clinical assessments and speech segments.
//!
//! A [`Manifest`] is the single JSON document every pipeline stage reads.
//! Keys are written in sorted order so a save/load/save cycle is byte-stable.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{self, Error, Result};

pub const HAMD_MAX: u32 = 52;
pub const YMRS_MAX: u32 = 60;

/// Calls longer than this are not admitted to segmentation.
pub const MAX_CALL_SECONDS: f64 = 3600.0;

pub const MIN_SEGMENT_SECONDS: f64 = 3.0;
pub const MAX_SEGMENT_SECONDS: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Female,
    Male,
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub subject_id: String,
    pub sex: Sex,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_years: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoodLabel {
    Euthymic,
    Manic,
    Depressed,
    Excluded,
}

impl MoodLabel {
    pub const ALL: [MoodLabel; 4] = [
        MoodLabel::Euthymic,
        MoodLabel::Manic,
        MoodLabel::Depressed,
        MoodLabel::Excluded,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MoodLabel::Euthymic => "euthymic",
            MoodLabel::Manic => "manic",
            MoodLabel::Depressed => "depressed",
            MoodLabel::Excluded => "excluded",
        }
    }
}

/// Maps a (HamD, YMRS) score pair onto a mood category.
///
/// | mood      | HamD  | YMRS  |
/// |-----------|-------|-------|
/// | euthymic  | ≤ 6   | ≤ 6   |
/// | manic     | < 10  | ≥ 10  |
/// | depressed | ≥ 10  | < 10  |
/// | excluded  | otherwise     |
pub fn label_mood(hamd: i64, ymrs: i64) -> Result<MoodLabel> {
    if hamd < 0 || ymrs < 0 {
        return Err(Error::Domain(format!(
            "clinical scores must be nonnegative (hamd={hamd}, ymrs={ymrs})"
        )));
    }
    Ok(if hamd <= 6 && ymrs <= 6 {
        MoodLabel::Euthymic
    } else if ymrs >= 10 && hamd < 10 {
        MoodLabel::Manic
    } else if hamd >= 10 && ymrs < 10 {
        MoodLabel::Depressed
    } else {
        MoodLabel::Excluded
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub assessment_id: String,
    pub subject_id: String,
    pub date: NaiveDate,
    pub hamd: u32,
    pub ymrs: u32,
    pub mood: MoodLabel,
}

impl Assessment {
    /// Builds an assessment, deriving its mood label and checking instrument ranges.
    pub fn new(
        assessment_id: impl Into<String>,
        subject_id: impl Into<String>,
        date: NaiveDate,
        hamd: u32,
        ymrs: u32,
    ) -> Result<Self> {
        check_score_ranges(hamd, ymrs)?;
        Ok(Assessment {
            assessment_id: assessment_id.into(),
            subject_id: subject_id.into(),
            date,
            hamd,
            ymrs,
            mood: label_mood(hamd as i64, ymrs as i64)?,
        })
    }
}

fn check_score_ranges(hamd: u32, ymrs: u32) -> Result<()> {
    if hamd > HAMD_MAX {
        return Err(Error::Domain(format!("hamd {hamd} exceeds maximum {HAMD_MAX}")));
    }
    if ymrs > YMRS_MAX {
        return Err(Error::Domain(format!("ymrs {ymrs} exceeds maximum {YMRS_MAX}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Assessment,
    Personal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Call {
    pub call_id: String,
    pub subject_id: String,
    pub kind: CallKind,
    pub start_time: NaiveDateTime,
    pub duration_s: f64,
    pub audio_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linked_assessment_id: Option<String>,
}

impl Call {
    pub fn date(&self) -> NaiveDate {
        self.start_time.date()
    }

    /// Whether the call is short enough to be segmented.
    pub fn admissible(&self) -> bool {
        self.duration_s <= MAX_CALL_SECONDS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub segment_id: String,
    pub call_id: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl Segment {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn annotation_eligible(&self) -> bool {
        let d = self.duration_s();
        (MIN_SEGMENT_SECONDS..=MAX_SEGMENT_SECONDS).contains(&d)
    }
}

/// Whole days from the call to the nearest assessment dated on or after it.
pub fn days_to_next_assessment(call: &Call, assessments: &[Assessment]) -> Option<i64> {
    let day = call.date();
    assessments
        .iter()
        .filter(|a| a.subject_id == call.subject_id)
        .map(|a| (a.date - day).num_days())
        .filter(|d| *d >= 0)
        .min()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub subjects: Vec<Subject>,
    #[serde(default)]
    pub assessments: Vec<Assessment>,
    #[serde(default)]
    pub calls: Vec<Call>,
    #[serde(default)]
    pub segments: Vec<Segment>,
}

fn invalid(field: String, message: impl Into<String>) -> Error {
    Error::Parse {
        context: "manifest".into(),
        location: format!("field `{field}`"),
        message: message.into(),
    }
}

impl Manifest {
    /// Checks every cross-record invariant of the data model.
    pub fn validate(&self) -> Result<()> {
        let mut subjects = HashSet::new();
        for (i, s) in self.subjects.iter().enumerate() {
            if !subjects.insert(s.subject_id.as_str()) {
                return Err(invalid(
                    format!("subjects[{i}].subject_id"),
                    format!("duplicate subject_id `{}`", s.subject_id),
                ));
            }
            if let Some(age) = s.age_years {
                if age < 18 {
                    return Err(invalid(format!("subjects[{i}].age_years"), "age must be at least 18"));
                }
            }
        }

        let mut assessments = HashMap::new();
        for (i, a) in self.assessments.iter().enumerate() {
            if !subjects.contains(a.subject_id.as_str()) {
                return Err(invalid(
                    format!("assessments[{i}].subject_id"),
                    format!("unknown subject `{}`", a.subject_id),
                ));
            }
            check_score_ranges(a.hamd, a.ymrs)
                .map_err(|e| invalid(format!("assessments[{i}]"), e.to_string()))?;
            let expected = label_mood(a.hamd as i64, a.ymrs as i64)?;
            if a.mood != expected {
                return Err(invalid(
                    format!("assessments[{i}].mood"),
                    format!("mood `{}` disagrees with scores (expected `{}`)", a.mood.as_str(), expected.as_str()),
                ));
            }
            if assessments.insert(a.assessment_id.as_str(), a).is_some() {
                return Err(invalid(
                    format!("assessments[{i}].assessment_id"),
                    format!("duplicate assessment_id `{}`", a.assessment_id),
                ));
            }
        }

        let mut calls = HashMap::new();
        for (i, c) in self.calls.iter().enumerate() {
            if !subjects.contains(c.subject_id.as_str()) {
                return Err(invalid(
                    format!("calls[{i}].subject_id"),
                    format!("unknown subject `{}`", c.subject_id),
                ));
            }
            if !(c.duration_s > 0.0 && c.duration_s.is_finite()) {
                return Err(invalid(format!("calls[{i}].duration_s"), "duration must be positive"));
            }
            match (c.kind, &c.linked_assessment_id) {
                (CallKind::Assessment, None) => {
                    return Err(invalid(
                        format!("calls[{i}].linked_assessment_id"),
                        "assessment calls must reference an assessment",
                    ))
                }
                (_, Some(id)) => match assessments.get(id.as_str()) {
                    None => {
                        return Err(invalid(
                            format!("calls[{i}].linked_assessment_id"),
                            format!("unknown assessment `{id}`"),
                        ))
                    }
                    Some(a) if a.subject_id != c.subject_id => {
                        return Err(invalid(
                            format!("calls[{i}].linked_assessment_id"),
                            "assessment belongs to a different subject",
                        ))
                    }
                    _ => {}
                },
                _ => {}
            }
            if calls.insert(c.call_id.as_str(), c).is_some() {
                return Err(invalid(
                    format!("calls[{i}].call_id"),
                    format!("duplicate call_id `{}`", c.call_id),
                ));
            }
        }

        let mut seen = HashSet::new();
        let mut last_end: HashMap<&str, f64> = HashMap::new();
        for (i, s) in self.segments.iter().enumerate() {
            let Some(call) = calls.get(s.call_id.as_str()) else {
                return Err(invalid(
                    format!("segments[{i}].call_id"),
                    format!("unknown call `{}`", s.call_id),
                ));
            };
            if !seen.insert(s.segment_id.as_str()) {
                return Err(invalid(
                    format!("segments[{i}].segment_id"),
                    format!("duplicate segment_id `{}`", s.segment_id),
                ));
            }
            if !(s.start_s >= 0.0 && s.end_s > s.start_s && s.end_s <= call.duration_s + 1e-9) {
                return Err(invalid(
                    format!("segments[{i}]"),
                    format!("bounds [{}, {}] outside call of {} s", s.start_s, s.end_s, call.duration_s),
                ));
            }
            let prev = last_end.entry(s.call_id.as_str()).or_insert(f64::NEG_INFINITY);
            if s.start_s < *prev {
                return Err(invalid(
                    format!("segments[{i}].start_s"),
                    "segments of a call must be time-ordered and non-overlapping",
                ));
            }
            *prev = s.end_s;
        }
        Ok(())
    }

    pub fn subject(&self, id: &str) -> Option<&Subject> {
        self.subjects.iter().find(|s| s.subject_id == id)
    }

    pub fn call(&self, id: &str) -> Option<&Call> {
        self.calls.iter().find(|c| c.call_id == id)
    }

    pub fn assessment(&self, id: &str) -> Option<&Assessment> {
        self.assessments.iter().find(|a| a.assessment_id == id)
    }

    pub fn assessments_of(&self, subject_id: &str) -> Vec<Assessment> {
        self.assessments
            .iter()
            .filter(|a| a.subject_id == subject_id)
            .cloned()
            .collect()
    }

    pub fn segments_of<'a>(&'a self, call_id: &'a str) -> impl Iterator<Item = &'a Segment> + 'a {
        self.segments.iter().filter(move |s| s.call_id == call_id)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = error::parse_json(text, "manifest")?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        error::to_canonical_json(self)
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = error::read_to_string(path)?;
    let m: Manifest = error::parse_json(&text, &path.display().to_string())?;
    m.validate()?;
    Ok(m)
}

pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    manifest.validate()?;
    error::write_json(path, manifest)
}
