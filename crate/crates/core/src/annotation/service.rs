use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::Utc;
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_all, corpus_stats, CorpusStats};
use super::log::RatingLog;
use super::session::Session;
use super::{Flag, RatingRecord};
use crate::dsp::{encode_wav, read_wav};
use crate::error::{Error, Result};
use crate::sampling::SelectedSegment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub annotator_id: String,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextItem {
    pub session_id: String,
    /// `None` once the queue is exhausted.
    pub segment_id: Option<String>,
    pub audio_url: Option<String>,
    pub progress: Progress,
    pub complete: bool,
}

/// Client payload for one rating; the server stamps time and annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingSubmission {
    pub session_id: String,
    #[serde(default)]
    pub annotator_id: Option<String>,
    pub segment_id: String,
    #[serde(default)]
    pub activation: Option<u8>,
    #[serde(default)]
    pub valence: Option<u8>,
    #[serde(default)]
    pub flags: BTreeSet<Flag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub n_records: usize,
    pub n_selected: usize,
    pub corpus: CorpusStats,
}

/// Sessions and the rating log behind one selection. Appends are serialized
/// by the log mutex; sessions are always locked before the log.
#[derive(Debug)]
pub struct AnnotationService {
    selection: Vec<SelectedSegment>,
    index: HashMap<String, usize>,
    annotators: BTreeSet<String>,
    audio_root: PathBuf,
    sessions: Mutex<HashMap<String, Session>>,
    log: Mutex<RatingLog>,
    target_coverage: Option<usize>,
}

fn poisoned<T>(_: T) -> Error {
    Error::Validation("internal state lock poisoned".into())
}

impl AnnotationService {
    /// Relative audio paths in the selection resolve against `audio_root`.
    pub fn new(
        selection: Vec<SelectedSegment>,
        annotators: impl IntoIterator<Item = String>,
        log_path: &Path,
        audio_root: &Path,
    ) -> Result<Self> {
        if selection.is_empty() {
            return Err(Error::Config("selection is empty; nothing to annotate".into()));
        }
        let mut index = HashMap::new();
        for (i, s) in selection.iter().enumerate() {
            if index.insert(s.segment_id.clone(), i).is_some() {
                return Err(Error::Validation(format!("segment {} selected twice", s.segment_id)));
            }
        }
        let annotators: BTreeSet<String> = annotators.into_iter().collect();
        if annotators.is_empty() {
            return Err(Error::Config("no annotators registered".into()));
        }
        Ok(AnnotationService {
            selection,
            index,
            annotators,
            audio_root: audio_root.to_path_buf(),
            sessions: Mutex::new(HashMap::new()),
            log: Mutex::new(RatingLog::open(log_path)?),
            target_coverage: None,
        })
    }

    /// Sessions skip segments that already carry ratings from `n` other
    /// annotators. Without it every session covers the whole selection.
    pub fn with_target_coverage(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("target coverage must be at least 1".into()));
        }
        self.target_coverage = Some(n);
        Ok(self)
    }

    fn check_annotator(&self, annotator_id: &str) -> Result<()> {
        if self.annotators.contains(annotator_id) {
            Ok(())
        } else {
            Err(Error::Auth(format!("unknown annotator {annotator_id:?}")))
        }
    }

    fn progress(s: &Session) -> Progress {
        Progress {
            done: s.done.len(),
            total: s.queue.len(),
        }
    }

    /// Creates or resumes the session for (annotator, seed). Segments already
    /// rated under that session id in the log count as done.
    pub fn create_session(&self, annotator_id: &str, seed: u64) -> Result<SessionInfo> {
        self.check_annotator(annotator_id)?;
        let mut sessions = self.sessions.lock().map_err(poisoned)?;
        let mut fresh = Session::new(&self.selection, annotator_id, seed)?;
        let session = match sessions.get(&fresh.session_id) {
            Some(s) => s,
            None => {
                let log = self.log.lock().map_err(poisoned)?;
                let id = fresh.session_id.clone();
                for r in log.records().iter().filter(|r| r.session_id == id) {
                    fresh.mark_done(&r.segment_id);
                }
                sessions.entry(id).or_insert(fresh)
            }
        };
        Ok(SessionInfo {
            session_id: session.session_id.clone(),
            annotator_id: session.annotator_id.clone(),
            progress: Self::progress(session),
        })
    }

    pub fn next(&self, session_id: &str) -> Result<NextItem> {
        let mut sessions = self.sessions.lock().map_err(poisoned)?;
        let s = sessions
            .get_mut(session_id)
            .ok_or_else(|| Error::NotFound(format!("session {session_id}")))?;
        if let Some(target) = self.target_coverage {
            let log = self.log.lock().map_err(poisoned)?;
            let mut raters: HashMap<&str, BTreeSet<&str>> = HashMap::new();
            for r in log.records().iter().filter(|r| r.has_ratings() && r.annotator_id != s.annotator_id) {
                raters.entry(r.segment_id.as_str()).or_default().insert(r.annotator_id.as_str());
            }
            while let Some(seg) = s.current().map(str::to_string) {
                if raters.get(seg.as_str()).map_or(0, BTreeSet::len) < target {
                    break;
                }
                s.mark_done(&seg);
            }
        }
        let s = &*s;
        let segment_id = s.current().map(str::to_string);
        Ok(NextItem {
            session_id: session_id.to_string(),
            audio_url: segment_id.as_ref().map(|id| format!("/segments/{id}/audio")),
            complete: segment_id.is_none(),
            segment_id,
            progress: Self::progress(s),
        })
    }

    /// Validates, appends durably, then advances the session. Returns the log length.
    pub fn submit(&self, sub: RatingSubmission) -> Result<usize> {
        let mut sessions = self.sessions.lock().map_err(poisoned)?;
        let s = sessions
            .get_mut(&sub.session_id)
            .ok_or_else(|| Error::NotFound(format!("session {}", sub.session_id)))?;
        if let Some(a) = &sub.annotator_id {
            if *a != s.annotator_id {
                return Err(Error::Auth(format!("session {} belongs to another annotator", s.session_id)));
            }
        }
        if !self.index.contains_key(&sub.segment_id) || !s.contains(&sub.segment_id) {
            return Err(Error::NotFound(format!("segment {}", sub.segment_id)));
        }
        let record = RatingRecord {
            timestamp: Utc::now(),
            annotator_id: s.annotator_id.clone(),
            session_id: s.session_id.clone(),
            segment_id: sub.segment_id,
            activation: sub.activation,
            valence: sub.valence,
            flags: sub.flags,
        };
        let n = self.log.lock().map_err(poisoned)?.append(&record)?;
        s.mark_done(&record.segment_id);
        Ok(n)
    }

    /// The segment's span of its call, as 16-bit WAV bytes.
    pub fn audio_wav(&self, segment_id: &str) -> Result<Vec<u8>> {
        let seg = self
            .index
            .get(segment_id)
            .map(|&i| &self.selection[i])
            .ok_or_else(|| Error::NotFound(format!("segment {segment_id}")))?;
        let path = self.audio_root.join(&seg.audio_path);
        let audio = read_wav(&path)?;
        encode_wav(&audio.slice_seconds(seg.start_s, seg.end_s))
    }

    pub fn records(&self) -> Result<Vec<RatingRecord>> {
        Ok(self.log.lock().map_err(poisoned)?.records().to_vec())
    }

    pub fn stats(&self) -> Result<StatsReport> {
        let records = self.records()?;
        Ok(StatsReport {
            n_records: records.len(),
            n_selected: self.selection.len(),
            corpus: corpus_stats(&aggregate_all(&records)),
        })
    }

    pub fn selection(&self) -> &[SelectedSegment] {
        &self.selection
    }
}
