use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::derive_seed;
use crate::sampling::SelectedSegment;

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Indices into `selection`, grouped by subject. Subjects come in random order,
/// and each subject's segments are shuffled; depends only on (annotator, seed).
pub fn build_queue(selection: &[SelectedSegment], annotator_id: &str, seed: u64) -> Result<Vec<usize>> {
    if selection.is_empty() {
        return Err(Error::Config("selection is empty; nothing to annotate".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[fnv1a(annotator_id)]));
    let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in selection.iter().enumerate() {
        by_subject.entry(s.subject_id.as_str()).or_default().push(i);
    }
    let mut blocks: Vec<Vec<usize>> = by_subject.into_values().collect();
    blocks.shuffle(&mut rng);
    for b in blocks.iter_mut() {
        b.shuffle(&mut rng);
    }
    Ok(blocks.into_iter().flatten().collect())
}

/// One annotator's pass over the selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub annotator_id: String,
    pub seed: u64,
    /// Segment ids in presentation order.
    pub queue: Vec<String>,
    pub done: BTreeSet<String>,
}

impl Session {
    /// Id is a function of annotator and seed, so recreating a session after a
    /// restart resumes it.
    pub fn new(selection: &[SelectedSegment], annotator_id: &str, seed: u64) -> Result<Self> {
        let queue = build_queue(selection, annotator_id, seed)?
            .into_iter()
            .map(|i| selection[i].segment_id.clone())
            .collect();
        Ok(Session {
            session_id: format!("{annotator_id}-{seed}"),
            annotator_id: annotator_id.to_string(),
            seed,
            queue,
            done: BTreeSet::new(),
        })
    }

    /// Position of the first segment not yet rated.
    pub fn cursor(&self) -> usize {
        self.queue
            .iter()
            .position(|s| !self.done.contains(s))
            .unwrap_or(self.queue.len())
    }

    pub fn current(&self) -> Option<&str> {
        self.queue.get(self.cursor()).map(String::as_str)
    }

    pub fn contains(&self, segment_id: &str) -> bool {
        self.queue.iter().any(|s| s == segment_id)
    }

    pub fn mark_done(&mut self, segment_id: &str) {
        self.done.insert(segment_id.to_string());
    }
}
