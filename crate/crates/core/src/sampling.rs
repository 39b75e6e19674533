//! Choosing which segments go to annotators.
//!
//! Assessment calls contribute a uniform sample of up to `assessment_cap`
//! segments each. Personal calls contribute a weighted sample, weighting each
//! segment by how close its call is to the subject's next assessment.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{days_to_next_assessment, CallKind, Manifest, Segment};
use crate::error::{Error, Result};

pub const WEIGHT_FUNCTION: &str = "max(4-d,1)";

/// Call weight from days `d` until the next assessment; `None` (no future assessment) gets 1.
pub fn weight(d: Option<i64>) -> u32 {
    match d {
        Some(d) => (4 - d).max(1) as u32,
        None => 1,
    }
}

/// `min(cap, n)` distinct indices drawn uniformly from `0..n`, in ascending order.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, cap: usize, rng: &mut R) -> Vec<usize> {
    let k = cap.min(n);
    let mut idx = rand::seq::index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Weighted sampling without replacement by exponential keys: each item gets
/// `-ln(u) / w` and the `n` smallest keys win. Indices come back ascending.
pub fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n > weights.len() {
        return Err(Error::Capacity {
            requested: n,
            available: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::Config(format!("sampling weight {w} must be positive and finite")));
    }
    let mut keys: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            // 1 - [0,1) lies in (0,1], so the log is finite
            let u: f64 = 1.0 - rng.random::<f64>();
            (-u.ln() / w, i)
        })
        .collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut idx: Vec<usize> = keys.into_iter().take(n).map(|(_, i)| i).collect();
    idx.sort_unstable();
    Ok(idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Segments per assessment call.
    #[serde(default = "default_cap")]
    pub assessment_cap: usize,
    /// Segments drawn from personal calls.
    #[serde(default = "default_personal")]
    pub personal_count: usize,
    pub seed: u64,
    #[serde(default = "default_weight_fn")]
    pub weight_function: String,
}

fn default_cap() -> usize {
    10
}
fn default_personal() -> usize {
    1200
}
fn default_weight_fn() -> String {
    WEIGHT_FUNCTION.to_string()
}

impl SamplingPlan {
    pub fn new(seed: u64) -> Self {
        SamplingPlan {
            assessment_cap: default_cap(),
            personal_count: default_personal(),
            seed,
            weight_function: default_weight_fn(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.assessment_cap == 0 {
            return Err(Error::Config("assessment cap must be at least 1".into()));
        }
        if self.weight_function != WEIGHT_FUNCTION {
            return Err(Error::Config(format!(
                "unknown weight function {:?}, only {WEIGHT_FUNCTION:?} is supported",
                self.weight_function
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentSource {
    Assessment,
    Personal,
}

/// Everything an annotation server needs to serve one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedSegment {
    pub segment_id: String,
    pub call_id: String,
    pub subject_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub audio_path: String,
    pub source: SegmentSource,
    pub weight: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub plan: SamplingPlan,
    pub segments: Vec<SelectedSegment>,
}

/// Applies a plan to eligible segments of admissible calls.
///
/// Segments whose call is missing from the manifest are an error. The rng is
/// consumed by assessment calls in input order, then by the personal pool.
pub fn select_segments(manifest: &Manifest, segments: &[Segment], plan: &SamplingPlan) -> Result<Selection> {
    plan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut by_call: Vec<(&str, Vec<&Segment>)> = Vec::new();
    let mut pos: HashMap<&str, usize> = HashMap::new();
    for s in segments {
        if manifest.call(&s.call_id).is_none() {
            return Err(Error::NotFound(format!("call {} of segment {}", s.call_id, s.segment_id)));
        }
        if !s.annotation_eligible() {
            continue;
        }
        let i = *pos.entry(s.call_id.as_str()).or_insert_with(|| {
            by_call.push((s.call_id.as_str(), Vec::new()));
            by_call.len() - 1
        });
        by_call[i].1.push(s);
    }

    let pick = |s: &Segment, source, weight| {
        let call = manifest.call(&s.call_id).expect("checked above");
        SelectedSegment {
            segment_id: s.segment_id.clone(),
            call_id: s.call_id.clone(),
            subject_id: call.subject_id.clone(),
            start_s: s.start_s,
            end_s: s.end_s,
            audio_path: call.audio_path.clone(),
            source,
            weight,
        }
    };

    let mut out = Vec::new();
    let mut pool: Vec<(&Segment, u32)> = Vec::new();
    for (call_id, segs) in &by_call {
        let call = manifest.call(call_id).expect("checked above");
        if !call.admissible() {
            continue;
        }
        match call.kind {
            CallKind::Assessment => {
                for i in sample_uniform(segs.len(), plan.assessment_cap, &mut rng) {
                    out.push(pick(segs[i], SegmentSource::Assessment, 1));
                }
            }
            CallKind::Personal => {
                let w = weight(days_to_next_assessment(call, &manifest.assessments));
                pool.extend(segs.iter().map(|s| (*s, w)));
            }
        }
    }
    let weights: Vec<f64> = pool.iter().map(|(_, w)| *w as f64).collect();
    for i in sample_weighted(&weights, plan.personal_count, &mut rng)? {
        out.push(pick(pool[i].0, SegmentSource::Personal, pool[i].1));
    }
    Ok(Selection {
        plan: plan.clone(),
        segments: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights() {
        assert_eq!(weight(Some(0)), 4);
        assert_eq!(weight(Some(1)), 3);
        assert_eq!(weight(Some(3)), 1);
        assert_eq!(weight(Some(10)), 1);
        assert_eq!(weight(None), 1);
    }

    #[test]
    fn uniform_cardinality_and_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_uniform(7, 10, &mut rng), (0..7).collect::<Vec<_>>());
        let a = sample_uniform(25, 10, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a, sample_uniform(25, 10, &mut ChaCha8Rng::seed_from_u64(2)));
    }

    #[test]
    fn weighted_capacity_and_full_draw() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            sample_weighted(&[1.0, 2.0], 3, &mut rng),
            Err(Error::Capacity {
                requested: 3,
                available: 2
            })
        ));
        assert_eq!(sample_weighted(&[1.0, 4.0, 2.0], 3, &mut rng).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn equal_weights_are_uniform() {
        // chi-square over 10 items, 10k single draws; 21.67 is the 0.99 quantile at 9 df
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counts = [0usize; 10];
        for _ in 0..10_000 {
            counts[sample_weighted(&[1.0; 10], 1, &mut rng).unwrap()[0]] += 1;
        }
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0).sum();
        assert!(chi2 < 21.67, "chi2 {chi2}");
    }

    proptest::proptest! {
        #[test]
        fn weighted_output_is_distinct_subset(ws in proptest::collection::vec(0.5f64..8.0, 1..40), seed in 0u64..1000, frac in 0.0f64..1.0) {
            let n = (frac * ws.len() as f64) as usize;
            let idx = sample_weighted(&ws, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            proptest::prop_assert_eq!(idx.len(), n);
            proptest::prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            proptest::prop_assert!(idx.iter().all(|&i| i < ws.len()));
        }

        #[test]
        fn weight_is_bounded_and_non_increasing(d in 0i64..1000) {
            proptest::prop_assert!(weight(Some(d)) >= 1);
            proptest::prop_assert!(weight(Some(d + 1)) <= weight(Some(d)));
        }
    }
}
