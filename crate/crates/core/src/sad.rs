//! Unsupervised speech activity detection and segment formation.
//!
//! Three per-frame cues (log energy, periodicity, negated spectral flatness)
//! are z-scored across the call and fused into one score by their leading
//! principal component. The median-smoothed score is split into two clusters
//! by 1-D 2-means; the higher cluster is speech.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{Segment, MAX_CALL_SECONDS, MAX_SEGMENT_SECONDS, MIN_SEGMENT_SECONDS};
use crate::dsp::{analyze_frames, default_frame_count, frame_time, AudioBuffer, FRAME_LEN, PIPELINE_SAMPLE_RATE};
use crate::error::{Error, Result};

/// Which cues feed the fused score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SadCues {
    pub energy: bool,
    pub voicing: bool,
    pub flatness: bool,
}

impl Default for SadCues {
    fn default() -> Self {
        SadCues {
            energy: true,
            voicing: true,
            flatness: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SadConfig {
    /// Median filter length in frames; odd.
    pub smoothing_window: usize,
    /// Nonspeech gaps up to this long (seconds) are bridged.
    pub merge_gap_s: f64,
    pub min_segment_s: f64,
    pub max_segment_s: f64,
    pub cues: SadCues,
}

impl Default for SadConfig {
    fn default() -> Self {
        SadConfig {
            smoothing_window: 11,
            merge_gap_s: 0.3,
            min_segment_s: MIN_SEGMENT_SECONDS,
            max_segment_s: MAX_SEGMENT_SECONDS,
            cues: SadCues::default(),
        }
    }
}

impl SadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_window == 0 || self.smoothing_window % 2 == 0 {
            return Err(Error::Config(format!(
                "smoothing window must be odd, got {}",
                self.smoothing_window
            )));
        }
        if !(self.min_segment_s < self.max_segment_s) || self.min_segment_s < 0.0 || self.merge_gap_s < 0.0 {
            return Err(Error::Config(format!(
                "segment bounds {}..{} s with merge gap {} s",
                self.min_segment_s, self.max_segment_s, self.merge_gap_s
            )));
        }
        if !(self.cues.energy || self.cues.voicing || self.cues.flatness) {
            return Err(Error::Config("no SAD cue enabled".into()));
        }
        Ok(())
    }
}

/// Speech decision per frame on the 25 ms / 10 ms grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechMask {
    pub frames: Vec<bool>,
    /// Length of the call; runs touching the last frame extend to it.
    pub duration_s: f64,
}

impl SpeechMask {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn speech_frames(&self) -> usize {
        self.frames.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentMode {
    /// Keep only runs within the annotation duration bounds.
    Eligible,
    Raw,
}

fn zscore(x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    if sd <= 1e-12 * m.abs().max(1.0) {
        return None;
    }
    Some(x.iter().map(|v| (v - m) / sd).collect())
}

/// Eigenvector of the largest eigenvalue of a small symmetric matrix (cyclic Jacobi).
pub fn leading_eigenvector(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let best = (0..n).max_by(|&i, &j| a[i][i].total_cmp(&a[j][j])).unwrap_or(0);
    v.iter().map(|row| row[best]).collect()
}

/// Projects the z-scored cues onto their first principal component, oriented
/// to correlate positively with the first cue. `None` if every cue is constant.
pub fn fused_score(cues: &[Vec<f64>]) -> Option<Vec<f64>> {
    let z: Vec<Vec<f64>> = cues.iter().filter_map(|c| zscore(c)).collect();
    if z.is_empty() {
        return None;
    }
    let t = z[0].len() as f64;
    let d = z.len();
    let cov: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum::<f64>() / t).collect())
        .collect();
    let w = leading_eigenvector(&cov);
    let mut score: Vec<f64> = (0..z[0].len()).map(|f| (0..d).map(|i| w[i] * z[i][f]).sum()).collect();
    let orient: f64 = score.iter().zip(&z[0]).map(|(s, e)| s * e).sum();
    if orient < 0.0 {
        score.iter_mut().for_each(|s| *s = -*s);
    }
    Some(score)
}

/// Running median with the window truncated at the edges.
pub fn median_filter(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut buf = Vec::with_capacity(window);
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            buf.clear();
            buf.extend_from_slice(&x[lo..hi]);
            buf.sort_by(f64::total_cmp);
            let m = buf.len();
            if m % 2 == 1 {
                buf[m / 2]
            } else {
                0.5 * (buf[m / 2 - 1] + buf[m / 2])
            }
        })
        .collect()
}

/// 1-D 2-means from centroids at min and max. Returns the midpoint between
/// the converged centroids, or `None` when all values are equal.
pub fn two_means_threshold(x: &[f64]) -> Option<f64> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    let (mut c0, mut c1) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (c0 + c1);
        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
        for &v in x {
            if v > mid {
                s1 += v;
                n1 += 1;
            } else {
                s0 += v;
                n0 += 1;
            }
        }
        let (m0, m1) = (s0 / n0 as f64, s1 / n1 as f64);
        if m0 == c0 && m1 == c1 {
            break;
        }
        c0 = m0;
        c1 = m1;
    }
    Some(0.5 * (c0 + c1))
}

/// Frame-level speech mask for a whole call.
///
/// Calls shorter than three frames get an all-nonspeech mask of their frame count.
pub fn sad(audio: &AudioBuffer, cfg: &SadConfig) -> Result<SpeechMask> {
    cfg.validate()?;
    audio.require_pipeline_rate()?;
    if audio.duration_s() > MAX_CALL_SECONDS {
        return Err(Error::Domain(format!(
            "call lasts {:.1} s, limit is {MAX_CALL_SECONDS} s",
            audio.duration_s()
        )));
    }
    let n = default_frame_count(audio.samples.len());
    if n < 3 {
        return Ok(SpeechMask {
            frames: vec![false; n],
            duration_s: audio.duration_s(),
        });
    }
    let desc = analyze_frames(audio)?;
    let mut cues = Vec::new();
    if cfg.cues.energy {
        cues.push(desc.iter().map(|d| d.log_energy).collect::<Vec<_>>());
    }
    if cfg.cues.voicing {
        cues.push(desc.iter().map(|d| d.voicing).collect());
    }
    if cfg.cues.flatness {
        cues.push(desc.iter().map(|d| -d.flatness).collect());
    }
    let Some(score) = fused_score(&cues) else {
        warn!("SAD cues are constant over the call; marking all frames nonspeech");
        return Ok(SpeechMask {
            frames: vec![false; n],
            duration_s: audio.duration_s(),
        });
    };
    let smooth = median_filter(&score, cfg.smoothing_window);
    let Some(thr) = two_means_threshold(&smooth) else {
        warn!("smoothed SAD score is constant; marking all frames nonspeech");
        return Ok(SpeechMask {
            frames: vec![false; n],
            duration_s: audio.duration_s(),
        });
    };
    Ok(SpeechMask {
        frames: smooth.iter().map(|&s| s > thr).collect(),
        duration_s: audio.duration_s(),
    })
}

/// Maximal speech runs with short gaps bridged, as `(start_s, end_s)` pairs.
///
/// A run from frame `a` to `b` spans the start of `a` to the end of `b`.
pub fn speech_runs(mask: &SpeechMask, merge_gap_s: f64) -> Vec<(f64, f64)> {
    let shift_s = frame_time(1);
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    let f = &mask.frames;
    while i < f.len() {
        if !f[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < f.len() && f[i] {
            i += 1;
        }
        let end = i - 1;
        match runs.last_mut() {
            Some(last) if (start - last.1 - 1) as f64 * shift_s <= merge_gap_s + 1e-9 => last.1 = end,
            _ => runs.push((start, end)),
        }
    }
    let frame_len_s = FRAME_LEN as f64 / PIPELINE_SAMPLE_RATE as f64;
    let last = f.len().saturating_sub(1);
    runs.into_iter()
        .map(|(a, b)| {
            let end = if b == last { mask.duration_s } else { frame_time(b) + frame_len_s };
            (frame_time(a), end.min(mask.duration_s))
        })
        .collect()
}

/// Converts a mask into segments with ids `<call_id>_s<NNN>`.
pub fn form_segments(mask: &SpeechMask, call_id: &str, cfg: &SadConfig, mode: SegmentMode) -> Vec<Segment> {
    speech_runs(mask, cfg.merge_gap_s)
        .into_iter()
        .filter(|(a, b)| {
            let d = b - a;
            mode == SegmentMode::Raw || (d >= cfg.min_segment_s - 1e-9 && d <= cfg.max_segment_s + 1e-9)
        })
        .enumerate()
        .map(|(k, (start_s, end_s))| Segment {
            segment_id: format!("{call_id}_s{k:03}"),
            call_id: call_id.to_string(),
            start_s: (start_s * 1000.0).round() / 1000.0,
            end_s: (end_s * 1000.0).round() / 1000.0,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn mask_from_seconds(total_s: f64, speech: &[(f64, f64)]) -> SpeechMask {
        let n = default_frame_count((total_s * 8000.0) as usize);
        SpeechMask {
            frames: (0..n)
                .map(|i| {
                    let t = frame_time(i);
                    speech.iter().any(|&(a, b)| t >= a - 1e-9 && t + 0.025 <= b + 1e-9)
                })
                .collect(),
            duration_s: total_s,
        }
    }

    #[test]
    fn all_speech_is_one_segment() {
        let m = mask_from_seconds(10.0, &[(0.0, 10.0)]);
        let segs = form_segments(&m, "c1", &SadConfig::default(), SegmentMode::Eligible);
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].start_s, segs[0].end_s), (0.0, 10.0));
    }

    #[test]
    fn short_gap_is_bridged() {
        let m = mask_from_seconds(12.0, &[(0.0, 4.0), (4.2, 8.0)]);
        let segs = form_segments(&m, "c1", &SadConfig::default(), SegmentMode::Eligible);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].start_s, 0.0);
        assert!((segs[0].end_s - 8.0).abs() < 0.011);
    }

    #[test]
    fn short_run_dropped_only_when_eligible() {
        let m = mask_from_seconds(10.0, &[(1.0, 3.0)]);
        let cfg = SadConfig::default();
        assert!(form_segments(&m, "c", &cfg, SegmentMode::Eligible).is_empty());
        assert_eq!(form_segments(&m, "c", &cfg, SegmentMode::Raw).len(), 1);
    }

    #[test]
    fn silence_is_nonspeech() {
        let audio = AudioBuffer::new(vec![0.0; 16000], 8000).unwrap();
        let m = sad(&audio, &SadConfig::default()).unwrap();
        assert_eq!(m.len(), default_frame_count(16000));
        assert_eq!(m.speech_frames(), 0);
        let tiny = AudioBuffer::new(vec![0.1; 300], 8000).unwrap();
        assert_eq!(sad(&tiny, &SadConfig::default()).unwrap().frames, vec![false, false]);
    }

    fn harmonic(t: f64) -> f64 {
        (1..=5).map(|h| (2.0 * PI * 150.0 * h as f64 * t).sin() / h as f64).sum::<f64>() * 0.2
    }

    #[test]
    fn bursts_and_silence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8 * 8000;
        let samples: Vec<f32> = (0..n)
            .map(|i| {
                let t = i as f64 / 8000.0;
                let on = (t as usize) % 2 == 0;
                let s = if on { harmonic(t) } else { 0.0 };
                (s + 1e-3 * rng.random_range(-1.0..1.0)) as f32
            })
            .collect();
        let m = sad(&AudioBuffer::new(samples, 8000).unwrap(), &SadConfig::default()).unwrap();
        let correct = m
            .frames
            .iter()
            .enumerate()
            .filter(|(i, &s)| {
                let mid = frame_time(*i) + 0.0125;
                s == ((mid as usize) % 2 == 0)
            })
            .count();
        let acc = correct as f64 / m.len() as f64;
        assert!(acc >= 0.9, "accuracy {acc}");
    }

    #[test]
    fn harmonic_beats_white_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples: Vec<f32> = (0..6 * 8000)
            .map(|i| {
                let t = i as f64 / 8000.0;
                if t < 3.0 {
                    (0.1 * rng.random_range(-1.0..1.0)) as f32
                } else {
                    harmonic(t) as f32 * 0.5
                }
            })
            .collect();
        let m = sad(&AudioBuffer::new(samples, 8000).unwrap(), &SadConfig::default()).unwrap();
        let half = m.len() / 2;
        let noise_speech = m.frames[..half - 20].iter().filter(|&&b| b).count();
        let tone_speech = m.frames[half + 20..].iter().filter(|&&b| b).count();
        assert!(tone_speech as f64 > 0.9 * (m.len() - half - 20) as f64);
        assert!(noise_speech < (half - 20) / 10, "{noise_speech}");
    }

    #[test]
    fn two_means_separates_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..400)
            .map(|i| rng.sample(normal) + if i % 3 == 0 { 12.0 } else { 0.0 })
            .collect();
        let thr = two_means_threshold(&x).unwrap();
        for (i, v) in x.iter().enumerate() {
            assert_eq!(*v > thr, i % 3 == 0);
        }
        assert!(two_means_threshold(&[2.0; 5]).is_none());
    }

    #[test]
    fn eigenvector_of_known_matrix() {
        let m = vec![vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 1.0]];
        let v = leading_eigenvector(&m);
        let r = 1.0 / 2f64.sqrt();
        assert!((v[0].abs() - r).abs() < 1e-12 && (v[1].abs() - r).abs() < 1e-12 && v[2].abs() < 1e-12);
        assert!(v[0] * v[1] > 0.0);
    }

    #[test]
    fn median_of_window() {
        assert_eq!(median_filter(&[1.0, 9.0, 2.0, 3.0, 100.0], 3), vec![5.0, 2.0, 3.0, 3.0, 51.5]);
        assert!(SadConfig {
            smoothing_window: 4,
            ..SadConfig::default()
        }
        .validate()
        .is_err());
    }

    proptest::proptest! {
        #[test]
        fn segments_ordered_and_monotone(bits in proptest::collection::vec(proptest::bool::ANY, 0..600), extra in 0usize..600) {
            let dur = frame_time(bits.len()) + 0.015;
            let mask = SpeechMask { frames: bits.clone(), duration_s: dur };
            let cfg = SadConfig::default();
            let segs = form_segments(&mask, "c", &cfg, SegmentMode::Raw);
            let total = |s: &[Segment]| s.iter().map(|x| x.duration_s()).sum::<f64>();
            for w in segs.windows(2) {
                proptest::prop_assert!(w[0].end_s < w[1].start_s);
            }
            for s in &segs {
                proptest::prop_assert!(s.start_s >= 0.0 && s.end_s <= dur + 1e-9);
            }
            if !bits.is_empty() {
                let mut more = bits.clone();
                more[extra % bits.len()] = true;
                let grown = form_segments(&SpeechMask { frames: more, duration_s: dur }, "c", &cfg, SegmentMode::Raw);
                proptest::prop_assert!(total(&grown) >= total(&segs) - 1e-9);
            }
        }
    }
}
