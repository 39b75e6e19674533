//! Fixed-length utterance descriptor: 11 frame-level descriptors summarized by
//! 7 functionals over voiced frames (77 entries), followed by 11 prosodic and
//! whole-utterance measures, 88 entries in total.
//!
//! Registry order is `<descriptor>_<functional>` with descriptors outermost:
//!
//! descriptors: `log_energy`, `f0_hz`, `voicing`, `centroid_hz`, `flux`,
//! `slope_db_per_khz`, `flatness`, `cep1`..`cep4`
//!
//! functionals: `mean`, `std`, `p20`, `p50`, `p80`, `range`, `slope`
//! (least-squares slope against frame time in seconds)
//!
//! extras: `voiced_fraction`, `voiced_segments_per_s`, `voiced_run_mean_s`,
//! `voiced_run_std_s`, `unvoiced_run_mean_s`, `unvoiced_run_std_s`,
//! `f0_jitter_semitones`, `energy_shimmer`, `log_energy_mean_all`,
//! `alpha_ratio_db_mean`, `hammarberg_db_mean`

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::frames::{analyze_frames, FrameDescriptors};
use super::{frame_time, AudioBuffer, FRAME_SHIFT, PIPELINE_SAMPLE_RATE};
use crate::error::{Error, Result};

pub const N_FUNCTIONALS: usize = 88;

const DESCRIPTORS: [&str; 11] = [
    "log_energy",
    "f0_hz",
    "voicing",
    "centroid_hz",
    "flux",
    "slope_db_per_khz",
    "flatness",
    "cep1",
    "cep2",
    "cep3",
    "cep4",
];

const STATS: [&str; 7] = ["mean", "std", "p20", "p50", "p80", "range", "slope"];

const EXTRAS: [&str; 11] = [
    "voiced_fraction",
    "voiced_segments_per_s",
    "voiced_run_mean_s",
    "voiced_run_std_s",
    "unvoiced_run_mean_s",
    "unvoiced_run_std_s",
    "f0_jitter_semitones",
    "energy_shimmer",
    "log_energy_mean_all",
    "alpha_ratio_db_mean",
    "hammarberg_db_mean",
];

static NAMES: LazyLock<Vec<String>> = LazyLock::new(|| {
    let mut names: Vec<String> = DESCRIPTORS
        .iter()
        .flat_map(|d| STATS.iter().map(move |s| format!("{d}_{s}")))
        .collect();
    names.extend(EXTRAS.iter().map(|s| s.to_string()));
    assert_eq!(names.len(), N_FUNCTIONALS);
    names
});

pub fn functional_names() -> &'static [String] {
    &NAMES
}

pub fn functional_index(name: &str) -> Option<usize> {
    NAMES.iter().position(|n| n == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalsVector {
    pub values: Vec<f64>,
    /// False when no frame was voiced; `values` is then all zeros.
    pub valid: bool,
}

impl FunctionalsVector {
    pub fn names(&self) -> &'static [String] {
        functional_names()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        functional_index(name).map(|i| self.values[i])
    }
}

fn descriptor_value(f: &FrameDescriptors, i: usize) -> f64 {
    match i {
        0 => f.log_energy,
        1 => f.f0_hz,
        2 => f.voicing,
        3 => f.centroid_hz,
        4 => f.flux,
        5 => f.slope_db_per_khz,
        6 => f.flatness,
        7..=10 => f.cepstra[i - 7],
        _ => unreachable!(),
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

fn std_pop(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn time_slope(t: &[f64], y: &[f64]) -> f64 {
    if t.len() < 2 {
        return 0.0;
    }
    let (mt, my) = (mean(t), mean(y));
    let den: f64 = t.iter().map(|v| (v - mt).powi(2)).sum();
    if den <= 0.0 {
        return 0.0;
    }
    t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum::<f64>() / den
}

fn summarize(t: &[f64], y: &[f64], out: &mut Vec<f64>) {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    out.push(mean(y));
    out.push(std_pop(y));
    out.push(percentile(&sorted, 0.2));
    out.push(percentile(&sorted, 0.5));
    out.push(percentile(&sorted, 0.8));
    out.push(sorted[sorted.len() - 1] - sorted[0]);
    out.push(time_slope(t, y));
}

/// Lengths (in frames) of maximal runs where `voiced == want`.
fn runs(voiced: &[bool], want: bool) -> Vec<f64> {
    let mut out = Vec::new();
    let mut len = 0usize;
    for &v in voiced {
        if v == want {
            len += 1;
        } else if len > 0 {
            out.push(len as f64);
            len = 0;
        }
    }
    if len > 0 {
        out.push(len as f64);
    }
    out
}

/// Summarizes descriptor frames that have already been computed.
pub fn functionals_from_frames(frames: &[FrameDescriptors]) -> FunctionalsVector {
    let voiced: Vec<bool> = frames.iter().map(|f| f.voiced()).collect();
    let idx: Vec<usize> = (0..frames.len()).filter(|&i| voiced[i]).collect();
    if idx.is_empty() {
        return FunctionalsVector {
            values: vec![0.0; N_FUNCTIONALS],
            valid: false,
        };
    }
    let t: Vec<f64> = idx.iter().map(|&i| frame_time(i)).collect();
    let mut values = Vec::with_capacity(N_FUNCTIONALS);
    for d in 0..DESCRIPTORS.len() {
        let y: Vec<f64> = idx.iter().map(|&i| descriptor_value(&frames[i], d)).collect();
        summarize(&t, &y, &mut values);
    }

    let shift_s = FRAME_SHIFT as f64 / PIPELINE_SAMPLE_RATE as f64;
    let total_s = frames.len() as f64 * shift_s;
    let vr: Vec<f64> = runs(&voiced, true).iter().map(|r| r * shift_s).collect();
    let ur: Vec<f64> = runs(&voiced, false).iter().map(|r| r * shift_s).collect();

    let (mut jitter, mut shimmer, mut pairs) = (0.0, 0.0, 0usize);
    for w in idx.windows(2) {
        if w[1] == w[0] + 1 {
            let (a, b) = (&frames[w[0]], &frames[w[1]]);
            jitter += (12.0 * (b.f0_hz / a.f0_hz).log2()).abs();
            shimmer += (b.log_energy - a.log_energy).abs();
            pairs += 1;
        }
    }
    let per_pair = |x: f64| if pairs > 0 { x / pairs as f64 } else { 0.0 };

    values.push(idx.len() as f64 / frames.len() as f64);
    values.push(vr.len() as f64 / total_s);
    values.push(mean(&vr));
    values.push(std_pop(&vr));
    values.push(mean(&ur));
    values.push(std_pop(&ur));
    values.push(per_pair(jitter));
    values.push(per_pair(shimmer));
    values.push(mean(&frames.iter().map(|f| f.log_energy).collect::<Vec<_>>()));
    values.push(mean(&idx.iter().map(|&i| frames[i].alpha_ratio_db).collect::<Vec<_>>()));
    values.push(mean(&idx.iter().map(|&i| frames[i].hammarberg_db).collect::<Vec<_>>()));
    debug_assert_eq!(values.len(), N_FUNCTIONALS);
    FunctionalsVector { values, valid: true }
}

pub fn functionals(audio: &AudioBuffer) -> Result<FunctionalsVector> {
    if audio.samples.is_empty() {
        return Err(Error::Validation("functionals need nonempty audio".into()));
    }
    Ok(functionals_from_frames(&analyze_frames(audio)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::f64::consts::PI;

    fn tone(freq: f64, seconds: f64, amp: f64) -> AudioBuffer {
        let n = (seconds * 8000.0) as usize;
        AudioBuffer::new(
            (0..n)
                .map(|i| (amp * (2.0 * PI * freq * i as f64 / 8000.0).sin()) as f32)
                .collect(),
            8000,
        )
        .unwrap()
    }

    #[test]
    fn registry_is_88_unique_names() {
        let names = functional_names();
        assert_eq!(names.len(), 88);
        assert_eq!(names.iter().collect::<HashSet<_>>().len(), 88);
        assert_eq!(names[0], "log_energy_mean");
        assert_eq!(names[7], "f0_hz_mean");
        assert_eq!(names[87], "hammarberg_db_mean");
    }

    #[test]
    fn silence_is_invalid_zero_vector() {
        let v = functionals(&AudioBuffer::new(vec![0.0; 8000], 8000).unwrap()).unwrap();
        assert!(!v.valid);
        assert_eq!(v.values, vec![0.0; 88]);
    }

    #[test]
    fn f0_of_150hz_tone() {
        let v = functionals(&tone(150.0, 1.0, 0.5)).unwrap();
        assert!(v.valid);
        let f0 = v.get("f0_hz_mean").unwrap();
        assert!((f0 - 150.0).abs() < 5.0, "{f0}");
        assert!((v.get("voiced_fraction").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn steady_tone_has_flat_energy() {
        // 200 Hz completes a whole number of periods per 200-sample frame.
        let v = functionals(&tone(200.0, 1.0, 0.3)).unwrap();
        assert!(v.get("log_energy_std").unwrap().abs() < 1e-6);
        assert!(v.get("log_energy_range").unwrap().abs() < 1e-5);
    }

    #[test]
    fn deterministic() {
        let a = tone(173.0, 0.7, 0.4);
        let x = functionals(&a).unwrap();
        let y = functionals(&a).unwrap();
        assert!(x.values.iter().zip(&y.values).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn empty_audio_is_error() {
        assert!(functionals(&AudioBuffer::new(vec![], 8000).unwrap()).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&s, 0.5), 3.0);
        assert!((percentile(&s, 0.2) - 1.8).abs() < 1e-12);
        assert_eq!(runs(&[true, true, false, true], true), vec![2.0, 1.0]);
    }
}
