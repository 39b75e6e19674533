//! Synthetic corpora for exercising the pipeline without clinical recordings.
//!
//! Each subject follows a week-by-week mood timeline. Every week has one
//! assessment call (with HamD/YMRS drawn to match the week's mood) and some
//! personal calls. A call is a run of voiced segments separated by silence;
//! each segment carries latent activation and valence that set its loudness,
//! pitch, spectral tilt and a formant-like resonance. Activation drives three
//! of these cues, valence only the resonance, which also carries random jitter.
//!
//! [`simulate_predictions`] skips audio and models altogether and draws
//! emotion predictions directly, for calibrating the mood statistics.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::aggregate::LabelRecord;
use crate::corpus::{Assessment, Call, CallKind, Manifest, MoodLabel, Segment, Sex, Subject};
use crate::dsp::{default_frame_count, frame_time, write_wav, AudioBuffer, FRAME_LEN, PIPELINE_SAMPLE_RATE};
use crate::error::{self, Error, Result};
use crate::eval::derive_seed;
use crate::mood::ScoredPrediction;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRUTH_FILE: &str = "truth.json";
pub const AUDIO_DIR: &str = "audio";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_subjects: usize,
    /// Subject base pitch is drawn uniformly from this range.
    pub f0_range_hz: (f64, f64),
    /// Weeks spent in each state; the three episodes appear in random order.
    pub euthymic_weeks: usize,
    pub manic_weeks: usize,
    pub depressed_weeks: usize,
    /// The first call of each week is the assessment call.
    pub calls_per_week: usize,
    pub segments_per_call: usize,
    pub segment_s: (f64, f64),
    pub gap_s: (f64, f64),
    /// Mean latent shift of manic (+) and depressed (-) weeks.
    pub manic_activation_shift: f64,
    pub depressed_activation_shift: f64,
    pub manic_valence_shift: f64,
    pub depressed_valence_shift: f64,
    /// Spread of the latents around the state mean.
    pub activation_sd: f64,
    pub valence_sd: f64,
    /// Target Pearson correlation of activation and valence labels.
    pub coupling: f64,
    /// Level change in dB per unit of activation.
    pub level_db_per_activation: f64,
    /// Pitch change in semitones per unit of activation.
    pub f0_semitones_per_activation: f64,
    /// Resonance shift in Hz per unit of valence.
    pub resonance_hz_per_valence: f64,
    /// Per-segment loudness jitter unrelated to emotion.
    pub level_jitter_db: f64,
    /// Per-segment resonance jitter unrelated to emotion.
    pub resonance_jitter_hz: f64,
    /// Background noise level in dBFS.
    pub noise_db: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 12,
            f0_range_hz: (110.0, 220.0),
            euthymic_weeks: 2,
            manic_weeks: 2,
            depressed_weeks: 2,
            calls_per_week: 2,
            segments_per_call: 4,
            segment_s: (3.5, 5.0),
            gap_s: (0.6, 1.2),
            manic_activation_shift: 0.3,
            depressed_activation_shift: 0.3,
            manic_valence_shift: 0.1,
            depressed_valence_shift: 0.2,
            activation_sd: 0.3,
            valence_sd: 0.3,
            coupling: 0.46,
            level_db_per_activation: 9.0,
            f0_semitones_per_activation: 3.0,
            resonance_hz_per_valence: 400.0,
            level_jitter_db: 1.0,
            resonance_jitter_hz: 120.0,
            noise_db: -60.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_subjects == 0 || self.calls_per_week == 0 || self.segments_per_call == 0 {
            return bad("subjects, calls per week and segments per call must be positive");
        }
        if self.euthymic_weeks + self.manic_weeks + self.depressed_weeks == 0 {
            return bad("the mood timeline has no weeks");
        }
        if !(self.f0_range_hz.0 > 0.0 && self.f0_range_hz.0 <= self.f0_range_hz.1) {
            return bad("f0 range must be positive and ordered");
        }
        if !(self.segment_s.0 > 0.0 && self.segment_s.0 <= self.segment_s.1) {
            return bad("segment duration range must be positive and ordered");
        }
        if !(self.gap_s.0 > 0.0 && self.gap_s.0 <= self.gap_s.1) {
            return bad("gap range must be positive and ordered");
        }
        if !(self.activation_sd > 0.0 && self.valence_sd > 0.0) {
            return bad("latent spreads must be positive");
        }
        if !(-1.0..=1.0).contains(&self.coupling) {
            return bad("coupling must lie in [-1, 1]");
        }
        Ok(())
    }

    fn state_shift(&self, mood: MoodLabel) -> (f64, f64) {
        match mood {
            MoodLabel::Manic => (self.manic_activation_shift, self.manic_valence_shift),
            MoodLabel::Depressed => (-self.depressed_activation_shift, -self.depressed_valence_shift),
            _ => (0.0, 0.0),
        }
    }

    /// Correlation of the per-segment noise that makes the overall label
    /// correlation hit `coupling` once state shifts are added.
    pub fn noise_correlation(&self) -> f64 {
        let weeks = [
            (MoodLabel::Euthymic, self.euthymic_weeks),
            (MoodLabel::Manic, self.manic_weeks),
            (MoodLabel::Depressed, self.depressed_weeks),
        ];
        let total: f64 = weeks.iter().map(|w| w.1 as f64).sum();
        let moments = |f: &dyn Fn((f64, f64)) -> f64| -> f64 {
            weeks.iter().map(|&(m, n)| n as f64 * f(self.state_shift(m))).sum::<f64>() / total
        };
        let (ma, mv) = (moments(&|s| s.0), moments(&|s| s.1));
        let va = moments(&|s| (s.0 - ma).powi(2));
        let vv = moments(&|s| (s.1 - mv).powi(2));
        let c = moments(&|s| (s.0 - ma) * (s.1 - mv));
        let (sa, sv) = (self.activation_sd, self.valence_sd);
        let target = self.coupling * ((va + sa * sa) * (vv + sv * sv)).sqrt();
        ((target - c) / (sa * sv)).clamp(-0.99, 0.99)
    }
}

/// HamD and YMRS consistent with a mood label (inverse of the labeling rule).
pub fn sample_scores<R: Rng + ?Sized>(mood: MoodLabel, rng: &mut R) -> (u32, u32) {
    match mood {
        MoodLabel::Euthymic => (rng.random_range(0..=6), rng.random_range(0..=6)),
        MoodLabel::Manic => (rng.random_range(0..=9), rng.random_range(10..=30)),
        MoodLabel::Depressed => (rng.random_range(10..=30), rng.random_range(0..=9)),
        MoodLabel::Excluded => (rng.random_range(7..=9), rng.random_range(7..=9)),
    }
}

/// A generated speech segment with its latent emotion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSegment {
    pub segment_id: String,
    pub call_id: String,
    pub subject_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub activation: f64,
    pub valence: f64,
    pub mood: MoodLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub segments: Vec<TruthSegment>,
}

impl GroundTruth {
    /// Segment labels in the same shape aggregated ratings take.
    pub fn labels(&self) -> Vec<LabelRecord> {
        self.segments
            .iter()
            .map(|s| LabelRecord {
                segment_id: s.segment_id.clone(),
                call_id: s.call_id.clone(),
                subject_id: s.subject_id.clone(),
                activation: s.activation,
                valence: s.valence,
            })
            .collect()
    }

    /// Labels for detected segments: each takes the truth segment of the same
    /// call it overlaps most, provided the overlap covers at least half of
    /// both. Detected segments without such a match are skipped.
    pub fn labels_for(&self, detected: &[Segment], manifest: &Manifest) -> Vec<LabelRecord> {
        detected
            .iter()
            .filter_map(|d| {
                let best = self
                    .segments
                    .iter()
                    .filter(|t| t.call_id == d.call_id)
                    .map(|t| (t, (d.end_s.min(t.end_s) - d.start_s.max(t.start_s)).max(0.0)))
                    .max_by(|a, b| a.1.total_cmp(&b.1))?;
                let (t, overlap) = best;
                let ok = overlap >= 0.5 * (t.end_s - t.start_s) && overlap >= 0.5 * (d.end_s - d.start_s);
                let subject = manifest.call(&d.call_id).map(|c| c.subject_id.clone())?;
                ok.then(|| LabelRecord {
                    segment_id: d.segment_id.clone(),
                    call_id: d.call_id.clone(),
                    subject_id: subject,
                    activation: t.activation,
                    valence: t.valence,
                })
            })
            .collect()
    }

    /// Frame-level speech mask of one call: a frame is speech when its centre
    /// lies inside a generated segment.
    pub fn mask(&self, call_id: &str, n_samples: usize) -> Vec<bool> {
        let half = FRAME_LEN as f64 / PIPELINE_SAMPLE_RATE as f64 / 2.0;
        let spans: Vec<(f64, f64)> = self
            .segments
            .iter()
            .filter(|s| s.call_id == call_id)
            .map(|s| (s.start_s, s.end_s))
            .collect();
        (0..default_frame_count(n_samples))
            .map(|i| {
                let c = frame_time(i) + half;
                spans.iter().any(|&(a, b)| c >= a && c < b)
            })
            .collect()
    }
}

/// Everything generated for one call.
#[derive(Debug, Clone)]
pub struct SynthCall {
    pub call: Call,
    pub assessment: Option<Assessment>,
    pub segments: Vec<TruthSegment>,
    pub audio: AudioBuffer,
}

#[derive(Debug, Clone)]
pub struct SynthSubject {
    pub subject: Subject,
    pub base_f0_hz: f64,
    pub timeline: Vec<MoodLabel>,
    pub calls: Vec<SynthCall>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub manifest: Manifest,
    pub truth: GroundTruth,
    pub subjects: Vec<SynthSubject>,
}

impl SynthCorpus {
    pub fn audio(&self, call_id: &str) -> Option<&AudioBuffer> {
        self.subjects
            .iter()
            .flat_map(|s| &s.calls)
            .find(|c| c.call.call_id == call_id)
            .map(|c| &c.audio)
    }

    pub fn calls(&self) -> impl Iterator<Item = &SynthCall> {
        self.subjects.iter().flat_map(|s| &s.calls)
    }
}

/// Acoustic settings of one segment.
struct Voice {
    amplitude: f64,
    f0: f64,
    tilt: f64,
    resonance_hz: f64,
}

/// One pitch period of a harmonic source, sampled on `n` points.
fn wavetable(v: &Voice, n: usize) -> Vec<f64> {
    let nyquist = PIPELINE_SAMPLE_RATE as f64 / 2.0;
    let harmonics = ((nyquist * 0.95) / v.f0).floor() as usize;
    let gains: Vec<f64> = (1..=harmonics)
        .map(|k| {
            let f = k as f64 * v.f0;
            let peak = 3.0 * (-((f - v.resonance_hz) / 250.0).powi(2)).exp();
            (k as f64).powf(-v.tilt) * (1.0 + peak)
        })
        .collect();
    let mut table: Vec<f64> = (0..n)
        .map(|i| {
            let ph = 2.0 * PI * i as f64 / n as f64;
            gains.iter().enumerate().map(|(k, g)| g * ((k + 1) as f64 * ph).sin()).sum()
        })
        .collect();
    let peak = table.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-12);
    table.iter_mut().for_each(|x| *x /= peak);
    table
}

fn render_segment<R: Rng + ?Sized>(v: &Voice, out: &mut [f64], rng: &mut R) {
    const TABLE: usize = 2048;
    let table = wavetable(v, TABLE);
    let sr = PIPELINE_SAMPLE_RATE as f64;
    let (vib_rate, vib_phase) = (rng.random_range(0.5..1.0), rng.random_range(0.0..2.0 * PI));
    let (syl_rate, syl_phase) = (rng.random_range(3.5..4.5), rng.random_range(0.0..2.0 * PI));
    let ramp = 0.02 * sr;
    let n = out.len() as f64;
    // short near-silent breaks between words, so voiced runs vary in number and length
    let n_breaks = (n / sr / 1.2).round() as usize;
    let breaks: Vec<(f64, f64)> = (0..n_breaks)
        .map(|_| (rng.random_range(0.1 * n..0.9 * n), rng.random_range(0.04..0.09) * sr))
        .collect();
    let mut phase = rng.random_range(0.0..1.0);
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / sr;
        let f0 = v.f0 * (1.0 + 0.05 * (2.0 * PI * vib_rate * t + vib_phase).sin());
        phase = (phase + f0 / sr).fract();
        let dip = breaks
            .iter()
            .map(|&(c, hw)| {
                // flat bottom over the inner half, raised-cosine flanks
                let d = ((i as f64 - c).abs() / hw - 0.5).max(0.0) * 2.0;
                if d < 1.0 { 0.5 + 0.5 * (PI * d).cos() } else { 0.0 }
            })
            .fold(0.0, f64::max);
        let env = (0.55 + 0.45 * (PI * syl_rate * t + syl_phase).sin().powi(2)) * (1.0 - dip);
        let edge = (i as f64 / ramp).min((n - i as f64) / ramp).min(1.0);
        *o += v.amplitude * env * edge * table[(phase * TABLE as f64) as usize % TABLE];
    }
}

fn latent<R: Rng + ?Sized>(cfg: &SynthConfig, mood: MoodLabel, rho: f64, rng: &mut R) -> (f64, f64) {
    let z = Normal::new(0.0, 1.0).expect("unit normal");
    let (za, zb) = (z.sample(rng), z.sample(rng));
    let zv = rho * za + (1.0 - rho * rho).sqrt() * zb;
    let (sa, sv) = cfg.state_shift(mood);
    (
        (sa + cfg.activation_sd * za).clamp(-1.0, 1.0),
        (sv + cfg.valence_sd * zv).clamp(-1.0, 1.0),
    )
}

fn timeline<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Vec<MoodLabel> {
    let mut episodes = vec![
        (MoodLabel::Euthymic, cfg.euthymic_weeks),
        (MoodLabel::Manic, cfg.manic_weeks),
        (MoodLabel::Depressed, cfg.depressed_weeks),
    ];
    episodes.shuffle(rng);
    episodes
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat_n(m, n))
        .collect()
}

fn subject_id(i: usize) -> String {
    format!("S{:02}", i + 1)
}

fn generate_subject(cfg: &SynthConfig, index: usize) -> Result<SynthSubject> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[index as u64]));
    let sid = subject_id(index);
    let base_f0_hz = rng.random_range(cfg.f0_range_hz.0..=cfg.f0_range_hz.1);
    let rho = cfg.noise_correlation();
    let moods = timeline(cfg, &mut rng);
    let noise = Normal::new(0.0, 10f64.powf(cfg.noise_db / 20.0)).map_err(|e| Error::Config(e.to_string()))?;
    let jitter = Normal::new(0.0, cfg.level_jitter_db.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let res_jitter = Normal::new(0.0, cfg.resonance_jitter_hz.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let start = NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date");
    let sr = PIPELINE_SAMPLE_RATE as f64;
    let mut calls = Vec::new();
    for (week, &mood) in moods.iter().enumerate() {
        let monday = start + Duration::days(7 * week as i64);
        let mut days: Vec<i64> = (1..7).collect();
        days.shuffle(&mut rng);
        for c in 0..cfg.calls_per_week {
            let kind = if c == 0 { CallKind::Assessment } else { CallKind::Personal };
            let day = if c == 0 { monday } else { monday + Duration::days(days[(c - 1) % days.len()]) };
            let call_id = format!("{sid}_w{:02}_c{c}", week + 1);
            let assessment = if kind == CallKind::Assessment {
                let (hamd, ymrs) = sample_scores(mood, &mut rng);
                Some(Assessment::new(format!("{sid}_a{:02}", week + 1), &sid, day, hamd, ymrs)?)
            } else {
                None
            };
            let mut spans = Vec::new();
            let mut t = rng.random_range(cfg.gap_s.0..=cfg.gap_s.1);
            for _ in 0..cfg.segments_per_call {
                let d = rng.random_range(cfg.segment_s.0..=cfg.segment_s.1);
                let (a, b) = ((t * 1000.0).round() / 1000.0, ((t + d) * 1000.0).round() / 1000.0);
                spans.push((a, b));
                t = b + rng.random_range(cfg.gap_s.0..=cfg.gap_s.1);
            }
            let duration_s = (t * 1000.0).round() / 1000.0;
            let mut samples: Vec<f64> = (0..(duration_s * sr).round() as usize).map(|_| noise.sample(&mut rng)).collect();
            let mut segments = Vec::new();
            for (k, &(a, b)) in spans.iter().enumerate() {
                let (act, val) = latent(cfg, mood, rho, &mut rng);
                let level_db = -20.0 + cfg.level_db_per_activation * act + jitter.sample(&mut rng);
                let voice = Voice {
                    amplitude: 10f64.powf(level_db / 20.0),
                    f0: base_f0_hz * 2f64.powf(cfg.f0_semitones_per_activation * act / 12.0),
                    tilt: 1.2 - 0.4 * act,
                    resonance_hz: 1000.0 + cfg.resonance_hz_per_valence * val + res_jitter.sample(&mut rng),
                };
                let (i0, i1) = ((a * sr).round() as usize, ((b * sr).round() as usize).min(samples.len()));
                render_segment(&voice, &mut samples[i0..i1], &mut rng);
                segments.push(TruthSegment {
                    segment_id: format!("{call_id}_s{k:03}"),
                    call_id: call_id.clone(),
                    subject_id: sid.clone(),
                    start_s: a,
                    end_s: b,
                    activation: act,
                    valence: val,
                    mood,
                });
            }
            let audio = AudioBuffer::new(samples.iter().map(|&x| x.clamp(-1.0, 1.0) as f32).collect(), PIPELINE_SAMPLE_RATE)?;
            calls.push(SynthCall {
                call: Call {
                    call_id: call_id.clone(),
                    subject_id: sid.clone(),
                    kind,
                    start_time: day.and_time(NaiveTime::from_hms_opt(10 + c as u32 % 10, 0, 0).expect("valid time")),
                    duration_s,
                    audio_path: format!("{AUDIO_DIR}/{call_id}.wav"),
                    linked_assessment_id: assessment.as_ref().map(|a| a.assessment_id.clone()),
                },
                assessment,
                segments,
                audio,
            });
        }
    }
    Ok(SynthSubject {
        subject: Subject {
            subject_id: sid,
            sex: if index % 2 == 0 { Sex::Female } else { Sex::Male },
            age_years: Some(rng.random_range(20..=65)),
        },
        base_f0_hz,
        timeline: moods,
        calls,
    })
}

/// Builds the corpus in memory. Subjects are generated in parallel, each from
/// its own derived seed, so the output depends only on the config.
pub fn synthesize(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let subjects: Vec<SynthSubject> = (0..cfg.n_subjects)
        .into_par_iter()
        .map(|i| generate_subject(cfg, i))
        .collect::<Result<_>>()?;
    let mut manifest = Manifest::default();
    let mut truth = Vec::new();
    for s in &subjects {
        manifest.subjects.push(s.subject.clone());
        for c in &s.calls {
            manifest.assessments.extend(c.assessment.clone());
            manifest.calls.push(c.call.clone());
            for t in &c.segments {
                manifest.segments.push(Segment {
                    segment_id: t.segment_id.clone(),
                    call_id: t.call_id.clone(),
                    start_s: t.start_s,
                    end_s: t.end_s,
                });
            }
            truth.extend(c.segments.iter().cloned());
        }
    }
    manifest.validate()?;
    Ok(SynthCorpus {
        manifest,
        truth: GroundTruth {
            config: cfg.clone(),
            segments: truth,
        },
        subjects,
    })
}

/// Paths written by [`generate_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFiles {
    pub manifest: PathBuf,
    pub truth: PathBuf,
    pub audio_dir: PathBuf,
}

/// Writes `manifest.json`, `truth.json` and one WAV per call under `out_dir`.
/// Audio paths in the manifest are relative to `out_dir`.
pub fn generate_corpus(cfg: &SynthConfig, out_dir: &Path) -> Result<(SynthCorpus, CorpusFiles)> {
    let corpus = synthesize(cfg)?;
    let audio_dir = out_dir.join(AUDIO_DIR);
    std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;
    corpus
        .calls()
        .collect::<Vec<_>>()
        .par_iter()
        .try_for_each(|c| write_wav(&out_dir.join(&c.call.audio_path), &c.audio))?;
    let files = CorpusFiles {
        manifest: out_dir.join(MANIFEST_FILE),
        truth: out_dir.join(TRUTH_FILE),
        audio_dir,
    };
    crate::corpus::save_manifest(&corpus.manifest, &files.manifest)?;
    error::write_json(&files.truth, &corpus.truth)?;
    Ok((corpus, files))
}

pub fn load_truth(path: &Path) -> Result<GroundTruth> {
    error::read_json(path)
}

/// Settings for drawing emotion predictions straight from mood states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MoodSimConfig {
    pub n_subjects: usize,
    pub euthymic_calls: usize,
    pub manic_calls: usize,
    pub depressed_calls: usize,
    pub segments_per_call: usize,
    /// Shift of manic (+) and depressed (-) predictions in units of the
    /// within-state spread.
    pub effect_size: f64,
    /// Valence shift as a fraction of the activation shift.
    pub valence_ratio: f64,
    /// Spread of per-call random offsets, in the same units. Segment-level
    /// tests assume independent segments, so leave at 0 for calibration.
    pub call_sd: f64,
}

impl Default for MoodSimConfig {
    fn default() -> Self {
        MoodSimConfig {
            n_subjects: 12,
            euthymic_calls: 4,
            manic_calls: 3,
            depressed_calls: 3,
            segments_per_call: 10,
            effect_size: 1.0,
            valence_ratio: 0.5,
            call_sd: 0.0,
        }
    }
}

/// Raw (un-normalized) predictions on assessment-call segments. Each subject
/// gets its own offset and scale, which euthymic normalization removes.
pub fn simulate_predictions(cfg: &MoodSimConfig, seed: u64) -> Vec<ScoredPrediction> {
    let z = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::new();
    for s in 0..cfg.n_subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[s as u64]));
        let sid = subject_id(s);
        let (offset_a, offset_v) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
        let (scale_a, scale_v) = (rng.random_range(0.05..0.2), rng.random_range(0.05..0.2));
        let plan = [
            (MoodLabel::Euthymic, cfg.euthymic_calls),
            (MoodLabel::Manic, cfg.manic_calls),
            (MoodLabel::Depressed, cfg.depressed_calls),
        ];
        let mut k = 0;
        for (mood, n_calls) in plan {
            let sign = match mood {
                MoodLabel::Manic => 1.0,
                MoodLabel::Depressed => -1.0,
                _ => 0.0,
            };
            for _ in 0..n_calls {
                let (hamd, ymrs) = sample_scores(mood, &mut rng);
                let call_id = format!("{sid}_c{k:02}");
                k += 1;
                let (ca, cv) = (cfg.call_sd * z.sample(&mut rng), cfg.call_sd * z.sample(&mut rng));
                for j in 0..cfg.segments_per_call {
                    let a = sign * cfg.effect_size + ca + z.sample(&mut rng);
                    let v = sign * cfg.effect_size * cfg.valence_ratio + cv + z.sample(&mut rng);
                    out.push(ScoredPrediction {
                        segment_id: format!("{call_id}_s{j:03}"),
                        call_id: call_id.clone(),
                        subject_id: sid.clone(),
                        activation: offset_a + scale_a * a,
                        valence: offset_v + scale_v * v,
                        hamd,
                        ymrs,
                        mood,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::label_mood;
    use crate::eval::pcc;

    fn small() -> SynthConfig {
        SynthConfig {
            n_subjects: 2,
            segments_per_call: 2,
            segment_s: (3.2, 3.6),
            seed: 9,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn scores_match_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in [MoodLabel::Euthymic, MoodLabel::Manic, MoodLabel::Depressed, MoodLabel::Excluded] {
            for _ in 0..200 {
                let (h, y) = sample_scores(m, &mut rng);
                assert_eq!(label_mood(h as i64, y as i64).unwrap(), m);
            }
        }
    }

    #[test]
    fn corpus_is_consistent_and_replayable() {
        let cfg = small();
        let a = synthesize(&cfg).unwrap();
        let b = synthesize(&cfg).unwrap();
        assert_eq!(a.manifest, b.manifest);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.audio("S01_w01_c0"), b.audio("S01_w01_c0"));
        assert_eq!(a.manifest.calls.len(), 2 * 6 * 2);
        assert_eq!(a.manifest.assessments.len(), 2 * 6);
        for c in a.calls() {
            assert_eq!(c.audio.samples.len(), (c.call.duration_s * 8000.0).round() as usize);
            for s in &c.segments {
                assert!(s.end_s <= c.call.duration_s);
                if let Some(asm) = &c.assessment {
                    assert_eq!(asm.mood, s.mood);
                }
            }
        }
        for s in &a.subjects {
            assert!((110.0..=220.0).contains(&s.base_f0_hz));
            assert_eq!(s.timeline.len(), 6);
        }
        let other = synthesize(&SynthConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(other.truth, a.truth);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (corpus, files) = generate_corpus(&small(), dir.path()).unwrap();
        let m = crate::corpus::load_manifest(&files.manifest).unwrap();
        assert_eq!(m, corpus.manifest);
        assert_eq!(load_truth(&files.truth).unwrap(), corpus.truth);
        let call = &m.calls[0];
        let wav = crate::dsp::read_wav(&dir.path().join(&call.audio_path)).unwrap();
        assert_eq!(wav.samples.len(), corpus.audio(&call.call_id).unwrap().samples.len());
    }

    #[test]
    fn label_coupling_near_target() {
        let cfg = SynthConfig {
            n_subjects: 40,
            segments_per_call: 1,
            calls_per_week: 1,
            euthymic_weeks: 20,
            manic_weeks: 20,
            depressed_weeks: 20,
            segment_s: (0.1, 0.1),
            gap_s: (0.1, 0.1),
            seed: 3,
            ..SynthConfig::default()
        };
        let c = synthesize(&cfg).unwrap();
        let a: Vec<f64> = c.truth.segments.iter().map(|s| s.activation).collect();
        let v: Vec<f64> = c.truth.segments.iter().map(|s| s.valence).collect();
        assert!(a.len() >= 2000);
        let r = pcc(&a, &v).unwrap();
        assert!((r - 0.46).abs() < 0.08, "pcc {r}");
    }

    #[test]
    fn mask_marks_segments() {
        let c = synthesize(&small()).unwrap();
        let call = &c.manifest.calls[0];
        let n = c.audio(&call.call_id).unwrap().samples.len();
        let mask = c.truth.mask(&call.call_id, n);
        let speech = mask.iter().filter(|&&m| m).count() as f64 * 0.01;
        let truth: f64 = c.truth.segments.iter().filter(|s| s.call_id == call.call_id).map(|s| s.end_s - s.start_s).sum();
        assert!((speech - truth).abs() < 0.05, "{speech} vs {truth}");
    }

    #[test]
    fn labels_for_detected_segments() {
        let c = synthesize(&small()).unwrap();
        let t = &c.truth.segments[0];
        let det = vec![
            Segment {
                segment_id: "x".into(),
                call_id: t.call_id.clone(),
                start_s: t.start_s + 0.05,
                end_s: t.end_s - 0.05,
            },
            Segment {
                segment_id: "y".into(),
                call_id: t.call_id.clone(),
                start_s: 0.0,
                end_s: 0.1,
            },
        ];
        let l = c.truth.labels_for(&det, &c.manifest);
        assert_eq!(l.len(), 1);
        assert_eq!((l[0].segment_id.as_str(), l[0].activation), ("x", t.activation));
    }

    #[test]
    fn simulated_predictions_shape() {
        let p = simulate_predictions(&MoodSimConfig::default(), 1);
        assert_eq!(p.len(), 12 * 10 * 10);
        assert_eq!(p, simulate_predictions(&MoodSimConfig::default(), 1));
        assert!(p.iter().all(|r| label_mood(r.hamd as i64, r.ymrs as i64).unwrap() == r.mood));
    }
}
