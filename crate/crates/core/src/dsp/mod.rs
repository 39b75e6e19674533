//! Audio front end: WAV ingestion, 25 ms / 10 ms framing, magnitude spectra,
//! 40-dimensional log mel-filterbank sequences and utterance-level functionals.

use std::sync::{Arc, LazyLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod cache;
pub mod frames;
pub mod functionals;
pub mod mel;
pub mod norm;
pub mod wav;

pub use cache::{load_feature_set, save_feature_set, FeatureItem, FeatureKind, FeatureSet};
pub use frames::{analyze_frames, FrameDescriptors};
pub use functionals::{functional_names, functionals, FunctionalsVector, N_FUNCTIONALS};
pub use mel::{mel, mel_to_hz, MelFilterbank};
pub use norm::{zscore_apply, zscore_apply_rows, zscore_fit, zscore_fit_rows, NormStats};
pub use wav::{decode_wav_bytes, encode_wav, read_wav, write_wav};

pub const PIPELINE_SAMPLE_RATE: u32 = 8000;
/// 25 ms at 8 kHz.
pub const FRAME_LEN: usize = 200;
/// 10 ms at 8 kHz.
pub const FRAME_SHIFT: usize = 80;
pub const N_FFT: usize = 256;
pub const N_MELS: usize = 40;
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self> {
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {i}")));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate_hz,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn require_pipeline_rate(&self) -> Result<()> {
        if self.sample_rate_hz != PIPELINE_SAMPLE_RATE {
            return Err(Error::Format {
                field: "sample_rate",
                found: self.sample_rate_hz.to_string(),
                expected: PIPELINE_SAMPLE_RATE.to_string(),
            });
        }
        Ok(())
    }

    /// Copies out `[start_s, end_s)`, clamped to the buffer.
    pub fn slice_seconds(&self, start_s: f64, end_s: f64) -> AudioBuffer {
        let sr = self.sample_rate_hz as f64;
        let a = ((start_s * sr).round().max(0.0) as usize).min(self.samples.len());
        let b = ((end_s * sr).round().max(0.0) as usize).clamp(a, self.samples.len());
        AudioBuffer {
            samples: self.samples[a..b].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

pub fn frame_count(n_samples: usize, frame_len: usize, shift: usize) -> usize {
    assert!(frame_len >= 1 && shift >= 1, "frame length and shift must be positive");
    if n_samples < frame_len {
        0
    } else {
        (n_samples - frame_len) / shift + 1
    }
}

/// Frame count on the default 200/80-sample grid.
pub fn default_frame_count(n_samples: usize) -> usize {
    frame_count(n_samples, FRAME_LEN, FRAME_SHIFT)
}

/// Start time in seconds of frame `i` on the default grid.
pub fn frame_time(i: usize) -> f64 {
    (i * FRAME_SHIFT) as f64 / PIPELINE_SAMPLE_RATE as f64
}

pub(crate) fn frame_slice(samples: &[f32], i: usize) -> &[f32] {
    &samples[i * FRAME_SHIFT..i * FRAME_SHIFT + FRAME_LEN]
}

/// FFT plan, analysis window and filterbank for the default front end.
/// Built once; shared read-only.
pub struct FrameAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    filterbank: MelFilterbank,
}

static SHARED: LazyLock<FrameAnalyzer> = LazyLock::new(FrameAnalyzer::new);

impl FrameAnalyzer {
    fn new() -> Self {
        let fft = FftPlanner::new().plan_fft_forward(N_FFT);
        let window = (0..FRAME_LEN)
            .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (FRAME_LEN - 1) as f64).cos())
            .collect();
        let filterbank = MelFilterbank::new(N_MELS, N_FFT, PIPELINE_SAMPLE_RATE as f64, 0.0, 4000.0)
            .expect("default filterbank is valid");
        FrameAnalyzer {
            fft,
            window,
            filterbank,
        }
    }

    pub fn shared() -> &'static FrameAnalyzer {
        &SHARED
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Hamming-windowed, zero-padded 256-point magnitude spectrum (129 bins).
    pub fn magnitude_spectrum(&self, frame: &[f32]) -> Vec<f64> {
        let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
        for (b, (&x, &w)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
            b.re = x as f64 * w;
        }
        self.fft.process(&mut buf);
        buf[..N_FFT / 2 + 1].iter().map(|c| c.norm()).collect()
    }

    /// Log filterbank energies of one magnitude spectrum, floored at [`LOG_FLOOR`].
    pub fn log_mel(&self, spectrum: &[f64], out: &mut [f64]) {
        self.filterbank.apply(spectrum, out);
        for v in out.iter_mut() {
            *v = v.max(LOG_FLOOR).ln();
        }
    }
}

/// A `T x 40` log-MFB matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMfbSequence {
    pub frames: Vec<f64>,
    pub n_frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_stats: Option<NormStats>,
}

impl LogMfbSequence {
    pub const DIM: usize = N_MELS;

    pub fn from_rows(frames: Vec<f64>) -> Result<Self> {
        if frames.len() % N_MELS != 0 {
            return Err(Error::Shape(format!(
                "{} values is not a multiple of {N_MELS}",
                frames.len()
            )));
        }
        Ok(LogMfbSequence {
            n_frames: frames.len() / N_MELS,
            frames,
            norm_stats: None,
        })
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.frames[t * N_MELS..(t + 1) * N_MELS]
    }

    pub fn is_empty(&self) -> bool {
        self.n_frames == 0
    }
}

pub fn log_mfb(audio: &AudioBuffer) -> Result<LogMfbSequence> {
    audio.require_pipeline_rate()?;
    let analyzer = FrameAnalyzer::shared();
    let t = default_frame_count(audio.samples.len());
    let mut frames = vec![0.0; t * N_MELS];
    for (i, row) in frames.chunks_mut(N_MELS).enumerate() {
        let spec = analyzer.magnitude_spectrum(frame_slice(&audio.samples, i));
        analyzer.log_mel(&spec, row);
    }
    Ok(LogMfbSequence {
        frames,
        n_frames: t,
        norm_stats: None,
    })
}

/// Row-major 2-D view helper used by normalization and caching.
pub(crate) fn rows(data: &[f64], dim: usize) -> impl Iterator<Item = &[f64]> {
    data.chunks_exact(dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, seconds: f64, amp: f64) -> AudioBuffer {
        let n = (seconds * 8000.0) as usize;
        let s = (0..n)
            .map(|i| (amp * (2.0 * PI * freq * i as f64 / 8000.0).sin()) as f32)
            .collect();
        AudioBuffer::new(s, 8000).unwrap()
    }

    #[test]
    fn frame_count_formula() {
        assert_eq!(frame_count(200, 200, 80), 1);
        assert_eq!(frame_count(199, 200, 80), 0);
        assert_eq!(frame_count(8000, 200, 80), 98);
        assert_eq!(frame_count(0, 200, 80), 0);
        assert_eq!(frame_count(280, 200, 80), 2);
    }

    #[test]
    fn silence_hits_floor() {
        let seq = log_mfb(&AudioBuffer::new(vec![0.0; 8000], 8000).unwrap()).unwrap();
        assert_eq!(seq.n_frames, 98);
        assert_eq!(seq.frames.len(), 98 * 40);
        let floor = LOG_FLOOR.ln();
        assert!(seq.frames.iter().all(|&v| v == floor));
    }

    #[test]
    fn empty_audio_gives_empty_sequence() {
        let seq = log_mfb(&AudioBuffer::new(vec![], 8000).unwrap()).unwrap();
        assert!(seq.is_empty());
        let seq = log_mfb(&AudioBuffer::new(vec![0.1; 150], 8000).unwrap()).unwrap();
        assert!(seq.is_empty());
    }

    #[test]
    fn wrong_rate_rejected() {
        let a = AudioBuffer::new(vec![0.0; 16000], 16000).unwrap();
        assert!(matches!(log_mfb(&a), Err(Error::Format { .. })));
    }

    #[test]
    fn non_finite_samples_rejected() {
        assert!(AudioBuffer::new(vec![0.0, f32::NAN], 8000).is_err());
    }

    /// Brute force: response of every filter to the tone spectrum, computed
    /// independently of `log_mfb`, then compared against the nearest center.
    #[test]
    fn one_khz_tone_peaks_at_nearest_filter() {
        let seq = log_mfb(&tone(1000.0, 0.5, 0.5)).unwrap();
        let fb = FrameAnalyzer::shared().filterbank();
        let nearest = fb
            .centers_hz()
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1000.0).abs().total_cmp(&(b.1 - 1000.0).abs()))
            .unwrap()
            .0;
        for t in 0..seq.n_frames {
            let row = seq.row(t);
            let argmax = (0..40).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(argmax, nearest, "frame {t}");
        }
    }

    #[test]
    fn slice_seconds_clamps() {
        let a = AudioBuffer::new(vec![0.5; 8000], 8000).unwrap();
        assert_eq!(a.slice_seconds(0.25, 0.5).samples.len(), 2000);
        assert_eq!(a.slice_seconds(0.9, 5.0).samples.len(), 800);
        assert_eq!(a.slice_seconds(3.0, 5.0).samples.len(), 0);
    }
}
