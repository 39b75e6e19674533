//! Per-frame low-level descriptors shared by speech activity detection and
//! the functionals extractor.

use super::{default_frame_count, frame_slice, AudioBuffer, FrameAnalyzer, N_FFT, N_MELS, PIPELINE_SAMPLE_RATE};
use crate::error::Result;

/// Pitch search range in samples at 8 kHz: 300 Hz down to 60 Hz.
pub const MIN_PITCH_LAG: usize = 27;
pub const MAX_PITCH_LAG: usize = 133;

/// Frames with voicing strength at or above this are voiced.
pub const VOICING_THRESHOLD: f64 = 0.6;
/// Frames with mean-square energy at or below this are never voiced.
pub const ENERGY_FLOOR: f64 = 1e-8;

pub const N_CEPSTRA: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameDescriptors {
    /// Natural log of the frame's mean-square amplitude (floored at 1e-10).
    pub log_energy: f64,
    /// Peak normalized autocorrelation over the pitch lag range, in [-1, 1].
    pub voicing: f64,
    /// F0 estimate in Hz; 0 when the frame has no periodic structure.
    pub f0_hz: f64,
    pub centroid_hz: f64,
    pub flux: f64,
    /// Regression slope of the dB magnitude spectrum, dB per kHz.
    pub slope_db_per_khz: f64,
    /// Geometric over arithmetic mean of the power spectrum, in (0, 1].
    pub flatness: f64,
    /// DCT-II coefficients 1..=4 of the log filterbank energies.
    pub cepstra: [f64; N_CEPSTRA],
    /// Magnitude energy ratio 50-1000 Hz over 1-4 kHz, in dB.
    pub alpha_ratio_db: f64,
    /// Peak magnitude 0-2 kHz over peak 2-4 kHz, in dB.
    pub hammarberg_db: f64,
    pub mean_square: f64,
}

impl FrameDescriptors {
    pub fn voiced(&self) -> bool {
        self.voicing >= VOICING_THRESHOLD && self.mean_square > ENERGY_FLOOR
    }
}

/// Normalized autocorrelation at each lag in `MIN_PITCH_LAG..=MAX_PITCH_LAG`.
pub fn pitch_autocorrelation(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    (MIN_PITCH_LAG..=MAX_PITCH_LAG)
        .map(|lag| {
            if lag >= n {
                return 0.0;
            }
            let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
            for i in 0..n - lag {
                let (a, b) = (frame[i], frame[i + lag]);
                xy += a * b;
                xx += a * a;
                yy += b * b;
            }
            let den = (xx * yy).sqrt();
            if den > 1e-20 {
                xy / den
            } else {
                0.0
            }
        })
        .collect()
}

/// Returns (voicing strength, F0 in Hz).
///
/// F0 comes from the shortest lag whose local peak reaches 90% of the global
/// maximum, refined by parabolic interpolation; this avoids octave errors where
/// a multiple of the period correlates equally well.
pub fn estimate_pitch(frame: &[f64]) -> (f64, f64) {
    let r = pitch_autocorrelation(frame);
    let (best_i, &best) = r
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("lag range is nonempty");
    if best <= 0.0 {
        return (best.max(-1.0), 0.0);
    }
    let mut pick = best_i;
    for i in 0..r.len() {
        let left = if i > 0 { r[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < r.len() { r[i + 1] } else { f64::NEG_INFINITY };
        if r[i] >= 0.9 * best && r[i] >= left && r[i] >= right {
            pick = i;
            break;
        }
    }
    let mut lag = (pick + MIN_PITCH_LAG) as f64;
    if pick > 0 && pick + 1 < r.len() {
        let (a, b, c) = (r[pick - 1], r[pick], r[pick + 1]);
        let den = a - 2.0 * b + c;
        if den.abs() > 1e-12 {
            lag += (0.5 * (a - c) / den).clamp(-0.5, 0.5);
        }
    }
    (best, PIPELINE_SAMPLE_RATE as f64 / lag)
}

fn dct_cepstra(log_mel: &[f64]) -> [f64; N_CEPSTRA] {
    let m = log_mel.len() as f64;
    let mut out = [0.0; N_CEPSTRA];
    for (k, o) in out.iter_mut().enumerate() {
        let n = (k + 1) as f64;
        *o = log_mel
            .iter()
            .enumerate()
            .map(|(j, &v)| v * (std::f64::consts::PI * n * (j as f64 + 0.5) / m).cos())
            .sum();
    }
    out
}

fn db(x: f64) -> f64 {
    20.0 * x.max(1e-10).log10()
}

/// Computes descriptors for every frame on the 25 ms / 10 ms grid.
pub fn analyze_frames(audio: &AudioBuffer) -> Result<Vec<FrameDescriptors>> {
    audio.require_pipeline_rate()?;
    let analyzer = FrameAnalyzer::shared();
    let bin_hz = PIPELINE_SAMPLE_RATE as f64 / N_FFT as f64;
    let n_bins = N_FFT / 2 + 1;
    let t = default_frame_count(audio.samples.len());

    // slope regression abscissa (kHz) for bins 1..n_bins-1
    let fk: Vec<f64> = (1..n_bins - 1).map(|k| k as f64 * bin_hz / 1000.0).collect();
    let fk_mean = fk.iter().sum::<f64>() / fk.len() as f64;
    let fk_ss: f64 = fk.iter().map(|f| (f - fk_mean).powi(2)).sum();

    let mut out = Vec::with_capacity(t);
    let mut prev_norm: Option<Vec<f64>> = None;
    let mut mel = [0.0; N_MELS];
    for i in 0..t {
        let raw = frame_slice(&audio.samples, i);
        let mean = raw.iter().map(|&x| x as f64).sum::<f64>() / raw.len() as f64;
        let centered: Vec<f64> = raw.iter().map(|&x| x as f64 - mean).collect();
        let mean_square = raw.iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / raw.len() as f64;
        let (voicing, f0_hz) = estimate_pitch(&centered);

        let mag = analyzer.magnitude_spectrum(raw);
        analyzer.log_mel(&mag, &mut mel);
        let mag_sum: f64 = mag.iter().sum();
        let centroid_hz = if mag_sum > 1e-12 {
            mag.iter().enumerate().map(|(k, m)| k as f64 * bin_hz * m).sum::<f64>() / mag_sum
        } else {
            0.0
        };
        let l2 = mag.iter().map(|m| m * m).sum::<f64>().sqrt();
        let normed: Vec<f64> = if l2 > 1e-12 {
            mag.iter().map(|m| m / l2).collect()
        } else {
            vec![0.0; mag.len()]
        };
        let flux = prev_norm
            .as_ref()
            .map(|p| p.iter().zip(&normed).map(|(a, b)| (a - b).powi(2)).sum())
            .unwrap_or(0.0);
        prev_norm = Some(normed);

        let dbs: Vec<f64> = mag[1..n_bins - 1].iter().map(|&m| db(m)).collect();
        let db_mean = dbs.iter().sum::<f64>() / dbs.len() as f64;
        let slope_db_per_khz =
            fk.iter().zip(&dbs).map(|(f, d)| (f - fk_mean) * (d - db_mean)).sum::<f64>() / fk_ss;

        let power: Vec<f64> = mag.iter().map(|m| m * m + 1e-12).collect();
        let log_mean = power.iter().map(|p| p.ln()).sum::<f64>() / power.len() as f64;
        let arith = power.iter().sum::<f64>() / power.len() as f64;
        let flatness = log_mean.exp() / arith;

        let band = |lo: f64, hi: f64| {
            mag.iter()
                .enumerate()
                .filter(move |(k, _)| {
                    let f = *k as f64 * bin_hz;
                    f >= lo && f < hi
                })
                .map(|(_, &m)| m)
        };
        let alpha_ratio_db = db(band(50.0, 1000.0).sum::<f64>()) - db(band(1000.0, 4000.1).sum::<f64>());
        let hammarberg_db =
            db(band(0.0, 2000.0).fold(0.0, f64::max)) - db(band(2000.0, 4000.1).fold(0.0, f64::max));

        out.push(FrameDescriptors {
            log_energy: mean_square.max(super::LOG_FLOOR).ln(),
            voicing,
            f0_hz,
            centroid_hz,
            flux,
            slope_db_per_khz,
            flatness,
            cepstra: dct_cepstra(&mel),
            alpha_ratio_db,
            hammarberg_db,
            mean_square,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / 8000.0).sin()).collect()
    }

    /// Brute-force oracle: scan integer lags for the best raw correlation.
    fn brute_f0(frame: &[f64]) -> f64 {
        let r = pitch_autocorrelation(frame);
        let i = r.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        8000.0 / (i + MIN_PITCH_LAG) as f64
    }

    #[test]
    fn pitch_of_pure_tones() {
        for f in [80.0, 110.0, 150.0, 200.0, 250.0] {
            let (v, f0) = estimate_pitch(&sine(f, 200));
            assert!(v > 0.95, "voicing {v} at {f}");
            assert!((f0 - f).abs() < 3.0, "f0 {f0} vs {f}");
        }
        // agrees with the unrefined integer-lag estimate where no multiple fits
        let frame = sine(230.0, 200);
        assert!((estimate_pitch(&frame).1 - brute_f0(&frame)).abs() < 8.0);
    }

    #[test]
    fn silent_frame_has_no_pitch() {
        let (v, f0) = estimate_pitch(&[0.0; 200]);
        assert_eq!(v, 0.0);
        assert_eq!(f0, 0.0);
    }

    #[test]
    fn white_noise_is_weakly_voiced() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let frame: Vec<f64> = (0..200).map(|_| rng.random::<f64>() - 0.5).collect();
        let (v, _) = estimate_pitch(&frame);
        assert!(v < VOICING_THRESHOLD, "{v}");
    }

    #[test]
    fn descriptors_on_tone() {
        let s: Vec<f32> = sine(200.0, 4000).iter().map(|&x| (0.5 * x) as f32).collect();
        let d = analyze_frames(&AudioBuffer::new(s, 8000).unwrap()).unwrap();
        assert_eq!(d.len(), default_frame_count(4000));
        for f in &d {
            assert!(f.voiced());
            assert!((f.centroid_hz - 200.0).abs() < 150.0);
            assert!(f.flatness < 0.1);
            assert!(f.alpha_ratio_db > 0.0);
        }
    }
}
