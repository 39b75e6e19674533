use crate::error::{Error, Result};

pub fn mel(f_hz: f64) -> f64 {
    2595.0 * (1.0 + f_hz / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters with unit height, peaks equally spaced on the mel axis.
///
/// Weights are evaluated at the FFT bin frequencies `k * sample_rate / n_fft`
/// for `k` in `0..=n_fft/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    n_filters: usize,
    n_bins: usize,
    /// Row-major `n_filters x n_bins`.
    weights: Vec<f64>,
    centers_hz: Vec<f64>,
    edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_filters: usize, n_fft: usize, sample_rate: f64, f_lo: f64, f_hi: f64) -> Result<Self> {
        if n_filters == 0 || n_fft < 2 {
            return Err(Error::Config("filterbank needs at least one filter and n_fft >= 2".into()));
        }
        if !(0.0 <= f_lo && f_lo < f_hi && f_hi <= sample_rate / 2.0) {
            return Err(Error::Config(format!(
                "filterbank band [{f_lo}, {f_hi}] must satisfy 0 <= lo < hi <= {}",
                sample_rate / 2.0
            )));
        }
        let n_bins = n_fft / 2 + 1;
        let bin_hz = sample_rate / n_fft as f64;
        let (m_lo, m_hi) = (mel(f_lo), mel(f_hi));
        let step = (m_hi - m_lo) / (n_filters + 1) as f64;
        let edges_hz: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(m_lo + step * i as f64))
            .collect();

        let mut weights = vec![0.0; n_filters * n_bins];
        for j in 0..n_filters {
            let (lo, c, hi) = (edges_hz[j], edges_hz[j + 1], edges_hz[j + 2]);
            let row = &mut weights[j * n_bins..(j + 1) * n_bins];
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                *w = if f > lo && f <= c {
                    (f - lo) / (c - lo)
                } else if f > c && f < hi {
                    (hi - f) / (hi - c)
                } else {
                    0.0
                };
            }
            if row.iter().all(|&w| w <= 0.0) {
                return Err(Error::Config(format!(
                    "filter {j} ({lo:.1}-{hi:.1} Hz) covers no FFT bin; too many filters for n_fft={n_fft}"
                )));
            }
        }
        Ok(MelFilterbank {
            n_filters,
            n_bins,
            weights,
            centers_hz: edges_hz[1..=n_filters].to_vec(),
            edges_hz,
        })
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.n_bins..(j + 1) * self.n_bins]
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn edges_hz(&self) -> &[f64] {
        &self.edges_hz
    }

    /// Applies the filterbank to one spectrum of `n_bins` values.
    pub fn apply(&self, spectrum: &[f64], out: &mut [f64]) {
        debug_assert_eq!(spectrum.len(), self.n_bins);
        for (j, o) in out.iter_mut().enumerate().take(self.n_filters) {
            *o = self.row(j).iter().zip(spectrum).map(|(w, s)| w * s).sum();
        }
    }
}
