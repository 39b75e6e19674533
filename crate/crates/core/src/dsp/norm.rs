use serde::{Deserialize, Serialize};

use super::{rows, LogMfbSequence, N_MELS};
use crate::error::{Error, Result};

/// Per-dimension mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Number of rows pooled into the statistics.
    pub n_rows: usize,
}

impl NormStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *x = (*x - m) / s;
        }
    }
}

/// Pools every row of every matrix (each `dim` wide) into per-dimension statistics.
pub fn zscore_fit_rows<'a, I>(matrices: I, dim: usize) -> Result<NormStats>
where
    I: IntoIterator<Item = &'a [f64]> + Clone,
{
    let mut n = 0usize;
    let mut sum = vec![0.0; dim];
    for m in matrices.clone() {
        for r in rows(m, dim) {
            n += 1;
            for (s, x) in sum.iter_mut().zip(r) {
                *s += x;
            }
        }
    }
    if n == 0 {
        return Err(Error::Config("normalization fit set is empty".into()));
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let mut sq = vec![0.0; dim];
    for m in matrices {
        for r in rows(m, dim) {
            for ((q, x), mu) in sq.iter_mut().zip(r).zip(&mean) {
                *q += (x - mu) * (x - mu);
            }
        }
    }
    let std: Vec<f64> = sq.iter().map(|q| (q / n as f64).sqrt()).collect();
    if let Some(dim) = std.iter().position(|&s| !(s > 1e-12)) {
        return Err(Error::DegenerateFeature { dim });
    }
    Ok(NormStats { mean, std, n_rows: n })
}

pub fn zscore_apply_rows(data: &mut [f64], stats: &NormStats) {
    for row in data.chunks_exact_mut(stats.dim()) {
        stats.apply_row(row);
    }
}

pub fn zscore_fit(sequences: &[LogMfbSequence]) -> Result<NormStats> {
    zscore_fit_rows(sequences.iter().map(|s| s.frames.as_slice()), N_MELS)
}

pub fn zscore_apply(seq: &LogMfbSequence, stats: &NormStats) -> Result<LogMfbSequence> {
    if stats.dim() != N_MELS {
        return Err(Error::Shape(format!("norm stats have {} dims, expected {N_MELS}", stats.dim())));
    }
    let mut out = seq.clone();
    zscore_apply_rows(&mut out.frames, stats);
    out.norm_stats = Some(stats.clone());
    Ok(out)
}
