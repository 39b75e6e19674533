use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, student_t_two_sided_p, variance};

/// Test-to-train size ratio for two test subjects against eight training ones.
pub const DEFAULT_TEST_TRAIN_RATIO: f64 = 0.25;
pub const DEFAULT_DF: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedTTest {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub t: f64,
    pub p: f64,
    pub df: f64,
    /// Zero variance with a nonzero mean: `t` is infinite and `p` is 0.
    pub degenerate: bool,
}

/// Resampled paired t-test with the variance inflated by `1/n + ratio` to
/// account for overlapping training sets across folds and runs.
pub fn corrected_paired_ttest(diffs: &[f64], ratio: f64, df: f64) -> Result<CorrectedTTest> {
    if diffs.len() < 2 {
        return Err(Error::Config("need at least two paired differences".into()));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("paired difference".into()));
    }
    if !(ratio >= 0.0) || !(df > 0.0) {
        return Err(Error::Config(format!("ratio {ratio} and df {df} must be nonnegative / positive")));
    }
    let n = diffs.len();
    let m = mean(diffs);
    // all-equal inputs have exactly zero spread even if rounding says otherwise
    let var = if diffs.iter().all(|&d| d == diffs[0]) { 0.0 } else { variance(diffs) };
    let (t, p, degenerate) = if var > 0.0 {
        let t = m / ((1.0 / n as f64 + ratio) * var).sqrt();
        (t, student_t_two_sided_p(t, df), false)
    } else if m == 0.0 {
        (0.0, 1.0, false)
    } else {
        (f64::INFINITY.copysign(m), 0.0, true)
    };
    Ok(CorrectedTTest {
        n,
        mean: m,
        variance: var,
        t,
        p,
        df,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antisymmetric_is_null() {
        let d = [0.1, -0.1, 0.3, -0.3, 0.05, -0.05];
        let r = corrected_paired_ttest(&d, 0.25, 6.0).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_zero_is_classical() {
        let d: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64 * 0.01 - 0.02).collect();
        let r = corrected_paired_ttest(&d, 0.0, 6.0).unwrap();
        let n = d.len() as f64;
        let m = d.iter().sum::<f64>() / n;
        let s2 = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((r.t - m / (s2 / n).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_is_flagged() {
        let r = corrected_paired_ttest(&[0.2; 30], 0.25, 6.0).unwrap();
        assert!(r.degenerate);
        assert!(!r.t.is_nan() && !r.p.is_nan());
        assert_eq!(r.p, 0.0);
        let z = corrected_paired_ttest(&[0.0; 30], 0.25, 6.0).unwrap();
        assert!(!z.degenerate);
        assert_eq!((z.t, z.p), (0.0, 1.0));
    }
}
