use crate::error::{Error, Result};

fn check(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions against {} targets",
            pred.len(),
            truth.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::Undefined(format!("{} pairs, need at least 2", pred.len())));
    }
    if pred.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric input".into()));
    }
    Ok(())
}

fn constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

/// Means, population variances and population covariance.
fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cxy += (a - mx) * (b - my);
    }
    (mx, my, vx / n, vy / n, cxy / n)
}

/// Pearson correlation. Undefined when either side is constant.
pub fn pcc(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    let (_, _, vx, vy, c) = moments(pred, truth);
    if constant(pred) || constant(truth) {
        return Err(Error::Undefined("pearson correlation of a constant series".into()));
    }
    Ok((c / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

/// Concordance correlation: 2 cov / (var_x + var_y + (mean_x - mean_y)^2).
pub fn ccc(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    let (mx, my, vx, vy, c) = moments(pred, truth);
    let den = vx + vy + (mx - my) * (mx - my);
    if constant(pred) && constant(truth) && pred[0] == truth[0] {
        return Err(Error::Undefined("concordance of two identical constant series".into()));
    }
    Ok((2.0 * c / den).clamp(-1.0, 1.0))
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    let n = pred.len() as f64;
    Ok((pred.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 6.0];
        assert!((pcc(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        // var_x 2/3, var_y 8/3, cov 4/3, mean diff 2
        let expected = 2.0 * (4.0 / 3.0) / (2.0 / 3.0 + 8.0 / 3.0 + 4.0);
        assert!((ccc(&x, &y).unwrap() - expected).abs() < 1e-15);
        assert!((rmse(&x, &y).unwrap() - (14.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ccc_penalizes_offset_pcc_does_not() {
        let x = [0.1, 0.5, -0.3, 0.2];
        let shifted: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        assert!((pcc(&x, &shifted).unwrap() - 1.0).abs() < 1e-12);
        assert!(ccc(&x, &shifted).unwrap() < 0.5);
        assert!((ccc(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn undefined_cases() {
        assert!(matches!(pcc(&[1.0, 1.0], &[0.0, 2.0]), Err(Error::Undefined(_))));
        assert!(matches!(ccc(&[1.0, 1.0], &[1.0, 1.0]), Err(Error::Undefined(_))));
        assert!(ccc(&[1.0, 1.0], &[0.0, 2.0]).unwrap().abs() < 1e-15);
        assert!(matches!(rmse(&[1.0], &[1.0]), Err(Error::Undefined(_))));
        assert!(matches!(rmse(&[1.0, 2.0], &[1.0]), Err(Error::Shape(_))));
    }
}
