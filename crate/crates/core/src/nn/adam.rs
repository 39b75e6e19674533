use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update. Rejects non-finite gradients before touching state.
pub fn adam_step(cfg: &AdamConfig, params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "gradient of parameter {i} is {} at step {}",
            grads[i],
            state.t + 1
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_signed_learning_rate() {
        let cfg = AdamConfig::default();
        let mut p = vec![1.0, -2.0, 0.5];
        let g = vec![0.3, -7.0, 1e-3];
        let mut s = AdamState::new(3);
        adam_step(&cfg, &mut p, &g, &mut s).unwrap();
        let expected = [1.0 - 1e-4, -2.0 + 1e-4, 0.5 - 1e-4];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let cfg = AdamConfig::default();
        let mut p = vec![1.0, 2.0];
        let mut s = AdamState::new(2);
        for _ in 0..50 {
            adam_step(&cfg, &mut p, &[0.0, 0.0], &mut s).unwrap();
        }
        assert_eq!(p, vec![1.0, 2.0]);
    }

    #[test]
    fn replay_is_bitwise_deterministic() {
        let cfg = AdamConfig::default();
        let g = vec![0.1, -0.2, 0.3];
        let mut a = (vec![0.0; 3], AdamState::new(3));
        for _ in 0..3 {
            adam_step(&cfg, &mut a.0, &g, &mut a.1).unwrap();
        }
        let mut b = a.clone();
        adam_step(&cfg, &mut a.0, &g, &mut a.1).unwrap();
        adam_step(&cfg, &mut b.0, &g, &mut b.1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.0; 2];
        let mut s = AdamState::new(2);
        let err = adam_step(&cfg, &mut p, &[0.0, f64::NAN], &mut s).unwrap_err();
        assert!(err.to_string().contains("parameter 1"));
        assert_eq!(s.t, 0);
    }
}
