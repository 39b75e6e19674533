use rand::Rng;

/// Glorot/Xavier uniform: i.i.d. U[-L, L] with L = sqrt(6 / (fan_in + fan_out)).
pub fn xavier_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, count: usize, rng: &mut R) -> Vec<f64> {
    assert!(fan_in >= 1 && fan_out >= 1, "fans must be positive");
    let limit = xavier_limit(fan_in, fan_out);
    (0..count).map(|_| rng.random_range(-limit..=limit)).collect()
}

pub fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bound_for_three_by_three() {
        assert_eq!(xavier_limit(3, 3), 1.0);
        let w = xavier_uniform(3, 3, 9, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(w.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn moments_match_uniform() {
        let (fi, fo) = (40, 200);
        let l = xavier_limit(fi, fo);
        let w = xavier_uniform(fi, fo, 100_000, &mut ChaCha8Rng::seed_from_u64(11));
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
        assert!(mean.abs() < 0.01 * l, "{mean}");
        assert!((var / (l * l / 3.0) - 1.0).abs() < 0.05, "{var}");
        assert!(w.iter().all(|v| v.abs() <= l));
    }
}
