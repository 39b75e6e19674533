//! Mood-state statistics on simulated ensemble predictions: euthymic
//! normalization, manic/depressed contrasts, correlation with clinical scores,
//! subject ANOVA and within-call variability.

use moodcall::mood::{analyze, CorrelationLevel};
use moodcall::synth::{simulate_predictions, MoodSimConfig};

fn main() {
    let effect: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let cfg = MoodSimConfig {
        n_subjects: 6,
        effect_size: effect,
        call_sd: 0.2,
        ..MoodSimConfig::default()
    };
    let rows = simulate_predictions(&cfg, 11);
    print!("{}", analyze(&rows, CorrelationLevel::Segment).tables());
}
