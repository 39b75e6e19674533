//! Chooses segments for annotation: capped uniform draws from assessment
//! calls plus proximity-weighted draws from personal calls.

use std::collections::BTreeMap;

use moodcall::sampling::{select_segments, SamplingPlan, SegmentSource};
use moodcall::synth::{synthesize, SynthConfig};

fn main() -> moodcall::Result<()> {
    let corpus = synthesize(&SynthConfig {
        n_subjects: 3,
        calls_per_week: 4,
        segment_s: (3.2, 3.6),
        seed: 5,
        ..SynthConfig::default()
    })?;
    let plan = SamplingPlan {
        assessment_cap: 3,
        personal_count: 40,
        ..SamplingPlan::new(17)
    };
    let sel = select_segments(&corpus.manifest, &corpus.manifest.segments, &plan)?;

    let mut weights: BTreeMap<u32, usize> = BTreeMap::new();
    let mut n_assessment = 0;
    for s in &sel.segments {
        match s.source {
            SegmentSource::Assessment => n_assessment += 1,
            SegmentSource::Personal => *weights.entry(s.weight).or_default() += 1,
        }
    }
    println!(
        "pool {} segments; selected {} ({} from assessment calls)",
        corpus.manifest.segments.len(),
        sel.segments.len(),
        n_assessment
    );
    println!("personal draws by weight (weight = max(4 - days to next assessment, 1)):");
    for (w, n) in weights {
        println!("  weight {w}: {n}");
    }
    Ok(())
}
