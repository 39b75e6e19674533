//! Log mel filterbank sequences and utterance functionals for a few segments.

use moodcall::dsp::{functionals, log_mfb};
use moodcall::synth::{synthesize, SynthConfig};

fn main() -> moodcall::Result<()> {
    let corpus = synthesize(&SynthConfig {
        n_subjects: 1,
        seed: 8,
        ..SynthConfig::default()
    })?;
    for t in corpus.truth.segments.iter().take(4) {
        let audio = corpus.audio(&t.call_id).expect("call audio").slice_seconds(t.start_s, t.end_s);
        let mfb = log_mfb(&audio)?;
        let f = functionals(&audio)?;
        println!(
            "{} ({}, activation {:+.2}, valence {:+.2}): {} frames x {} bands",
            t.segment_id,
            t.mood.as_str(),
            t.activation,
            t.valence,
            mfb.n_frames,
            mfb.frames.len() / mfb.n_frames.max(1)
        );
        for name in ["log_energy_mean", "f0_hz_p50", "centroid_hz_mean", "voiced_fraction", "alpha_ratio_db_mean"] {
            println!("    {name:<22} {:>10.3}", f.get(name).unwrap_or(f64::NAN));
        }
    }
    Ok(())
}
