//! Speech activity detection on synthetic calls, scored against the
//! generator's own speech mask.

use moodcall::sad::{form_segments, sad, SadConfig, SegmentMode};
use moodcall::synth::{synthesize, SynthConfig};

fn main() -> moodcall::Result<()> {
    let corpus = synthesize(&SynthConfig {
        n_subjects: 2,
        seed: 3,
        ..SynthConfig::default()
    })?;
    let cfg = SadConfig::default();
    println!("{:<14} {:>7} {:>9} {:>9}", "call", "frames", "accuracy", "segments");
    for c in corpus.calls().take(8) {
        let mask = sad(&c.audio, &cfg)?;
        let truth = corpus.truth.mask(&c.call.call_id, c.audio.samples.len());
        let agree = mask.frames.iter().zip(&truth).filter(|(a, b)| a == b).count();
        let segs = form_segments(&mask, &c.call.call_id, &cfg, SegmentMode::Eligible);
        println!(
            "{:<14} {:>7} {:>9.3} {:>9}",
            c.call.call_id,
            mask.len(),
            agree as f64 / truth.len() as f64,
            segs.len()
        );
        for s in segs.iter().take(2) {
            println!("    {} {:.2}-{:.2} s", s.segment_id, s.start_s, s.end_s);
        }
    }
    Ok(())
}
