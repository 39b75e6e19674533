//! Generates a small synthetic corpus on disk and summarizes it.
//!
//! `cargo run --example synth_corpus -- [OUT_DIR] [SEED]`

use std::collections::BTreeMap;
use std::path::PathBuf;

use moodcall::synth::{generate_corpus, SynthConfig};

fn main() -> moodcall::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("moodcall_synth"));
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = SynthConfig {
        n_subjects: 4,
        seed,
        ..SynthConfig::default()
    };
    let (corpus, files) = generate_corpus(&cfg, &out)?;

    let mut by_mood: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &corpus.truth.segments {
        *by_mood.entry(s.mood.as_str()).or_default() += 1;
    }
    println!("manifest: {}", files.manifest.display());
    println!("audio:    {}", files.audio_dir.display());
    println!(
        "{} subjects, {} calls, {} assessments, {} segments",
        corpus.manifest.subjects.len(),
        corpus.manifest.calls.len(),
        corpus.manifest.assessments.len(),
        corpus.truth.segments.len()
    );
    for (mood, n) in by_mood {
        println!("  {mood:<10} {n}");
    }
    Ok(())
}
