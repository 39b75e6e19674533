//! Emotion recognition on telephone speech and mood-state analysis.
//!
//! The pipeline runs from call recordings to mood findings: speech activity
//! detection ([`sad`]), segment selection for annotation ([`sampling`]),
//! rating collection ([`annotation`]), acoustic features ([`dsp`]), neural
//! regressors ([`nn`]) evaluated by subject-independent cross-validation
//! ([`eval`]), and the statistics relating predicted emotion to clinical
//! mood ratings ([`mood`]). [`synth`] generates corpora for end-to-end runs.

pub mod annotation;
pub mod corpus;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod mood;
pub mod nn;
pub mod pipeline;
pub mod sad;
pub mod sampling;
pub mod stats;
pub mod synth;

pub use error::{read_json, write_json, write_string, Error, Result};
