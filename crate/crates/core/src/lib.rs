//! Phoneme-level acoustic analysis for psychiatric symptom grading.
//!
//! Segments of conversational speech are reduced to AR log-power spectra,
//! a random forest predicts a clinician's rating from each segment, and
//! leave-one-speaker-out correlations decide which phonemes carry
//! information about which symptom.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod fmt;
pub mod model;
pub mod par;
pub mod phonetics;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod scales;
pub mod select;
pub mod signal;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
