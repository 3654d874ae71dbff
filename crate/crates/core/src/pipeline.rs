//! Evaluation of every (symptom, phoneme) pair of a corpus.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{compute_features, load_segmentation, AudioStore, FeatureSet, ParseMode, DEFAULT_MIN_INSTANCES};
use crate::error::Result;
use crate::eval::{evaluate_pair, pairs_csv_string, write_means_csv, PairResult, SpeakerMean};
use crate::features::FeatureConfig;
use crate::model::RfConfig;
use crate::par;
use crate::phonetics::classify_phoneme;
use crate::rng::fnv1a64;
use crate::scales::RatingTable;

/// Settings that determine evaluation results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub sample_rate: u32,
    pub features: FeatureConfig,
    pub rf: RfConfig,
    pub min_instances: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            sample_rate: crate::signal::DEFAULT_RATE,
            features: FeatureConfig::default(),
            rf: RfConfig::default(),
            min_instances: DEFAULT_MIN_INSTANCES,
        }
    }
}

/// Results of all pairs plus the identifier derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub run_id: String,
    pub pairs: Vec<PairResult>,
    pub speaker_means: Vec<SpeakerMean>,
}

impl EvalRun {
    pub fn new(pairs: Vec<PairResult>, speaker_means: Vec<SpeakerMean>) -> Self {
        let run_id = run_id_of(&pairs, &speaker_means);
        Self {
            run_id,
            pairs,
            speaker_means,
        }
    }
}

/// Content hash of the exported pair and speaker-mean tables.
pub fn run_id_of(pairs: &[PairResult], means: &[SpeakerMean]) -> String {
    let mut text = pairs_csv_string(pairs).into_bytes();
    write_means_csv(&mut text, means).expect("in-memory write");
    format!("{:016x}", fnv1a64(&text))
}

/// Loads the segmentation and computes features for the given phonemes.
pub fn load_features(
    segmentation: &Path,
    audio_dir: &Path,
    config: &EvalConfig,
    phonemes: &[&str],
) -> Result<FeatureSet> {
    let seg = load_segmentation(segmentation, ParseMode::Lenient)?;
    for (reason, n) in &seg.skipped {
        log::warn!("skipped {n} segmentation rows: {}", reason.name());
    }
    let labels: Vec<&str> = phonemes
        .iter()
        .map(|p| classify_phoneme(p).map(|c| c.label))
        .collect::<Result<_>>()?;
    let store = AudioStore::new(audio_dir, config.sample_rate);
    compute_features(&seg.records, &store, &config.features, |l| labels.contains(&l))
}

/// Evaluates every symptom × phoneme pair, in that nesting order. Pairs run
/// in parallel; the output order does not depend on scheduling.
pub fn evaluate_all(
    features: &FeatureSet,
    ratings: &RatingTable,
    symptoms: &[&str],
    phonemes: &[&str],
    config: &EvalConfig,
) -> Result<EvalRun> {
    let jobs: Vec<(&str, &str)> = symptoms
        .iter()
        .flat_map(|&s| phonemes.iter().map(move |&p| (s, p)))
        .collect();
    let outcomes = par::map(&jobs, |&(s, p)| {
        let e = evaluate_pair(s, p, features, ratings, &config.rf, config.min_instances);
        if let Ok(e) = &e {
            log::debug!("{s}/{p}: {}", e.result.status);
        }
        e
    });
    let mut pairs = Vec::with_capacity(jobs.len());
    let mut means = Vec::new();
    for o in outcomes {
        let o = o?;
        pairs.push(o.result);
        means.extend(o.speaker_means);
    }
    Ok(EvalRun::new(pairs, means))
}
