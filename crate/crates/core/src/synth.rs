//! Synthetic corpora with planted phoneme–symptom relationships.
//!
//! Every phoneme instance is excitation (noise, or a pulse train for voiced
//! sounds) passed through a cascade of two-pole resonators. The resonance
//! centres come from a per-phoneme template; for planted (symptom, phoneme)
//! pairs they move by `strength × (rating − midpoint) × shift_hz_per_step`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{segmentation_to_tsv, SegmentRecord};
use crate::error::{Error, Result};
use crate::features::min_samples;
use crate::features::DEFAULT_ORDER;
use crate::par;
use crate::phonetics::{classify_phoneme, default_analysis_set, Kind, Voicing};
use crate::rng::{fnv1a64, SplitMix64};
use crate::scales::{load_scale_registry, RatingTable, ScaleRegistry};
use crate::signal::{write_wav_i16, AudioBuffer, DEFAULT_RATE};

pub const MANIFEST_SCHEMA: &str = "phonograde-synth/1";
pub const DEFAULT_SHIFT_HZ_PER_STEP: f64 = 40.0;

const RESONANCES: usize = 3;
const TEMPLATE_BASE_HZ: [f64; RESONANCES] = [600.0, 1700.0, 2900.0];
const TEMPLATE_SPREAD_HZ: f64 = 350.0;
const BANDWIDTH_HZ: f64 = 90.0;
const INSTANCE_JITTER_HZ: f64 = 8.0;
const GAP_MS: usize = 20;
const MIN_SEGMENT_MS: usize = 80;
const MAX_SEGMENT_MS: usize = 140;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub symptom: String,
    pub phonemes: Vec<String>,
    pub strength: f64,
}

impl PlantedEffect {
    /// Parses `SYMPTOM:PH1,PH2,...:STRENGTH`, e.g. `B6:F,V:1.0`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("plant `{s}`: expected SYMPTOM:PH1,PH2:STRENGTH"));
        let mut parts = s.split(':');
        let (Some(sym), Some(phs), Some(st), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let strength: f64 = st.trim().parse().map_err(|_| bad())?;
        let phonemes = phs.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect();
        Ok(Self {
            symptom: sym.trim().to_string(),
            phonemes,
            strength,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub segments_per_phoneme_per_speaker: usize,
    pub planted_effects: Vec<PlantedEffect>,
    pub seed: u64,
    pub sample_rate: u32,
    /// Phonemes to synthesize; planted phonemes are always included.
    pub phonemes: Vec<String>,
    pub shift_hz_per_step: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_speakers: 16,
            segments_per_phoneme_per_speaker: 40,
            planted_effects: Vec::new(),
            seed: 0,
            sample_rate: DEFAULT_RATE,
            phonemes: default_analysis_set().into_iter().map(str::to_string).collect(),
            shift_hz_per_step: DEFAULT_SHIFT_HZ_PER_STEP,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self, registry: &ScaleRegistry) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_speakers < 2 {
            return bad(format!("need ≥2 speakers, got {}", self.n_speakers));
        }
        if self.segments_per_phoneme_per_speaker == 0 {
            return bad("segments per phoneme must be positive".into());
        }
        if self.sample_rate < 2 * 6400 + 2 {
            return bad(format!("sample rate {} too low for the feature grid", self.sample_rate));
        }
        let min_len = MIN_SEGMENT_MS * self.sample_rate as usize / 1000;
        if min_len < min_samples(DEFAULT_ORDER) {
            return bad(format!("{MIN_SEGMENT_MS} ms segments too short at {} Hz", self.sample_rate));
        }
        for p in &self.phonemes {
            classify_phoneme(p)?;
        }
        for e in &self.planted_effects {
            registry.lookup(&e.symptom)?;
            if !(0.0..=1.0).contains(&e.strength) {
                return bad(format!("effect strength {} outside [0, 1]", e.strength));
            }
            if e.phonemes.is_empty() {
                return bad(format!("plant on {} names no phonemes", e.symptom));
            }
            for p in &e.phonemes {
                classify_phoneme(p)?;
            }
        }
        Ok(())
    }

    /// Canonical labels of all synthesized phonemes, in registry order.
    pub fn all_phonemes(&self) -> Result<Vec<&'static str>> {
        let mut set = BTreeSet::new();
        for p in self.phonemes.iter().chain(self.planted_effects.iter().flat_map(|e| &e.phonemes)) {
            set.insert(classify_phoneme(p)?.label);
        }
        Ok(crate::phonetics::registry()
            .iter()
            .map(|c| c.label)
            .filter(|l| set.contains(l))
            .collect())
    }

    pub fn speaker_ids(&self) -> Vec<String> {
        let width = self.n_speakers.to_string().len().max(2);
        (1..=self.n_speakers).map(|i| format!("S{i:0width$}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub seed: u64,
    pub n_speakers: usize,
    pub segments_per_phoneme_per_speaker: usize,
    pub sample_rate: u32,
    pub shift_hz_per_step: f64,
    pub phonemes: Vec<String>,
    /// Exactly the planted (symptom, phonemes, strength) triples.
    pub planted: Vec<PlantedEffect>,
}

pub struct Recording {
    pub recording_id: String,
    pub speaker_id: String,
    pub audio: AudioBuffer,
}

pub struct SynthCorpus {
    pub recordings: Vec<Recording>,
    pub segments: Vec<SegmentRecord>,
    pub ratings: RatingTable,
    pub manifest: Manifest,
}

/// Resonance centres of a phoneme before any planted shift.
pub fn template(label: &str) -> [f64; RESONANCES] {
    let mut rng = SplitMix64::new(fnv1a64(format!("template:{label}").as_bytes()));
    let mut out = [0.0; RESONANCES];
    for (o, base) in out.iter_mut().zip(TEMPLATE_BASE_HZ) {
        *o = base + rng.uniform(-TEMPLATE_SPREAD_HZ, TEMPLATE_SPREAD_HZ);
    }
    out
}

fn is_voiced(label: &str) -> bool {
    let class = classify_phoneme(label).expect("registry label");
    match (class.kind, class.articulation) {
        (Kind::Consonant, Some(a)) => a.voicing == Voicing::Voiced,
        (Kind::Vowel, _) => true,
        (_, _) => matches!(class.label, "UH" | "UM" | "LAUGH"),
    }
}

/// Cascade of two-pole resonators applied in place.
fn resonate(x: &mut [f64], centres: &[f64], bandwidth: f64, rate: f64) {
    for &f in centres {
        let radius = (-PI * bandwidth / rate).exp();
        let a1 = -2.0 * radius * (TAU * f / rate).cos();
        let a2 = radius * radius;
        let (mut y1, mut y2) = (0.0, 0.0);
        for s in x.iter_mut() {
            let y = *s - a1 * y1 - a2 * y2;
            y2 = y1;
            y1 = y;
            *s = y;
        }
    }
}

fn excitation(rng: &mut SplitMix64, n: usize, voiced: bool, rate: f64) -> Vec<f64> {
    if voiced {
        let f0 = rng.uniform(95.0, 145.0);
        let period = rate / f0;
        let mut next = rng.uniform(0.0, period);
        (0..n)
            .map(|i| {
                let mut v = 0.3 * rng.normal();
                if i as f64 >= next {
                    v += 4.0;
                    next += period;
                }
                v
            })
            .collect()
    } else {
        (0..n).map(|_| rng.normal()).collect()
    }
}

struct SpeakerOutput {
    recording: Recording,
    segments: Vec<SegmentRecord>,
}

fn speaker_ratings(config: &SynthConfig, registry: &ScaleRegistry, speaker: &str) -> BTreeMap<&'static str, i64> {
    let mut rng = SplitMix64::for_context(config.seed, &format!("synth|ratings:{speaker}"));
    registry
        .symptoms()
        .iter()
        .map(|s| {
            let span = (s.max_rating - s.min_rating + 1) as usize;
            (s.code, s.min_rating + rng.below(span) as i64)
        })
        .collect()
}

fn shift_for(config: &SynthConfig, registry: &ScaleRegistry, ratings: &BTreeMap<&str, i64>, label: &str) -> f64 {
    config
        .planted_effects
        .iter()
        .filter(|e| e.phonemes.iter().any(|p| classify_phoneme(p).is_ok_and(|c| c.label == label)))
        .map(|e| {
            let spec = registry.lookup(&e.symptom).expect("validated symptom");
            let rating = ratings[spec.code] as f64;
            e.strength * (rating - spec.midpoint()) * config.shift_hz_per_step
        })
        .sum()
}

fn synth_speaker(
    config: &SynthConfig,
    registry: &ScaleRegistry,
    phonemes: &[&'static str],
    speaker: &str,
    ratings: &BTreeMap<&str, i64>,
) -> Result<SpeakerOutput> {
    let rate = config.sample_rate as f64;
    let samples_per_ms = config.sample_rate as usize / 1000;
    let mut rng = SplitMix64::for_context(config.seed, &format!("synth|speaker:{speaker}"));
    let recording_id = format!("{speaker}_rec");
    let shifts: Vec<f64> = phonemes.iter().map(|p| shift_for(config, registry, ratings, p)).collect();
    let mut samples = Vec::new();
    let mut segments = Vec::new();
    for _ in 0..config.segments_per_phoneme_per_speaker {
        for (&label, &shift) in phonemes.iter().zip(&shifts) {
            samples.resize(samples.len() + GAP_MS * samples_per_ms, 0.0);
            let ms = MIN_SEGMENT_MS + rng.below(MAX_SEGMENT_MS - MIN_SEGMENT_MS + 1);
            let n = ms * samples_per_ms;
            let centres: Vec<f64> = template(label)
                .iter()
                .map(|f| f + shift + INSTANCE_JITTER_HZ * rng.normal())
                .collect();
            let mut seg = excitation(&mut rng, n, is_voiced(label), rate);
            resonate(&mut seg, &centres, BANDWIDTH_HZ, rate);
            let peak = seg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let gain = rng.uniform(0.3, 0.8) / peak;
            let start = samples.len();
            samples.extend(seg.iter().map(|v| v * gain));
            segments.push(SegmentRecord {
                recording_id: recording_id.clone(),
                speaker_id: speaker.to_string(),
                start: start as f64 / rate,
                dur: n as f64 / rate,
                label: label.to_string(),
            });
        }
    }
    samples.resize(samples.len() + GAP_MS * samples_per_ms, 0.0);
    Ok(SpeakerOutput {
        recording: Recording {
            recording_id,
            speaker_id: speaker.to_string(),
            audio: AudioBuffer::new(samples, config.sample_rate)?,
        },
        segments,
    })
}

/// Generates audio, segmentation, ratings for every symptom, and the
/// manifest. Speakers are generated in parallel from independent streams.
pub fn generate_corpus(config: &SynthConfig) -> Result<SynthCorpus> {
    let registry = load_scale_registry();
    config.validate(&registry)?;
    let phonemes = config.all_phonemes()?;
    let speakers = config.speaker_ids();
    let all_ratings: Vec<BTreeMap<&str, i64>> =
        speakers.iter().map(|s| speaker_ratings(config, &registry, s)).collect();
    let outputs = par::map_range(speakers.len(), |i| {
        synth_speaker(config, &registry, &phonemes, &speakers[i], &all_ratings[i])
    });
    let mut ratings = RatingTable::new();
    for (speaker, rs) in speakers.iter().zip(&all_ratings) {
        for (code, &v) in rs {
            ratings.insert(&registry, speaker, code, v, 0)?;
        }
    }
    let mut recordings = Vec::new();
    let mut segments = Vec::new();
    for o in outputs {
        let o = o?;
        recordings.push(o.recording);
        segments.extend(o.segments);
    }
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.to_string(),
        seed: config.seed,
        n_speakers: config.n_speakers,
        segments_per_phoneme_per_speaker: config.segments_per_phoneme_per_speaker,
        sample_rate: config.sample_rate,
        shift_hz_per_step: config.shift_hz_per_step,
        phonemes: phonemes.iter().map(|p| p.to_string()).collect(),
        planted: config.planted_effects.clone(),
    };
    Ok(SynthCorpus {
        recordings,
        segments,
        ratings,
        manifest,
    })
}

/// Paths of a corpus written by [`write_corpus`].
pub struct CorpusPaths {
    pub audio_dir: std::path::PathBuf,
    pub segmentation: std::path::PathBuf,
    pub ratings: std::path::PathBuf,
    pub manifest: std::path::PathBuf,
}

impl CorpusPaths {
    pub fn under(dir: &Path) -> Self {
        Self {
            audio_dir: dir.join("audio"),
            segmentation: dir.join("segments.tsv"),
            ratings: dir.join("ratings.csv"),
            manifest: dir.join("manifest.json"),
        }
    }
}

/// Writes `audio/<recording>.wav`, `segments.tsv`, `ratings.csv` and
/// `manifest.json` under `dir`.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<CorpusPaths> {
    let paths = CorpusPaths::under(dir);
    fs::create_dir_all(&paths.audio_dir).map_err(|e| Error::io(&paths.audio_dir, e))?;
    for r in &corpus.recordings {
        write_wav_i16(&paths.audio_dir.join(format!("{}.wav", r.recording_id)), &r.audio)?;
    }
    let write = |path: &Path, text: String| fs::write(path, text).map_err(|e| Error::io(path, e));
    write(&paths.segmentation, segmentation_to_tsv(&corpus.segments))?;
    write(&paths.ratings, corpus.ratings.to_csv())?;
    write(&paths.manifest, serde_json::to_string_pretty(&corpus.manifest)? + "\n")?;
    Ok(paths)
}
