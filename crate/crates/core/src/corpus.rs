//! Segmentation ingestion and per-(symptom, phoneme) dataset assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{segment_features, FeatureConfig, FeatureVector, Provenance};
use crate::par;
use crate::phonetics::classify_phoneme;
use crate::scales::RatingTable;
use crate::signal::{load_audio, AudioBuffer};

/// Smallest dataset that is evaluated rather than reported as insufficient.
pub const DEFAULT_MIN_INSTANCES: usize = 20;

pub const SEGMENTATION_HEADER: [&str; 5] = ["recording_id", "speaker_id", "start_s", "dur_s", "label"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentRecord {
    pub recording_id: String,
    pub speaker_id: String,
    pub start: f64,
    pub dur: f64,
    /// Canonical registry spelling when the label is known.
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    NegativeDuration,
    ZeroDuration,
    NegativeStart,
    UnknownLabel,
    UnparsableNumber,
    MissingColumn,
}

impl SkipReason {
    pub fn name(self) -> &'static str {
        match self {
            SkipReason::NegativeDuration => "negative_duration",
            SkipReason::ZeroDuration => "zero_duration",
            SkipReason::NegativeStart => "negative_start",
            SkipReason::UnknownLabel => "unknown_label",
            SkipReason::UnparsableNumber => "unparsable_number",
            SkipReason::MissingColumn => "missing_column",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Segmentation {
    pub records: Vec<SegmentRecord>,
    /// Rows dropped in lenient mode, by reason.
    pub skipped: BTreeMap<SkipReason, usize>,
}

pub fn load_segmentation(path: &Path, mode: ParseMode) -> Result<Segmentation> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_segmentation(file, path, mode)
}

pub fn parse_segmentation<R: Read>(input: R, path: &Path, mode: ParseMode) -> Result<Segmentation> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let malformed = |line: usize, message: String| Error::MalformedRow {
        path: path.into(),
        line,
        message,
    };
    let headers = rdr.headers().map_err(|e| malformed(1, e.to_string()))?;
    if headers.iter().ne(SEGMENTATION_HEADER) {
        return Err(Error::BadHeader {
            path: path.into(),
            expected: SEGMENTATION_HEADER.join("\\t"),
        });
    }
    let mut out = Segmentation::default();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| malformed(line, e.to_string()))?;
        match parse_row(&rec, line, path) {
            Ok(r) => out.records.push(r),
            Err((reason, err)) => match mode {
                ParseMode::Strict => return Err(err),
                ParseMode::Lenient => {
                    log::debug!("skipping line {line}: {err}");
                    *out.skipped.entry(reason).or_default() += 1;
                }
            },
        }
    }
    Ok(out)
}

fn parse_row(
    rec: &csv::StringRecord,
    line: usize,
    path: &Path,
) -> std::result::Result<SegmentRecord, (SkipReason, Error)> {
    let malformed = |message: String| Error::MalformedRow {
        path: path.into(),
        line,
        message,
    };
    if rec.len() < 5 || rec.iter().take(5).any(str::is_empty) {
        return Err((
            SkipReason::MissingColumn,
            malformed(format!("expected 5 non-empty columns, got {}", rec.len())),
        ));
    }
    let number = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| (SkipReason::UnparsableNumber, malformed(format!("unparsable number `{s}`"))))
    };
    let start = number(&rec[2])?;
    let dur = number(&rec[3])?;
    if dur < 0.0 {
        return Err((SkipReason::NegativeDuration, Error::NegativeDuration(line)));
    }
    if dur == 0.0 {
        return Err((SkipReason::ZeroDuration, malformed("zero duration".into())));
    }
    if start < 0.0 {
        return Err((SkipReason::NegativeStart, malformed(format!("negative start {start}"))));
    }
    let class = classify_phoneme(&rec[4]).map_err(|e| (SkipReason::UnknownLabel, e))?;
    Ok(SegmentRecord {
        recording_id: rec[0].to_string(),
        speaker_id: rec[1].to_string(),
        start,
        dur,
        label: class.label.to_string(),
    })
}

/// Renders segment records as TSV with the standard header.
pub fn segmentation_to_tsv(records: &[SegmentRecord]) -> String {
    let mut out = SEGMENTATION_HEADER.join("\t");
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\t{}\n",
            r.recording_id, r.speaker_id, r.start, r.dur, r.label
        ));
    }
    out
}

/// Recordings stored as `<dir>/<recording_id>.wav`.
#[derive(Debug, Clone)]
pub struct AudioStore {
    dir: PathBuf,
    rate: u32,
}

impl AudioStore {
    pub fn new(dir: impl Into<PathBuf>, rate: u32) -> Self {
        Self {
            dir: dir.into(),
            rate,
        }
    }

    pub fn path_of(&self, recording_id: &str) -> PathBuf {
        self.dir.join(format!("{recording_id}.wav"))
    }

    pub fn rate(&self) -> u32 {
        self.rate
    }

    pub fn load(&self, recording_id: &str) -> Result<AudioBuffer> {
        load_audio(&self.path_of(recording_id), self.rate)
    }
}

/// Features for a set of segments, with per-phoneme skip counts.
#[derive(Debug, Clone, Default)]
pub struct FeatureSet {
    pub vectors: Vec<FeatureVector>,
    pub too_short: BTreeMap<String, usize>,
    pub degenerate: BTreeMap<String, usize>,
}

impl FeatureSet {
    /// Builds a set from already computed vectors (e.g. a features CSV).
    pub fn from_vectors(mut vectors: Vec<FeatureVector>) -> Self {
        sort_canonical(&mut vectors);
        Self {
            vectors,
            ..Self::default()
        }
    }

    pub fn skipped(&self, phoneme: &str) -> usize {
        self.too_short.get(phoneme).copied().unwrap_or(0) + self.degenerate.get(phoneme).copied().unwrap_or(0)
    }

    pub fn of_phoneme<'a>(&'a self, phoneme: &'a str) -> impl Iterator<Item = &'a FeatureVector> + 'a {
        self.vectors.iter().filter(move |v| v.provenance.phoneme == phoneme)
    }
}

fn canonical_key(p: &Provenance) -> (&str, &str, f64) {
    (&p.speaker_id, &p.recording_id, p.start)
}

fn sort_canonical(vectors: &mut [FeatureVector]) {
    vectors.sort_by(|a, b| {
        let (ka, kb) = (canonical_key(&a.provenance), canonical_key(&b.provenance));
        ka.0.cmp(kb.0)
            .then(ka.1.cmp(kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(a.provenance.phoneme.cmp(&b.provenance.phoneme))
            .then(a.provenance.dur.total_cmp(&b.provenance.dur))
    });
}

enum SegmentOutcome {
    Ok(FeatureVector),
    TooShort(String),
    Degenerate(String),
}

/// Computes features for every segment whose label passes `keep`, loading
/// each recording once. Recordings are processed in parallel.
pub fn compute_features(
    segments: &[SegmentRecord],
    store: &AudioStore,
    config: &FeatureConfig,
    keep: impl Fn(&str) -> bool + Sync,
) -> Result<FeatureSet> {
    let mut by_recording: BTreeMap<&str, Vec<&SegmentRecord>> = BTreeMap::new();
    for s in segments.iter().filter(|s| keep(&s.label)) {
        by_recording.entry(&s.recording_id).or_default().push(s);
    }
    let groups: Vec<(&str, Vec<&SegmentRecord>)> = by_recording.into_iter().collect();
    let outcomes = par::map(&groups, |(rec_id, segs)| -> Result<Vec<SegmentOutcome>> {
        let audio = store.load(rec_id)?;
        segs.iter().map(|s| features_for(&audio, s, config)).collect()
    });
    let mut set = FeatureSet::default();
    for group in outcomes {
        for o in group? {
            match o {
                SegmentOutcome::Ok(v) => set.vectors.push(v),
                SegmentOutcome::TooShort(p) => *set.too_short.entry(p).or_default() += 1,
                SegmentOutcome::Degenerate(p) => *set.degenerate.entry(p).or_default() += 1,
            }
        }
    }
    sort_canonical(&mut set.vectors);
    Ok(set)
}

fn features_for(audio: &AudioBuffer, seg: &SegmentRecord, config: &FeatureConfig) -> Result<SegmentOutcome> {
    let samples = audio.span(seg.start, seg.dur)?;
    match segment_features(samples, audio.sample_rate() as f64, config) {
        Ok(values) => Ok(SegmentOutcome::Ok(FeatureVector {
            values,
            provenance: Provenance {
                recording_id: seg.recording_id.clone(),
                speaker_id: seg.speaker_id.clone(),
                phoneme: seg.label.clone(),
                start: seg.start,
                dur: seg.dur,
            },
        })),
        Err(Error::SegmentTooShort { .. }) => Ok(SegmentOutcome::TooShort(seg.label.clone())),
        Err(Error::ZeroEnergy | Error::NonFiniteSpectrum) => Ok(SegmentOutcome::Degenerate(seg.label.clone())),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    pub features: FeatureVector,
    pub rating: i64,
}

impl Instance {
    pub fn speaker(&self) -> &str {
        &self.features.provenance.speaker_id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub symptom: String,
    pub phoneme: String,
    /// Sorted by (speaker, recording, start).
    pub instances: Vec<Instance>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Distinct speakers in lexicographic order.
    pub fn speakers(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.instances.iter().map(Instance::speaker).collect();
        set.into_iter().collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.instances.iter().map(|i| i.rating as f64).collect()
    }

    /// Context string used to derive per-tree random streams.
    pub fn seed_context(&self) -> String {
        format!("{}|{}", self.symptom, self.phoneme)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub dataset: Dataset,
    /// Speakers with segments but no rating for the symptom.
    pub dropped_speakers: Vec<String>,
    pub skipped_too_short: usize,
}

/// Joins precomputed features of `phoneme` with each speaker's rating for
/// `symptom`.
pub fn assemble_from_features(
    features: &FeatureSet,
    ratings: &RatingTable,
    symptom: &str,
    phoneme: &str,
) -> Result<Assembled> {
    let mut instances = Vec::new();
    let mut dropped = BTreeSet::new();
    for v in features.of_phoneme(phoneme) {
        match ratings.get(&v.provenance.speaker_id, symptom) {
            Some(rating) => instances.push(Instance {
                features: v.clone(),
                rating,
            }),
            None => {
                dropped.insert(v.provenance.speaker_id.clone());
            }
        }
    }
    if !dropped.is_empty() {
        log::warn!(
            "{symptom}/{phoneme}: no rating for speakers {}; their instances are excluded",
            dropped.iter().cloned().collect::<Vec<_>>().join(", ")
        );
    }
    let skipped = features.skipped(phoneme);
    if instances.is_empty() {
        return Err(Error::NoUsableInstances { usable: 0, skipped });
    }
    let mut dataset = Dataset {
        symptom: symptom.to_string(),
        phoneme: phoneme.to_string(),
        instances,
    };
    dataset.instances.sort_by(|a, b| {
        let (pa, pb) = (&a.features.provenance, &b.features.provenance);
        canonical_key(pa)
            .0
            .cmp(canonical_key(pb).0)
            .then(pa.recording_id.cmp(&pb.recording_id))
            .then(pa.start.total_cmp(&pb.start))
            .then(pa.dur.total_cmp(&pb.dur))
    });
    let n_speakers = dataset.speakers().len();
    if n_speakers < 2 {
        return Err(Error::TooFewSpeakers(n_speakers));
    }
    Ok(Assembled {
        dataset,
        dropped_speakers: dropped.into_iter().collect(),
        skipped_too_short: skipped,
    })
}

/// Computes features for the segments of `phoneme` and assembles the dataset
/// for `symptom`.
pub fn assemble_dataset(
    segments: &[SegmentRecord],
    store: &AudioStore,
    ratings: &RatingTable,
    symptom: &str,
    phoneme: &str,
    config: &FeatureConfig,
) -> Result<Assembled> {
    let label = classify_phoneme(phoneme)?.label;
    let features = compute_features(segments, store, config, |l| l == label)?;
    assemble_from_features(&features, ratings, symptom, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scales::load_scale_registry;

    const HEADER: &str = "recording_id\tspeaker_id\tstart_s\tdur_s\tlabel\n";

    fn parse(body: &str, mode: ParseMode) -> Result<Segmentation> {
        parse_segmentation(format!("{HEADER}{body}").as_bytes(), Path::new("s.tsv"), mode)
    }

    #[test]
    fn well_formed_row() {
        let s = parse("rec1\tS01\t12.400\t0.080\tF\n", ParseMode::Strict).unwrap();
        assert_eq!(
            s.records,
            vec![SegmentRecord {
                recording_id: "rec1".into(),
                speaker_id: "S01".into(),
                start: 12.4,
                dur: 0.08,
                label: "F".into()
            }]
        );
    }

    #[test]
    fn strict_rejects_negative_duration() {
        let e = parse("rec1\tS01\t1.0\t0.08\tF\nrec1\tS01\t1.2\t-0.08\tF\n", ParseMode::Strict).unwrap_err();
        assert_eq!(e.to_string(), "negative duration at line 3");
    }

    #[test]
    fn lenient_counts_skips() {
        let s = parse(
            "rec1\tS01\t1.0\t0.08\tQX\nrec1\tS01\t1.2\t0.08\tv\nrec1\tS01\tabc\t0.08\tF\nrec1\tS01\n",
            ParseMode::Lenient,
        )
        .unwrap();
        assert_eq!(s.records.len(), 1);
        assert_eq!(s.records[0].label, "V");
        assert_eq!(s.skipped.get(&SkipReason::UnknownLabel), Some(&1));
        assert_eq!(s.skipped.get(&SkipReason::UnparsableNumber), Some(&1));
        assert_eq!(s.skipped.get(&SkipReason::MissingColumn), Some(&1));
        let e = parse("rec1\tS01\t1.0\t0.08\tQX\n", ParseMode::Strict).unwrap_err();
        assert_eq!(e.to_string(), "unknown phoneme label: QX");
    }

    #[test]
    fn tsv_round_trip() {
        let s = parse("r\tS1\t0.5\t0.0625\tSH\nr\tS2\t1.25\t0.1\tBR\n", ParseMode::Strict).unwrap();
        let back = parse_segmentation(
            segmentation_to_tsv(&s.records).as_bytes(),
            Path::new("x"),
            ParseMode::Strict,
        )
        .unwrap();
        assert_eq!(back, s);
    }

    fn fv(speaker: &str, phoneme: &str, start: f64) -> FeatureVector {
        FeatureVector {
            values: vec![start; 64],
            provenance: Provenance {
                recording_id: format!("rec_{speaker}"),
                speaker_id: speaker.into(),
                phoneme: phoneme.into(),
                start,
                dur: 0.05,
            },
        }
    }

    fn ratings(rows: &[(&str, i64)]) -> RatingTable {
        let reg = load_scale_registry();
        let mut t = RatingTable::new();
        for (i, (s, v)) in rows.iter().enumerate() {
            t.insert(&reg, s, "B6", *v, i + 2).unwrap();
        }
        t
    }

    #[test]
    fn labels_follow_speaker_rating() {
        let set = FeatureSet::from_vectors(vec![
            fv("B", "F", 0.1),
            fv("A", "F", 0.3),
            fv("A", "F", 0.1),
            fv("B", "F", 0.2),
            fv("A", "F", 0.2),
            fv("A", "V", 0.4),
        ]);
        let a = assemble_from_features(&set, &ratings(&[("A", 5), ("B", 2)]), "B6", "F").unwrap();
        let labels: Vec<i64> = a.dataset.instances.iter().map(|i| i.rating).collect();
        assert_eq!(labels, vec![5, 5, 5, 2, 2]);
        assert_eq!(a.dataset.speakers(), vec!["A", "B"]);
        assert!(a.dropped_speakers.is_empty());
    }

    #[test]
    fn unrated_speakers_are_dropped() {
        let set = FeatureSet::from_vectors(vec![fv("A", "F", 0.1), fv("B", "F", 0.1), fv("C", "F", 0.1)]);
        let a = assemble_from_features(&set, &ratings(&[("A", 5), ("B", 2)]), "B6", "F").unwrap();
        assert_eq!(a.dropped_speakers, vec!["C".to_string()]);
        assert_eq!(a.dataset.len(), 2);
        let e = assemble_from_features(&set, &ratings(&[("A", 5)]), "B6", "F").unwrap_err();
        assert!(matches!(e, Error::TooFewSpeakers(1)));
    }

    #[test]
    fn all_too_short_message() {
        let mut set = FeatureSet::default();
        set.too_short.insert("F".into(), 12);
        let e = assemble_from_features(&set, &ratings(&[("A", 5)]), "B6", "F").unwrap_err();
        assert_eq!(e.to_string(), "0 usable instances (12 skipped: too short)");
    }

    #[test]
    fn input_order_does_not_matter() {
        let v = vec![fv("B", "F", 0.1), fv("A", "F", 0.3), fv("A", "F", 0.1), fv("B", "F", 0.2)];
        let mut w = v.clone();
        w.reverse();
        let r = ratings(&[("A", 5), ("B", 2)]);
        let a = assemble_from_features(&FeatureSet::from_vectors(v), &r, "B6", "F").unwrap();
        let b = assemble_from_features(&FeatureSet::from_vectors(w), &r, "B6", "F").unwrap();
        assert_eq!(a, b);
    }
}
