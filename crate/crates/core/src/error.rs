use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    /// Audio container or encoding outside the supported WAV subset.
    #[error("{path}: {what} unsupported")]
    UnsupportedAudio { path: PathBuf, what: String },

    #[error("{path}: malformed WAV: {message}")]
    MalformedAudio { path: PathBuf, message: String },

    #[error("{0}: zero-length audio")]
    EmptyAudio(PathBuf),

    #[error("span exceeds buffer: [{start}, {end}) s beyond {duration} s")]
    SpanExceedsBuffer { start: f64, end: f64, duration: f64 },

    #[error("non-positive duration: {0} s")]
    NonPositiveDuration(f64),

    #[error("negative start time: {0} s")]
    NegativeStart(f64),

    #[error("invalid sample rate: {0}")]
    InvalidRate(f64),

    #[error("too few samples for order {order}: need ≥{needed}, got {got}")]
    TooFewSamples { order: usize, needed: usize, got: usize },

    #[error("segment too short: need ≥{needed} samples, got {got}")]
    SegmentTooShort { needed: usize, got: usize },

    #[error("zero-energy input")]
    ZeroEnergy,

    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("non-finite spectrum value")]
    NonFiniteSpectrum,

    #[error("grid frequency {freq} Hz at or above Nyquist ({nyquist} Hz)")]
    AboveNyquist { freq: f64, nyquist: f64 },

    #[error("unknown phoneme label: {0}")]
    UnknownPhoneme(String),

    #[error("unknown category: {axis}={value}")]
    UnknownCategory { axis: String, value: String },

    #[error("unknown symptom code: {code}{}", at_line(*.line))]
    UnknownSymptom { code: String, line: Option<usize> },

    #[error("rating {value} out of range {min}–{max} for {code} at line {line}")]
    RatingOutOfRange {
        code: String,
        value: i64,
        min: i64,
        max: i64,
        line: usize,
    },

    #[error("duplicate rating for ({speaker}, {code})")]
    DuplicateRating { speaker: String, code: String },

    #[error("{path}: malformed row at line {line}: {message}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: bad header: expected `{expected}`")]
    BadHeader { path: PathBuf, expected: String },

    #[error("negative duration at line {0}")]
    NegativeDuration(usize),

    #[error("{usable} usable instances ({skipped} skipped: too short)")]
    NoUsableInstances { usable: usize, skipped: usize },

    #[error("too few speakers: {0} (need ≥2)")]
    TooFewSpeakers(usize),

    #[error("LOSO requires ≥2 speakers")]
    LosoSingleSpeaker,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least 3 points for a correlation, got {0}")]
    TooFewPoints(usize),

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("mixed-symptom input: {0} and {1}")]
    MixedSymptoms(String, String),

    #[error("category not dominant: {0}")]
    CategoryNotDominant(String),

    #[error("inconsistent run ids: {0} vs {1}")]
    InconsistentRun(String, String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}
