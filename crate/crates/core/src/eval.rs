//! Leave-one-speaker-out evaluation of one (symptom, phoneme) pair.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{assemble_from_features, Dataset, FeatureSet, DEFAULT_MIN_INSTANCES};
use crate::error::{Error, Result};
use crate::fmt::fmt_exact;
use crate::model::{train_forest_on, RfConfig};
use crate::par;
use crate::scales::RatingTable;
use crate::stats::{correlation_stats, pearson};

/// One cross-validation fold: every instance of `test_speaker` held out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub test_speaker: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Folds in lexicographic speaker order.
pub fn loso_folds(data: &Dataset) -> Result<Vec<Fold>> {
    let speakers = data.speakers();
    if speakers.len() < 2 {
        return Err(Error::LosoSingleSpeaker);
    }
    Ok(speakers
        .iter()
        .map(|&s| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..data.len()).partition(|&i| data.instances[i].speaker() == s);
            Fold {
                test_speaker: s.to_string(),
                train,
                test,
            }
        })
        .collect())
}

/// Held-out prediction for every instance, aligned with `data.instances`.
pub fn run_loso(data: &Dataset, config: &RfConfig) -> Result<Vec<f64>> {
    let folds = loso_folds(data)?;
    let context = data.seed_context();
    let fold_preds = par::map(&folds, |fold| -> Result<Vec<(usize, f64)>> {
        let rows: Vec<&[f64]> = fold
            .train
            .iter()
            .map(|&i| data.instances[i].features.values.as_slice())
            .collect();
        let targets: Vec<f64> = fold.train.iter().map(|&i| data.instances[i].rating as f64).collect();
        let forest = train_forest_on(&rows, &targets, config, &context)?;
        fold.test
            .iter()
            .map(|&i| Ok((i, forest.predict(&data.instances[i].features.values)?)))
            .collect()
    });
    let mut out = vec![f64::NAN; data.len()];
    for fp in fold_preds {
        for (i, p) in fp? {
            out[i] = p;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Evaluated,
    InsufficientData,
    Degenerate,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Evaluated => "evaluated",
            Status::InsufficientData => "insufficient-data",
            Status::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "evaluated" => Ok(Status::Evaluated),
            "insufficient-data" => Ok(Status::InsufficientData),
            "degenerate" => Ok(Status::Degenerate),
            _ => Err(format!("unknown status `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub symptom: String,
    pub phoneme: String,
    pub n: usize,
    /// Pooled-instance correlation; absent unless evaluated.
    pub r: Option<f64>,
    pub p: Option<f64>,
    /// Correlation of per-speaker mean predictions with ratings.
    pub per_speaker_r: Option<f64>,
    pub status: Status,
}

impl PairResult {
    fn unevaluated(symptom: &str, phoneme: &str, n: usize, status: Status) -> Self {
        Self {
            symptom: symptom.to_string(),
            phoneme: phoneme.to_string(),
            n,
            r: None,
            p: None,
            per_speaker_r: None,
            status,
        }
    }
}

/// Mean held-out prediction for one speaker within one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerMean {
    pub symptom: String,
    pub phoneme: String,
    pub speaker_id: String,
    pub n: usize,
    pub mean_prediction: f64,
    pub rating: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairEvaluation {
    pub result: PairResult,
    pub speaker_means: Vec<SpeakerMean>,
}

fn speaker_means(data: &Dataset, preds: &[f64]) -> Vec<SpeakerMean> {
    let mut acc: BTreeMap<&str, (f64, usize, i64)> = BTreeMap::new();
    for (inst, &p) in data.instances.iter().zip(preds) {
        let e = acc.entry(inst.speaker()).or_insert((0.0, 0, inst.rating));
        e.0 += p;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(s, (sum, n, rating))| SpeakerMean {
            symptom: data.symptom.clone(),
            phoneme: data.phoneme.clone(),
            speaker_id: s.to_string(),
            n,
            mean_prediction: sum / n as f64,
            rating,
        })
        .collect()
}

/// LOSO over an assembled dataset, then pooled and per-speaker correlations.
pub fn evaluate_dataset(data: &Dataset, config: &RfConfig, min_instances: usize) -> Result<PairEvaluation> {
    let (sym, ph) = (&data.symptom, &data.phoneme);
    if data.len() < min_instances || data.speakers().len() < 2 {
        return Ok(PairEvaluation {
            result: PairResult::unevaluated(sym, ph, data.len(), Status::InsufficientData),
            speaker_means: Vec::new(),
        });
    }
    let preds = run_loso(data, config)?;
    let truth = data.targets();
    let means = speaker_means(data, &preds);
    let result = match correlation_stats(&preds, &truth) {
        Ok(stats) => {
            let mp: Vec<f64> = means.iter().map(|m| m.mean_prediction).collect();
            let mr: Vec<f64> = means.iter().map(|m| m.rating as f64).collect();
            let per_speaker_r = if means.len() >= 3 { pearson(&mp, &mr).ok() } else { None };
            PairResult {
                symptom: sym.clone(),
                phoneme: ph.clone(),
                n: stats.n,
                r: Some(stats.r),
                p: Some(stats.p),
                per_speaker_r,
                status: Status::Evaluated,
            }
        }
        Err(Error::ZeroVariance(_) | Error::TooFewPoints(_)) => {
            PairResult::unevaluated(sym, ph, data.len(), Status::Degenerate)
        }
        Err(e) => return Err(e),
    };
    Ok(PairEvaluation {
        result,
        speaker_means: means,
    })
}

/// Evaluates one pair from precomputed features. Data shortfalls become a
/// status; only infrastructure failures are errors.
pub fn evaluate_pair(
    symptom: &str,
    phoneme: &str,
    features: &FeatureSet,
    ratings: &RatingTable,
    config: &RfConfig,
    min_instances: usize,
) -> Result<PairEvaluation> {
    match assemble_from_features(features, ratings, symptom, phoneme) {
        Ok(a) => evaluate_dataset(&a.dataset, config, min_instances),
        Err(Error::NoUsableInstances { .. }) => Ok(PairEvaluation {
            result: PairResult::unevaluated(symptom, phoneme, 0, Status::InsufficientData),
            speaker_means: Vec::new(),
        }),
        Err(Error::TooFewSpeakers(_)) => {
            let n = features
                .of_phoneme(phoneme)
                .filter(|v| ratings.get(&v.provenance.speaker_id, symptom).is_some())
                .count();
            Ok(PairEvaluation {
                result: PairResult::unevaluated(symptom, phoneme, n, Status::InsufficientData),
                speaker_means: Vec::new(),
            })
        }
        Err(e) => Err(e),
    }
}

pub fn default_min_instances() -> usize {
    DEFAULT_MIN_INSTANCES
}

pub const PAIRS_HEADER: [&str; 7] = ["symptom", "phoneme", "n", "r", "p", "per_speaker_r", "status"];
pub const MEANS_HEADER: [&str; 6] = ["symptom", "phoneme", "speaker_id", "n", "mean_prediction", "rating"];

fn opt(x: Option<f64>) -> String {
    x.map(fmt_exact).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidConfig(format!("csv: {e}"))
}

/// Pair results as CSV; floats written so they parse back exactly.
pub fn write_pairs_csv<W: Write>(out: W, results: &[PairResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PAIRS_HEADER).map_err(csv_err)?;
    for r in results {
        w.write_record([
            r.symptom.clone(),
            r.phoneme.clone(),
            r.n.to_string(),
            opt(r.r),
            opt(r.p),
            opt(r.per_speaker_r),
            r.status.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<pairs csv>", e))
}

pub fn pairs_csv_string(results: &[PairResult]) -> String {
    let mut buf = Vec::new();
    write_pairs_csv(&mut buf, results).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8 csv")
}

fn read_table<R: Read>(input: R, path: &Path, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let h = rdr.headers().map_err(csv_err)?;
    if h.iter().ne(header.iter().copied()) {
        return Err(Error::BadHeader {
            path: path.into(),
            expected: header.join(","),
        });
    }
    rdr.records()
        .enumerate()
        .map(|(i, r)| {
            r.map(|r| (i + 2, r)).map_err(|e| Error::MalformedRow {
                path: path.into(),
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, line: usize, path: &Path) -> Result<T> {
    rec[i].parse().map_err(|_| Error::MalformedRow {
        path: path.into(),
        line,
        message: format!("cannot parse `{}`", &rec[i]),
    })
}

fn opt_field(rec: &csv::StringRecord, i: usize, line: usize, path: &Path) -> Result<Option<f64>> {
    if rec[i].is_empty() {
        Ok(None)
    } else {
        field(rec, i, line, path).map(Some)
    }
}

pub fn read_pairs_csv<R: Read>(input: R, path: &Path) -> Result<Vec<PairResult>> {
    read_table(input, path, &PAIRS_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(PairResult {
                symptom: rec[0].to_string(),
                phoneme: rec[1].to_string(),
                n: field(&rec, 2, line, path)?,
                r: opt_field(&rec, 3, line, path)?,
                p: opt_field(&rec, 4, line, path)?,
                per_speaker_r: opt_field(&rec, 5, line, path)?,
                status: field(&rec, 6, line, path)?,
            })
        })
        .collect()
}

pub fn write_means_csv<W: Write>(out: W, means: &[SpeakerMean]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MEANS_HEADER).map_err(csv_err)?;
    for m in means {
        w.write_record([
            m.symptom.clone(),
            m.phoneme.clone(),
            m.speaker_id.clone(),
            m.n.to_string(),
            fmt_exact(m.mean_prediction),
            m.rating.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<means csv>", e))
}

pub fn read_means_csv<R: Read>(input: R, path: &Path) -> Result<Vec<SpeakerMean>> {
    read_table(input, path, &MEANS_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(SpeakerMean {
                symptom: rec[0].to_string(),
                phoneme: rec[1].to_string(),
                speaker_id: rec[2].to_string(),
                n: field(&rec, 3, line, path)?,
                mean_prediction: field(&rec, 4, line, path)?,
                rating: field(&rec, 5, line, path)?,
            })
        })
        .collect()
}
