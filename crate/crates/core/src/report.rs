//! Run reports: canonical JSON, a markdown summary, and consonant-chart data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::eval::Status;
use crate::fmt::round_sig;
use crate::phonetics::{classify_phoneme, Axis};
use crate::pipeline::EvalRun;
use crate::rng::fnv1a64;
use crate::scales::load_scale_registry;
use crate::select::{select_all, SelectedPhoneme, SelectionReport, Thresholds};

pub const REPORT_SCHEMA: &str = "phonograde/1";
pub const NO_PREDICTIVE_PHONEMES: &str = "no predictive phonemes";
pub const SIGNIFICANT_DIGITS: usize = 6;
pub const CATEGORY_AGGREGATION: &str =
    "per speaker, mean over passing member phonemes of that phoneme's mean held-out prediction; correlated with ratings across speakers";

/// Selection reports tied to the evaluation run they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSet {
    pub run_id: String,
    pub thresholds: Thresholds,
    pub reports: Vec<SelectionReport>,
}

impl SelectionSet {
    pub fn from_run(run: &EvalRun, thresholds: &Thresholds) -> Result<Self> {
        thresholds.validate()?;
        Ok(Self {
            run_id: run.run_id.clone(),
            thresholds: *thresholds,
            reports: select_all(&run.pairs, &run.speaker_means, thresholds)?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        canonical_json(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_id: String,
    pub seed: u64,
    /// Hash of the canonical effective configuration.
    pub config_hash: String,
    pub config: Value,
    pub thresholds: Thresholds,
    pub statistic: String,
    pub category_aggregation: String,
    pub pair_counts: BTreeMap<Status, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymptomReport {
    pub symptom: String,
    pub scale: String,
    pub description: String,
    /// Set when nothing passes the selection gate.
    pub marker: Option<String>,
    pub selected: Vec<SelectedPhoneme>,
    pub selected_strict: Vec<SelectedPhoneme>,
    pub category_rankings: BTreeMap<Axis, Vec<crate::select::CategoryScore>>,
}

/// Symptoms a consonant predicts at each threshold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChartEntry {
    pub p_select: Vec<String>,
    pub p_category: Vec<String>,
}

/// `{manner}|{place}|{voicing}` → consonant → entry.
pub type Chart = BTreeMap<String, BTreeMap<String, ChartEntry>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub run: RunMeta,
    pub symptoms: Vec<SymptomReport>,
    pub chart: Chart,
}

/// Hex FNV-1a hash of the canonical JSON form of `config`.
pub fn config_hash(config: &Value) -> Result<String> {
    Ok(format!("{:016x}", fnv1a64(canonical_json(config)?.as_bytes())))
}

/// Combines evaluation results and selections into a report. The selections
/// must come from the same run.
pub fn build_report(run: &EvalRun, selections: &SelectionSet, seed: u64, config: Value) -> Result<RunReport> {
    if selections.run_id != run.run_id {
        return Err(Error::InconsistentRun(run.run_id.clone(), selections.run_id.clone()));
    }
    let registry = load_scale_registry();
    let mut pair_counts = BTreeMap::new();
    for p in &run.pairs {
        *pair_counts.entry(p.status).or_insert(0) += 1;
    }
    let mut reports: Vec<&SelectionReport> = selections.reports.iter().collect();
    let order = |code: &str| registry.symptoms().iter().position(|s| s.code == code).unwrap_or(usize::MAX);
    reports.sort_by(|a, b| order(&a.symptom).cmp(&order(&b.symptom)).then(a.symptom.cmp(&b.symptom)));
    let symptoms = reports
        .iter()
        .map(|r| {
            let spec = registry.get(&r.symptom);
            SymptomReport {
                symptom: r.symptom.clone(),
                scale: spec.map(|s| s.scale.to_string()).unwrap_or_default(),
                description: spec.map(|s| s.description.to_string()).unwrap_or_default(),
                marker: r.selected.is_empty().then(|| NO_PREDICTIVE_PHONEMES.to_string()),
                selected: r.selected.clone(),
                selected_strict: r.selected_strict.clone(),
                category_rankings: r.category_rankings.clone(),
            }
        })
        .collect::<Vec<_>>();
    let chart = build_chart(&symptoms);
    Ok(RunReport {
        schema: REPORT_SCHEMA.to_string(),
        run: RunMeta {
            run_id: run.run_id.clone(),
            seed,
            config_hash: config_hash(&config)?,
            config,
            thresholds: selections.thresholds,
            statistic: "pooled-instance".to_string(),
            category_aggregation: CATEGORY_AGGREGATION.to_string(),
            pair_counts,
        },
        symptoms,
        chart,
    })
}

fn build_chart(symptoms: &[SymptomReport]) -> Chart {
    let mut chart = Chart::new();
    let mut add = |phoneme: &str, symptom: &str, strict: bool| {
        let Ok(class) = classify_phoneme(phoneme) else { return };
        let Some(key) = class.chart_key() else { return };
        let entry = chart.entry(key).or_default().entry(class.label.to_string()).or_default();
        let list = if strict { &mut entry.p_category } else { &mut entry.p_select };
        list.push(symptom.to_string());
    };
    for s in symptoms {
        for sel in &s.selected {
            add(&sel.phoneme, &s.symptom, false);
        }
        for sel in &s.selected_strict {
            add(&sel.phoneme, &s.symptom, true);
        }
    }
    chart
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            serde_json::Number::from_f64(round_sig(x, SIGNIFICANT_DIGITS))
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and floats rounded to 6 significant digits.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = canonicalize(serde_json::to_value(value)?);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

pub fn report_json(report: &RunReport) -> Result<String> {
    canonical_json(report)
}

pub fn chart_json(report: &RunReport) -> Result<String> {
    canonical_json(&report.chart)
}

fn names(scores: &[crate::select::CategoryScore], p_max: f64) -> String {
    let v: Vec<&str> = scores.iter().filter(|c| c.p <= p_max).map(|c| c.category.as_str()).collect();
    if v.is_empty() {
        "—".to_string()
    } else {
        v.join(", ")
    }
}

/// Markdown summary: selected phonemes per symptom, then the categories
/// whose aggregate passes the selection threshold, by decreasing r.
pub fn report_markdown(report: &RunReport) -> String {
    let t = &report.run.thresholds;
    let mut md = String::new();
    let _ = writeln!(md, "# Phoneme selection report\n");
    let _ = writeln!(
        md,
        "Run `{}`, seed {}. Selection: r > {}, p ≤ {}. Categories built from phonemes with p ≤ {}.\n",
        report.run.run_id, report.run.seed, t.r, t.p_select, t.p_category
    );
    let _ = writeln!(md, "## Predictive phonemes\n");
    let _ = writeln!(md, "| Symptom | Description | Phonemes (r) |");
    let _ = writeln!(md, "|---|---|---|");
    for s in &report.symptoms {
        let phonemes = match &s.marker {
            Some(m) => format!("— {m}"),
            None => s
                .selected
                .iter()
                .map(|p| format!("{} ({:.3})", p.phoneme, p.r))
                .collect::<Vec<_>>()
                .join(", "),
        };
        let _ = writeln!(md, "| {} | {} | {} |", s.symptom, s.description, phonemes);
    }
    let _ = writeln!(md, "\n## Dominant categories (p ≤ {})\n", t.p_select);
    let _ = writeln!(md, "| Symptom | Place | Manner | Voicing |");
    let _ = writeln!(md, "|---|---|---|---|");
    for s in &report.symptoms {
        let axis = |a: Axis| names(s.category_rankings.get(&a).map_or(&[][..], |v| v), t.p_select);
        let (place, manner, voicing) = (axis(Axis::Place), axis(Axis::Manner), axis(Axis::Voicing));
        if place == "—" && manner == "—" && voicing == "—" {
            continue;
        }
        let _ = writeln!(md, "| {} | {} | {} | {} |", s.symptom, place, manner, voicing);
    }
    md
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Markdown,
}

/// Writes the report in `format` to `out`.
pub fn emit_report(report: &RunReport, format: Format, out: &Path) -> Result<()> {
    let text = match format {
        Format::Json => report_json(report)?,
        Format::Markdown => report_markdown(report),
    };
    std::fs::write(out, text).map_err(|e| Error::io(out, e))
}

/// Parses a report written by [`emit_report`] in JSON form.
pub fn parse_report(text: &str) -> Result<RunReport> {
    let report: RunReport = serde_json::from_str(text)?;
    if report.schema != REPORT_SCHEMA {
        return Err(Error::InvalidConfig(format!("unsupported report schema `{}`", report.schema)));
    }
    Ok(report)
}
