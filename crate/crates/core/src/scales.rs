//! BPRS, MADRS and PANSS symptom registries and per-speaker rating tables.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scale {
    Bprs,
    Madrs,
    Panss,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Bprs => "BPRS",
            Scale::Madrs => "MADRS",
            Scale::Panss => "PANSS",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymptomSpec {
    pub code: &'static str,
    pub scale: Scale,
    pub description: &'static str,
    #[serde(rename = "min")]
    pub min_rating: i64,
    #[serde(rename = "max")]
    pub max_rating: i64,
    pub is_total: bool,
}

impl SymptomSpec {
    pub fn midpoint(&self) -> f64 {
        (self.min_rating + self.max_rating) as f64 / 2.0
    }

    pub fn validate(&self, value: i64) -> std::result::Result<(), RangeViolation> {
        validate_rating(self, value)
    }
}

/// Rating outside a symptom's legal range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeViolation {
    pub code: String,
    pub value: i64,
    pub min: i64,
    pub max: i64,
}

impl fmt::Display for RangeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} allows {}–{} (got {})",
            self.code, self.min, self.max, self.value
        )
    }
}

pub fn validate_rating(spec: &SymptomSpec, value: i64) -> std::result::Result<(), RangeViolation> {
    if (spec.min_rating..=spec.max_rating).contains(&value) {
        Ok(())
    } else {
        Err(RangeViolation {
            code: spec.code.to_string(),
            value,
            min: spec.min_rating,
            max: spec.max_rating,
        })
    }
}

const fn item(code: &'static str, scale: Scale, description: &'static str) -> SymptomSpec {
    let (min_rating, max_rating) = match scale {
        Scale::Madrs => (0, 6),
        _ => (1, 7),
    };
    SymptomSpec {
        code,
        scale,
        description,
        min_rating,
        max_rating,
        is_total: false,
    }
}

const fn total(code: &'static str, description: &'static str, min: i64, max: i64) -> SymptomSpec {
    SymptomSpec {
        code,
        scale: Scale::Panss,
        description,
        min_rating: min,
        max_rating: max,
        is_total: true,
    }
}

use Scale::*;

static SYMPTOMS: [SymptomSpec; 66] = [
    item("B1", Bprs, "Somatic concerns"),
    item("B2", Bprs, "Anxiety"),
    item("B3", Bprs, "Depression"),
    item("B4", Bprs, "Suicidality"),
    item("B5", Bprs, "Guilt"),
    item("B6", Bprs, "Hostility"),
    item("B7", Bprs, "Elated Mood"),
    item("B8", Bprs, "Grandiosity"),
    item("B9", Bprs, "Suspiciousness"),
    item("B10", Bprs, "Hallucinations"),
    item("B11", Bprs, "Unusual thought content"),
    item("B12", Bprs, "Bizarre behavior"),
    item("B13", Bprs, "Self-neglect"),
    item("B14", Bprs, "Disorientation"),
    item("B15", Bprs, "Conceptual disorganization"),
    item("B16", Bprs, "Blunted affect"),
    item("B17", Bprs, "Emotional withdrawal"),
    item("B18", Bprs, "Motor retardation"),
    item("B19", Bprs, "Tension"),
    item("B20", Bprs, "Uncooperativeness"),
    item("B21", Bprs, "Excitement"),
    item("B22", Bprs, "Distractability"),
    item("B23", Bprs, "Motor hyperactivity"),
    item("B24", Bprs, "Mannerisms and posturing"),
    item("M1", Madrs, "Apparent sadness"),
    item("M2", Madrs, "Reported sadness"),
    item("M3", Madrs, "Inner tension"),
    item("M4", Madrs, "Reduced sleep"),
    item("M5", Madrs, "Reduced appetite"),
    item("M6", Madrs, "Concentration difficulties"),
    item("M7", Madrs, "Lassitude"),
    item("M8", Madrs, "Inability to feel"),
    item("M9", Madrs, "Pessimistic thoughts"),
    item("M10", Madrs, "Suicidal thoughts"),
    item("P1", Panss, "Delusions"),
    item("P2", Panss, "Conceptual disorganization"),
    item("P3", Panss, "Hallucinatory behavior"),
    item("P4", Panss, "Excitement"),
    item("P5", Panss, "Grandiosity"),
    item("P6", Panss, "Suspiciousness/persecution"),
    item("P7", Panss, "Hostility"),
    item("N1", Panss, "Blunted affect"),
    item("N2", Panss, "Emotional withdrawal"),
    item("N3", Panss, "Poor rapport"),
    item("N4", Panss, "Passive/apathetic social withdrawal"),
    item("N5", Panss, "Difficulty in abstract thinking"),
    item("N6", Panss, "Lack of spontaneity/conversation flow"),
    item("N7", Panss, "Stereotyped thinking"),
    item("G1", Panss, "Somatic concern"),
    item("G2", Panss, "Anxiety"),
    item("G3", Panss, "Guilt feelings"),
    item("G4", Panss, "Tension"),
    item("G5", Panss, "Mannerisms and posturing"),
    item("G6", Panss, "Depression"),
    item("G7", Panss, "Motor retardation"),
    item("G8", Panss, "Uncooperativeness"),
    item("G9", Panss, "Unusual thought content"),
    item("G10", Panss, "Disorientation"),
    item("G11", Panss, "Poor attention"),
    item("G12", Panss, "Lack of judgment and insight"),
    item("G13", Panss, "Disturbance of volition"),
    item("G14", Panss, "Poor impulse control"),
    item("G15", Panss, "Preoccupation"),
    item("G16", Panss, "Active social avoidance"),
    // sums of the item ranges: G1–G16 for the general total, P1–P7 for the positive total
    total("P01", "General scale total", 16, 112),
    total("P02", "Positive scale total", 7, 49),
];

/// The 66-symptom registry.
#[derive(Debug, Clone, Copy)]
pub struct ScaleRegistry {
    symptoms: &'static [SymptomSpec],
}

impl Default for ScaleRegistry {
    fn default() -> Self {
        load_scale_registry()
    }
}

pub fn load_scale_registry() -> ScaleRegistry {
    ScaleRegistry {
        symptoms: &SYMPTOMS,
    }
}

impl ScaleRegistry {
    pub fn symptoms(&self) -> &'static [SymptomSpec] {
        self.symptoms
    }

    pub fn len(&self) -> usize {
        self.symptoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symptoms.is_empty()
    }

    /// Case-insensitive lookup by code.
    pub fn get(&self, code: &str) -> Option<&'static SymptomSpec> {
        let code = code.trim();
        self.symptoms.iter().find(|s| s.code.eq_ignore_ascii_case(code))
    }

    pub fn lookup(&self, code: &str) -> Result<&'static SymptomSpec> {
        self.get(code).ok_or_else(|| Error::UnknownSymptom {
            code: code.to_string(),
            line: None,
        })
    }

    pub fn of_scale(&self, scale: Scale) -> impl Iterator<Item = &'static SymptomSpec> {
        self.symptoms.iter().filter(move |s| s.scale == scale)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self.symptoms).expect("static registry serializes")
    }
}

/// Validated ratings keyed by `(speaker, symptom code)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RatingTable {
    ratings: BTreeMap<(String, String), i64>,
}

impl RatingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a rating after range and uniqueness checks. `line` is used only
    /// for error messages.
    pub fn insert(
        &mut self,
        registry: &ScaleRegistry,
        speaker: &str,
        code: &str,
        value: i64,
        line: usize,
    ) -> Result<()> {
        let spec = registry.get(code).ok_or_else(|| Error::UnknownSymptom {
            code: code.to_string(),
            line: Some(line),
        })?;
        validate_rating(spec, value).map_err(|v| Error::RatingOutOfRange {
            code: v.code,
            value,
            min: v.min,
            max: v.max,
            line,
        })?;
        let key = (speaker.to_string(), spec.code.to_string());
        if self.ratings.contains_key(&key) {
            return Err(Error::DuplicateRating {
                speaker: key.0,
                code: key.1,
            });
        }
        self.ratings.insert(key, value);
        Ok(())
    }

    pub fn get(&self, speaker: &str, code: &str) -> Option<i64> {
        self.ratings.get(&(speaker.to_string(), code.to_string())).copied()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn speakers(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.ratings.keys().map(|(s, _)| s.as_str()).collect();
        v.dedup();
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, i64)> {
        self.ratings.iter().map(|((s, c), &v)| (s.as_str(), c.as_str(), v))
    }

    /// Renders the table as `speaker_id,symptom_code,rating` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("speaker_id,symptom_code,rating\n");
        for (s, c, v) in self.iter() {
            out.push_str(&format!("{s},{c},{v}\n"));
        }
        out
    }
}

pub const RATINGS_HEADER: [&str; 3] = ["speaker_id", "symptom_code", "rating"];

pub fn load_ratings(path: &Path, registry: &ScaleRegistry) -> Result<RatingTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ratings(file, path, registry)
}

pub fn parse_ratings<R: Read>(input: R, path: &Path, registry: &ScaleRegistry) -> Result<RatingTable> {
    let mut rdr = csv::ReaderBuilder::new()
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
    if headers.iter().ne(RATINGS_HEADER) {
        return Err(Error::BadHeader {
            path: path.into(),
            expected: RATINGS_HEADER.join(","),
        });
    }
    let mut table = RatingTable::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| malformed(line, e.to_string()))?;
        if rec.len() != 3 {
            return Err(malformed(line, format!("expected 3 fields, got {}", rec.len())));
        }
        if rec[0].is_empty() {
            return Err(malformed(line, "empty speaker_id".into()));
        }
        let value: i64 = rec[2]
            .parse()
            .map_err(|_| malformed(line, format!("rating `{}` is not an integer", &rec[2])))?;
        table.insert(registry, &rec[0], &rec[1], value, line)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RatingTable> {
        parse_ratings(text.as_bytes(), Path::new("r.csv"), &load_scale_registry())
    }

    #[test]
    fn registry_partition() {
        let r = load_scale_registry();
        assert_eq!(r.len(), 66);
        assert_eq!(r.of_scale(Bprs).count(), 24);
        assert_eq!(r.of_scale(Madrs).count(), 10);
        assert_eq!(r.of_scale(Panss).count(), 32);
        let mut codes: Vec<_> = r.symptoms().iter().map(|s| s.code).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), 66);
    }

    #[test]
    fn lookups() {
        let r = load_scale_registry();
        let b6 = r.lookup("B6").unwrap();
        assert_eq!(b6.description, "Hostility");
        assert_eq!(b6.scale, Bprs);
        assert_eq!((b6.min_rating, b6.max_rating), (1, 7));
        let p02 = r.lookup("p02").unwrap();
        assert!(p02.is_total);
        assert_eq!(p02.scale, Panss);
        assert!(r.symptoms().iter().filter(|s| s.is_total).count() == 2);
        assert!(r.lookup("X9").is_err());
    }

    #[test]
    fn validation() {
        let r = load_scale_registry();
        assert!(validate_rating(r.lookup("B3").unwrap(), 6).is_ok());
        let v = validate_rating(r.lookup("M1").unwrap(), 7).unwrap_err();
        assert!(v.to_string().starts_with("M1 allows 0–6"));
        let v = validate_rating(r.lookup("P1").unwrap(), 0).unwrap_err();
        assert!(v.to_string().starts_with("P1 allows 1–7"));
        assert!(validate_rating(r.lookup("M1").unwrap(), 0).is_ok());
    }

    #[test]
    fn ingest_well_formed() {
        let t = parse("speaker_id,symptom_code,rating\nS01,B6,3\nS01,M4,4\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("S01", "B6"), Some(3));
        assert_eq!(t.speakers(), vec!["S01"]);
    }

    #[test]
    fn ingest_errors() {
        let e = parse("speaker_id,symptom_code,rating\nS01,B6,9\n").unwrap_err();
        assert_eq!(e.to_string(), "rating 9 out of range 1–7 for B6 at line 2");
        let e = parse("speaker_id,symptom_code,rating\nS01,B6,3\nS01,B6,4\n").unwrap_err();
        assert_eq!(e.to_string(), "duplicate rating for (S01, B6)");
        let e = parse("speaker_id,symptom_code,rating\nS01,ZZ,3\n").unwrap_err();
        assert!(matches!(e, Error::UnknownSymptom { line: Some(2), .. }));
        let e = parse("speaker_id,symptom_code,rating\nS01,B6,3.5\n").unwrap_err();
        assert!(matches!(e, Error::MalformedRow { line: 2, .. }));
        let e = parse("speaker_id,symptom_code,rating\nS01,B6\n").unwrap_err();
        assert!(matches!(e, Error::MalformedRow { .. }));
        assert!(matches!(parse("a,b,c\n"), Err(Error::BadHeader { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let t = parse("speaker_id,symptom_code,rating\nS02,P01,44\nS01,M1,0\n").unwrap();
        assert_eq!(parse(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn registry_json_has_ranges() {
        let v: serde_json::Value = serde_json::from_str(&load_scale_registry().to_json()).unwrap();
        let m1 = &v.as_array().unwrap()[24];
        assert_eq!(m1["code"], "M1");
        assert_eq!(m1["scale"], "MADRS");
        assert_eq!(m1["min"], 0);
        assert_eq!(m1["max"], 6);
    }
}
