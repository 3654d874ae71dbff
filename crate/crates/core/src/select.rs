//! Threshold-based phoneme selection and articulatory-category aggregation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{PairResult, SpeakerMean, Status};
use crate::phonetics::{members_of, Axis, Category};
use crate::stats::correlation_stats;

pub const DEFAULT_R_THRESHOLD: f64 = 0.2;
pub const DEFAULT_P_SELECT: f64 = 0.001;
pub const DEFAULT_P_CATEGORY: f64 = 0.0001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub r: f64,
    pub p_select: f64,
    pub p_category: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            r: DEFAULT_R_THRESHOLD,
            p_select: DEFAULT_P_SELECT,
            p_category: DEFAULT_P_CATEGORY,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64, range: &str| Err(Error::InvalidConfig(format!("{what} = {v} outside {range}")));
        if !(self.r > 0.0 && self.r <= 1.0) {
            return bad("r threshold", self.r, "(0, 1]");
        }
        for (name, p) in [("p-select", self.p_select), ("p-category", self.p_category)] {
            if !(p > 0.0 && p < 1.0) {
                return bad(name, p, "(0, 1)");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedPhoneme {
    pub phoneme: String,
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

/// Phonemes passing both gates, by r descending then label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub symptom: String,
    pub r_threshold: f64,
    pub p_threshold: f64,
    pub selected: Vec<SelectedPhoneme>,
}

impl Selection {
    pub fn labels(&self) -> Vec<&str> {
        self.selected.iter().map(|s| s.phoneme.as_str()).collect()
    }

    pub fn contains(&self, phoneme: &str) -> bool {
        self.selected.iter().any(|s| s.phoneme == phoneme)
    }
}

fn passes(r: &PairResult, r_threshold: f64, p_threshold: f64) -> Option<(f64, f64)> {
    match (r.status, r.r, r.p) {
        (Status::Evaluated, Some(rv), Some(pv)) if rv > r_threshold && pv <= p_threshold => Some((rv, pv)),
        _ => None,
    }
}

fn single_symptom(results: &[PairResult]) -> Result<&str> {
    let first = results.first().ok_or(Error::EmptyDataset)?;
    if let Some(other) = results.iter().find(|r| r.symptom != first.symptom) {
        return Err(Error::MixedSymptoms(first.symptom.clone(), other.symptom.clone()));
    }
    Ok(&first.symptom)
}

/// Keeps evaluated results with `r > r_threshold` and `p <= p_threshold`.
pub fn select_phonemes(results: &[PairResult], r_threshold: f64, p_threshold: f64) -> Result<Selection> {
    let symptom = single_symptom(results)?.to_string();
    let mut selected: Vec<SelectedPhoneme> = results
        .iter()
        .filter_map(|res| {
            passes(res, r_threshold, p_threshold).map(|(r, p)| SelectedPhoneme {
                phoneme: res.phoneme.clone(),
                r,
                p,
                n: res.n,
            })
        })
        .collect();
    selected.sort_by(|a, b| b.r.total_cmp(&a.r).then_with(|| a.phoneme.cmp(&b.phoneme)));
    Ok(Selection {
        symptom,
        r_threshold,
        p_threshold,
        selected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub axis: Axis,
    pub category: String,
    /// Member phonemes that passed the category gate.
    pub members: Vec<String>,
    pub r: f64,
    pub p: f64,
    pub n_speakers: usize,
}

/// Per-speaker mean of the member phonemes' mean predictions, correlated
/// with the speakers' ratings.
///
/// `means` holds one symptom's speaker means for any phonemes; only those of
/// `passing` members are used.
pub fn aggregate_category(
    means: &[SpeakerMean],
    category: Category,
    passing: &BTreeSet<String>,
) -> Result<CategoryScore> {
    let members: Vec<String> = members_of(category)
        .into_iter()
        .filter(|m| passing.contains(*m))
        .map(str::to_string)
        .collect();
    if members.is_empty() {
        return Err(Error::CategoryNotDominant(category.name().to_string()));
    }
    let mut per_speaker: BTreeMap<&str, (f64, usize, i64)> = BTreeMap::new();
    for m in means.iter().filter(|m| members.contains(&m.phoneme)) {
        let e = per_speaker.entry(&m.speaker_id).or_insert((0.0, 0, m.rating));
        e.0 += m.mean_prediction;
        e.1 += 1;
    }
    if per_speaker.len() < 3 {
        return Err(Error::TooFewSpeakers(per_speaker.len()));
    }
    let (pred, truth): (Vec<f64>, Vec<f64>) = per_speaker
        .values()
        .map(|&(sum, k, rating)| (sum / k as f64, rating as f64))
        .unzip();
    let stats = correlation_stats(&pred, &truth)?;
    Ok(CategoryScore {
        axis: category.axis(),
        category: category.name().to_string(),
        members,
        r: stats.r,
        p: stats.p,
        n_speakers: stats.n,
    })
}

/// Every category on every axis with at least one passing member, by
/// aggregate r descending then name. Categories whose aggregate cannot be
/// formed (too few speakers, no variance) are left out.
pub fn rank_categories(means: &[SpeakerMean], passing: &BTreeSet<String>) -> BTreeMap<Axis, Vec<CategoryScore>> {
    Axis::ALL
        .iter()
        .map(|&axis| {
            let mut scores: Vec<CategoryScore> = axis
                .categories()
                .into_iter()
                .filter_map(|c| aggregate_category(means, c, passing).ok())
                .collect();
            scores.sort_by(|a, b| b.r.total_cmp(&a.r).then_with(|| a.category.cmp(&b.category)));
            (axis, scores)
        })
        .collect()
}

/// Selections at both thresholds plus category rankings for one symptom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub symptom: String,
    pub thresholds: Thresholds,
    pub selected: Vec<SelectedPhoneme>,
    pub selected_strict: Vec<SelectedPhoneme>,
    pub category_rankings: BTreeMap<Axis, Vec<CategoryScore>>,
}

/// Builds the selection report of one symptom. `means` may contain other
/// symptoms' rows; they are ignored.
pub fn select_symptom(
    symptom: &str,
    results: &[PairResult],
    means: &[SpeakerMean],
    thresholds: &Thresholds,
) -> Result<SelectionReport> {
    let own: Vec<PairResult> = results.iter().filter(|r| r.symptom == symptom).cloned().collect();
    let (selected, strict) = if own.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        (
            select_phonemes(&own, thresholds.r, thresholds.p_select)?.selected,
            select_phonemes(&own, thresholds.r, thresholds.p_category)?.selected,
        )
    };
    let passing: BTreeSet<String> = strict.iter().map(|s| s.phoneme.clone()).collect();
    let own_means: Vec<SpeakerMean> = means.iter().filter(|m| m.symptom == symptom).cloned().collect();
    Ok(SelectionReport {
        symptom: symptom.to_string(),
        thresholds: *thresholds,
        selected,
        selected_strict: strict,
        category_rankings: rank_categories(&own_means, &passing),
    })
}

/// Selection reports for every symptom present in `results`, in code order
/// of first appearance after sorting by symptom.
pub fn select_all(results: &[PairResult], means: &[SpeakerMean], thresholds: &Thresholds) -> Result<Vec<SelectionReport>> {
    let symptoms: BTreeSet<&str> = results.iter().map(|r| r.symptom.as_str()).collect();
    symptoms
        .into_iter()
        .map(|s| select_symptom(s, results, means, thresholds))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phonetics::Place;

    fn pr(phoneme: &str, r: f64, p: f64) -> PairResult {
        PairResult {
            symptom: "B6".into(),
            phoneme: phoneme.into(),
            n: 100,
            r: Some(r),
            p: Some(p),
            per_speaker_r: None,
            status: Status::Evaluated,
        }
    }

    #[test]
    fn gates() {
        assert!(select_phonemes(&[pr("F", 0.25, 0.0005)], 0.2, 0.001).unwrap().contains("F"));
        assert!(!select_phonemes(&[pr("F", 0.25, 0.002)], 0.2, 0.001).unwrap().contains("F"));
        assert!(!select_phonemes(&[pr("F", 0.15, 1e-6)], 0.2, 0.001).unwrap().contains("F"));
        assert!(!select_phonemes(&[pr("F", 0.2, 1e-6)], 0.2, 0.001).unwrap().contains("F"));
        assert!(select_phonemes(&[pr("F", 0.3, 0.001)], 0.2, 0.001).unwrap().contains("F"));
    }

    #[test]
    fn non_evaluated_never_selected() {
        let mut r = pr("F", 0.9, 1e-9);
        r.status = Status::Degenerate;
        assert!(select_phonemes(&[r], 0.2, 0.001).unwrap().selected.is_empty());
    }

    #[test]
    fn sorted_by_r_then_label() {
        let s = select_phonemes(&[pr("V", 0.4, 1e-5), pr("F", 0.4, 1e-5), pr("S", 0.6, 1e-5)], 0.2, 0.001).unwrap();
        assert_eq!(s.labels(), ["S", "F", "V"]);
    }

    #[test]
    fn mixed_symptoms_rejected() {
        let mut other = pr("F", 0.3, 0.0);
        other.symptom = "B7".into();
        assert!(matches!(
            select_phonemes(&[pr("F", 0.3, 0.0), other], 0.2, 0.001),
            Err(Error::MixedSymptoms(..))
        ));
    }

    fn sm(speaker: &str, phoneme: &str, pred: f64, rating: i64) -> SpeakerMean {
        SpeakerMean {
            symptom: "B6".into(),
            phoneme: phoneme.into(),
            speaker_id: speaker.into(),
            n: 10,
            mean_prediction: pred,
            rating,
        }
    }

    fn labiodental() -> Category {
        Category::Place(Place::Labiodental)
    }

    #[test]
    fn category_averages_members() {
        let means = vec![
            sm("S01", "F", 4.0, 4),
            sm("S01", "V", 5.0, 4),
            sm("S02", "F", 2.0, 2),
            sm("S02", "V", 2.0, 2),
            sm("S03", "F", 6.0, 7),
            sm("S03", "V", 7.0, 7),
            sm("S03", "S", 1.0, 7),
        ];
        let passing: BTreeSet<String> = ["F", "V", "S"].iter().map(|s| s.to_string()).collect();
        let score = aggregate_category(&means, labiodental(), &passing).unwrap();
        assert_eq!(score.members, ["F", "V"]);
        let expected = correlation_stats(&[4.5, 2.0, 6.5], &[4.0, 2.0, 7.0]).unwrap();
        assert_eq!(score.r, expected.r);
        assert_eq!(score.n_speakers, 3);

        let only_f: BTreeSet<String> = ["F".to_string()].into();
        let single = aggregate_category(&means, labiodental(), &only_f).unwrap();
        let f_only = correlation_stats(&[4.0, 2.0, 6.0], &[4.0, 2.0, 7.0]).unwrap();
        assert_eq!(single.r, f_only.r);
    }

    #[test]
    fn no_passing_member_is_not_dominant() {
        let e = aggregate_category(&[], labiodental(), &BTreeSet::new()).unwrap_err();
        assert_eq!(e.to_string(), "category not dominant: labiodental");
    }

    #[test]
    fn thresholds_validation() {
        assert!(Thresholds::default().validate().is_ok());
        let bad = Thresholds {
            p_select: 1.0,
            ..Thresholds::default()
        };
        assert!(bad.validate().is_err());
        let bad_r = Thresholds {
            r: 0.0,
            ..Thresholds::default()
        };
        assert!(bad_r.validate().is_err());
    }
}
