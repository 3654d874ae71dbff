//! Phoneme inventory and articulatory classification.
//!
//! 24 ARPAbet consonants classified by voicing, manner and place, 10 filler
//! sounds, and 16 vowel labels that carry no classification. Vowels are kept
//! in the registry so segmentations containing them parse, but default
//! analysis runs leave them out.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Consonant,
    Vowel,
    Filler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Voicing {
    Voiced,
    Unvoiced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Manner {
    Plosive,
    Fricative,
    Affricate,
    Nasal,
    Liquid,
    Glide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Place {
    Bilabial,
    Labiodental,
    Interdental,
    Alveolar,
    Palatal,
    Velar,
    Glottal,
}

impl Voicing {
    pub const ALL: [Voicing; 2] = [Voicing::Voiced, Voicing::Unvoiced];
    pub fn name(self) -> &'static str {
        match self {
            Voicing::Voiced => "voiced",
            Voicing::Unvoiced => "unvoiced",
        }
    }
}

impl Manner {
    pub const ALL: [Manner; 6] = [
        Manner::Plosive,
        Manner::Fricative,
        Manner::Affricate,
        Manner::Nasal,
        Manner::Liquid,
        Manner::Glide,
    ];
    pub fn name(self) -> &'static str {
        match self {
            Manner::Plosive => "plosive",
            Manner::Fricative => "fricative",
            Manner::Affricate => "affricate",
            Manner::Nasal => "nasal",
            Manner::Liquid => "liquid",
            Manner::Glide => "glide",
        }
    }
}

impl Place {
    pub const ALL: [Place; 7] = [
        Place::Bilabial,
        Place::Labiodental,
        Place::Interdental,
        Place::Alveolar,
        Place::Palatal,
        Place::Velar,
        Place::Glottal,
    ];
    pub fn name(self) -> &'static str {
        match self {
            Place::Bilabial => "bilabial",
            Place::Labiodental => "labiodental",
            Place::Interdental => "interdental",
            Place::Alveolar => "alveolar",
            Place::Palatal => "palatal",
            Place::Velar => "velar",
            Place::Glottal => "glottal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Voicing,
    Manner,
    Place,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Voicing, Axis::Manner, Axis::Place];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Voicing => "voicing",
            Axis::Manner => "manner",
            Axis::Place => "place",
        }
    }

    pub fn categories(self) -> Vec<Category> {
        match self {
            Axis::Voicing => Voicing::ALL.iter().map(|&v| Category::Voicing(v)).collect(),
            Axis::Manner => Manner::ALL.iter().map(|&v| Category::Manner(v)).collect(),
            Axis::Place => Place::ALL.iter().map(|&v| Category::Place(v)).collect(),
        }
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownCategory {
                axis: s.to_string(),
                value: String::new(),
            })
    }
}

/// A value on one articulatory axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Voicing(Voicing),
    Manner(Manner),
    Place(Place),
}

impl Category {
    pub fn axis(self) -> Axis {
        match self {
            Category::Voicing(_) => Axis::Voicing,
            Category::Manner(_) => Axis::Manner,
            Category::Place(_) => Axis::Place,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Voicing(v) => v.name(),
            Category::Manner(m) => m.name(),
            Category::Place(p) => p.name(),
        }
    }

    pub fn parse(axis: Axis, value: &str) -> Result<Self> {
        axis.categories()
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(value))
            .ok_or_else(|| Error::UnknownCategory {
                axis: axis.name().to_string(),
                value: value.to_string(),
            })
    }

    fn matches(self, class: &PhonemeClass) -> bool {
        match (self, class.articulation) {
            (_, None) => false,
            (Category::Voicing(v), Some(a)) => a.voicing == v,
            (Category::Manner(m), Some(a)) => a.manner == m,
            (Category::Place(p), Some(a)) => a.place == p,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Articulation {
    pub voicing: Voicing,
    pub manner: Manner,
    pub place: Place,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PhonemeClass {
    pub label: &'static str,
    pub kind: Kind,
    /// Set for consonants only.
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub articulation: Option<Articulation>,
}

impl PhonemeClass {
    pub fn is_consonant(&self) -> bool {
        self.kind == Kind::Consonant
    }

    /// Chart key `{manner}|{place}|{voicing}`; consonants only.
    pub fn chart_key(&self) -> Option<String> {
        self.articulation
            .map(|a| format!("{}|{}|{}", a.manner.name(), a.place.name(), a.voicing.name()))
    }
}

const fn consonant(label: &'static str, voicing: Voicing, manner: Manner, place: Place) -> PhonemeClass {
    PhonemeClass {
        label,
        kind: Kind::Consonant,
        articulation: Some(Articulation {
            voicing,
            manner,
            place,
        }),
    }
}

const fn other(label: &'static str, kind: Kind) -> PhonemeClass {
    PhonemeClass {
        label,
        kind,
        articulation: None,
    }
}

use Manner::*;
use Place::*;
use Voicing::*;

static REGISTRY: [PhonemeClass; 50] = [
    consonant("B", Voiced, Plosive, Bilabial),
    consonant("CH", Unvoiced, Affricate, Palatal),
    consonant("D", Voiced, Plosive, Alveolar),
    consonant("DH", Voiced, Fricative, Interdental),
    consonant("F", Unvoiced, Fricative, Labiodental),
    consonant("G", Voiced, Plosive, Velar),
    consonant("HH", Unvoiced, Fricative, Glottal),
    consonant("JH", Voiced, Affricate, Palatal),
    consonant("K", Unvoiced, Plosive, Velar),
    consonant("L", Voiced, Liquid, Alveolar),
    consonant("M", Voiced, Nasal, Bilabial),
    consonant("N", Voiced, Nasal, Alveolar),
    consonant("NG", Voiced, Nasal, Velar),
    consonant("P", Unvoiced, Plosive, Bilabial),
    consonant("R", Voiced, Liquid, Alveolar),
    consonant("S", Unvoiced, Fricative, Alveolar),
    consonant("SH", Unvoiced, Fricative, Palatal),
    consonant("T", Unvoiced, Plosive, Alveolar),
    consonant("TH", Unvoiced, Fricative, Interdental),
    consonant("V", Voiced, Fricative, Labiodental),
    consonant("W", Voiced, Glide, Bilabial),
    consonant("Y", Voiced, Glide, Palatal),
    consonant("Z", Voiced, Fricative, Alveolar),
    consonant("ZH", Voiced, Fricative, Palatal),
    other("BR", Kind::Filler),
    other("UH", Kind::Filler),
    other("UM", Kind::Filler),
    other("COUGH", Kind::Filler),
    other("THROATCLEAR", Kind::Filler),
    other("LAUGH", Kind::Filler),
    other("SIGH", Kind::Filler),
    other("SMACK", Kind::Filler),
    other("NOISE", Kind::Filler),
    other("SIL", Kind::Filler),
    other("AA", Kind::Vowel),
    other("AE", Kind::Vowel),
    other("AH", Kind::Vowel),
    other("AO", Kind::Vowel),
    other("AW", Kind::Vowel),
    other("AX", Kind::Vowel),
    other("AXR", Kind::Vowel),
    other("AY", Kind::Vowel),
    other("EH", Kind::Vowel),
    other("ER", Kind::Vowel),
    other("EY", Kind::Vowel),
    other("IH", Kind::Vowel),
    other("IY", Kind::Vowel),
    other("OW", Kind::Vowel),
    other("OY", Kind::Vowel),
    other("UW", Kind::Vowel),
];

/// Every registry entry, consonants first, then fillers, then vowels.
pub fn registry() -> &'static [PhonemeClass] {
    &REGISTRY
}

pub fn classify_phoneme(label: &str) -> Result<&'static PhonemeClass> {
    REGISTRY
        .iter()
        .find(|c| c.label.eq_ignore_ascii_case(label.trim()))
        .ok_or_else(|| Error::UnknownPhoneme(label.to_string()))
}

pub fn labels_of(kind: Kind) -> Vec<&'static str> {
    REGISTRY.iter().filter(|c| c.kind == kind).map(|c| c.label).collect()
}

pub fn consonants() -> Vec<&'static str> {
    labels_of(Kind::Consonant)
}

pub fn fillers() -> Vec<&'static str> {
    labels_of(Kind::Filler)
}

/// Consonants followed by fillers: the default analysis set.
pub fn default_analysis_set() -> Vec<&'static str> {
    let mut v = consonants();
    v.extend(fillers());
    v
}

pub fn members_of(category: Category) -> Vec<&'static str> {
    REGISTRY
        .iter()
        .filter(|c| category.matches(c))
        .map(|c| c.label)
        .collect()
}

/// Consonants in the named category, e.g. `("place", "labiodental")`.
pub fn members_of_category(axis: &str, value: &str) -> Result<Vec<&'static str>> {
    let unknown = || Error::UnknownCategory {
        axis: axis.to_string(),
        value: value.to_string(),
    };
    let axis: Axis = axis.parse().map_err(|_| unknown())?;
    Ok(members_of(Category::parse(axis, value).map_err(|_| unknown())?))
}

/// Registry as pretty JSON.
pub fn registry_json() -> String {
    serde_json::to_string_pretty(&REGISTRY[..]).expect("static registry serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn inventory_counts() {
        assert_eq!(registry().len(), 50);
        assert_eq!(consonants().len(), 24);
        assert_eq!(fillers().len(), 10);
        assert_eq!(labels_of(Kind::Vowel).len(), 16);
        let unique: BTreeSet<_> = registry().iter().map(|c| c.label).collect();
        assert_eq!(unique.len(), 50);
    }

    #[test]
    fn classify_examples() {
        let f = classify_phoneme("F").unwrap();
        assert_eq!(
            f.articulation,
            Some(Articulation {
                voicing: Unvoiced,
                manner: Fricative,
                place: Labiodental
            })
        );
        let um = classify_phoneme("um").unwrap();
        assert_eq!(um.kind, Kind::Filler);
        assert!(um.articulation.is_none());
        assert_eq!(
            classify_phoneme("QX").unwrap_err().to_string(),
            "unknown phoneme label: QX"
        );
    }

    #[test]
    fn category_examples() {
        assert_eq!(members_of_category("place", "labiodental").unwrap(), vec!["F", "V"]);
        assert_eq!(members_of_category("manner", "affricate").unwrap(), vec!["CH", "JH"]);
        let e = members_of_category("place", "dorsal").unwrap_err();
        assert!(e.to_string().starts_with("unknown category"));
        assert!(members_of_category("height", "high").is_err());
    }

    #[test]
    fn voicing_sets() {
        let voiced: BTreeSet<_> = members_of(Category::Voicing(Voiced)).into_iter().collect();
        let expect: BTreeSet<_> = "B D G V DH Z ZH JH M N NG L R W Y".split(' ').collect();
        assert_eq!(voiced, expect);
        let unvoiced: BTreeSet<_> = members_of(Category::Voicing(Unvoiced)).into_iter().collect();
        let expect: BTreeSet<_> = "P T K F TH S SH CH HH".split(' ').collect();
        assert_eq!(unvoiced, expect);
    }

    #[test]
    fn each_axis_partitions_the_consonants() {
        let all: BTreeSet<_> = consonants().into_iter().collect();
        for axis in Axis::ALL {
            let mut seen = BTreeSet::new();
            for cat in axis.categories() {
                for m in members_of(cat) {
                    assert!(seen.insert(m), "{m} in two {axis:?} classes");
                }
            }
            assert_eq!(seen, all);
        }
    }

    #[test]
    fn non_consonants_have_no_articulation() {
        for c in registry() {
            assert_eq!(c.articulation.is_some(), c.kind == Kind::Consonant);
        }
    }

    #[test]
    fn json_dump_lists_every_label() {
        let v: serde_json::Value = serde_json::from_str(&registry_json()).unwrap();
        let arr = v.as_array().unwrap();
        assert_eq!(arr.len(), 50);
        assert_eq!(arr[4]["label"], "F");
        assert_eq!(arr[4]["place"], "labiodental");
    }
}
