use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::model::{ActionUnit, AuSet, AU_COUNT};

/// Facial area categories used to group dictionary entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Cheeks,
    Eyebrows,
    Eyelids,
    Lips,
    ChinAndNose,
    Mouth,
    Horizontal,
    Oblique,
    Orbital,
}

impl Region {
    pub const ALL: [Region; 9] = [
        Region::Cheeks,
        Region::Eyebrows,
        Region::Eyelids,
        Region::Lips,
        Region::ChinAndNose,
        Region::Mouth,
        Region::Horizontal,
        Region::Oblique,
        Region::Orbital,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Region::Cheeks => "cheeks",
            Region::Eyebrows => "eyebrows",
            Region::Eyelids => "eyelids",
            Region::Lips => "lips",
            Region::ChinAndNose => "chin-and-nose",
            Region::Mouth => "mouth",
            Region::Horizontal => "horizontal",
            Region::Oblique => "oblique",
            Region::Orbital => "orbital",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Region {
    type Err = DictionaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '_'], "-");
        Region::ALL
            .into_iter()
            .find(|r| r.label() == norm)
            .ok_or_else(|| DictionaryError::UnknownRegion(s.to_string()))
    }
}

impl serde::Serialize for Region {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DictionaryError {
    #[error("cannot read dictionary: {0}")]
    Io(String),
    #[error("malformed dictionary: {0}")]
    Parse(String),
    #[error("unknown action unit code {0}")]
    UnknownAu(u32),
    #[error("action unit {0} listed twice")]
    DuplicateAu(u32),
    #[error("dictionary lacks entries for action units {0:?}")]
    Missing(Vec<u8>),
    #[error("unknown region {0:?}")]
    UnknownRegion(String),
    #[error("AU{au}: field {field} is empty")]
    EmptyField { au: u32, field: &'static str },
    #[error("combination entry {0} needs at least two action units")]
    BadCombination(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionaryEntry {
    pub au: ActionUnit,
    pub region: Region,
    pub description: String,
    pub prescribe_pos: String,
    pub prescribe_neg: String,
}

/// Reserved multi-unit phrasing; validated on load, not rendered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinationEntry {
    pub aus: AuSet,
    pub region: Region,
    pub description: String,
}

/// Per-AU descriptions and prescriptions, total over the 20-unit catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuDictionary {
    entries: Vec<DictionaryEntry>,
    /// Region precedence: order of first appearance in the source file.
    region_order: Vec<Region>,
    combinations: Vec<CombinationEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    entry: Vec<RawEntry>,
    #[serde(default)]
    combination: Vec<RawCombination>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    au: u32,
    region: String,
    description: String,
    prescribe_pos: String,
    prescribe_neg: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCombination {
    aus: Vec<u32>,
    region: String,
    description: String,
}

const BUILTIN: &str = include_str!("../../data/au_dictionary.toml");

impl AuDictionary {
    /// The dictionary shipped with the crate.
    pub fn builtin() -> AuDictionary {
        Self::parse(BUILTIN).expect("bundled dictionary is valid")
    }

    pub fn builtin_source() -> &'static str {
        BUILTIN
    }

    pub fn load(path: &Path) -> Result<AuDictionary, DictionaryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DictionaryError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<AuDictionary, DictionaryError> {
        let raw: RawFile =
            toml::from_str(text).map_err(|e| DictionaryError::Parse(e.to_string()))?;
        let mut slots: [Option<DictionaryEntry>; AU_COUNT] = Default::default();
        let mut region_order = Vec::new();
        for e in raw.entry {
            let au = ActionUnit::from_code(e.au).map_err(|_| DictionaryError::UnknownAu(e.au))?;
            let region: Region = e.region.parse()?;
            for (field, value) in [
                ("description", &e.description),
                ("prescribe_pos", &e.prescribe_pos),
                ("prescribe_neg", &e.prescribe_neg),
            ] {
                if value.trim().is_empty() {
                    return Err(DictionaryError::EmptyField { au: e.au, field });
                }
            }
            if slots[au.index()].is_some() {
                return Err(DictionaryError::DuplicateAu(e.au));
            }
            if !region_order.contains(&region) {
                region_order.push(region);
            }
            slots[au.index()] = Some(DictionaryEntry {
                au,
                region,
                description: e.description,
                prescribe_pos: e.prescribe_pos,
                prescribe_neg: e.prescribe_neg,
            });
        }
        let missing: Vec<u8> = ActionUnit::ALL
            .iter()
            .filter(|au| slots[au.index()].is_none())
            .map(|au| au.code())
            .collect();
        if !missing.is_empty() {
            return Err(DictionaryError::Missing(missing));
        }
        let mut combinations = Vec::with_capacity(raw.combination.len());
        for (i, c) in raw.combination.into_iter().enumerate() {
            let aus = AuSet::from_codes(c.aus.iter().copied())
                .map_err(|_| DictionaryError::BadCombination(i))?;
            if aus.len() < 2 || c.description.trim().is_empty() {
                return Err(DictionaryError::BadCombination(i));
            }
            combinations.push(CombinationEntry {
                aus,
                region: c.region.parse()?,
                description: c.description,
            });
        }
        Ok(AuDictionary {
            entries: slots
                .into_iter()
                .map(|e| e.expect("checked total"))
                .collect(),
            region_order,
            combinations,
        })
    }

    pub fn entry(&self, au: ActionUnit) -> &DictionaryEntry {
        &self.entries[au.index()]
    }

    pub fn region_order(&self) -> &[Region] {
        &self.region_order
    }

    pub fn combinations(&self) -> &[CombinationEntry] {
        &self.combinations
    }

    /// Sort key: region precedence, then AU code.
    pub fn rank(&self, au: ActionUnit) -> (usize, u8) {
        let region = self.entry(au).region;
        let pos = self
            .region_order
            .iter()
            .position(|r| *r == region)
            .expect("every entry region is recorded");
        (pos, au.code())
    }

    /// Members of `set` in presentation order.
    pub fn ordered(&self, set: AuSet) -> Vec<ActionUnit> {
        let mut aus: Vec<ActionUnit> = set.iter().collect();
        aus.sort_by_key(|au| self.rank(*au));
        aus
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_is_total_and_uses_nine_regions() {
        let d = AuDictionary::builtin();
        for au in ActionUnit::ALL {
            let e = d.entry(au);
            assert_eq!(e.au, au);
            assert!(!e.description.is_empty());
        }
        let mut regions = d.region_order().to_vec();
        regions.sort();
        assert_eq!(regions, Region::ALL.to_vec());
    }

    #[test]
    fn brow_lowerer_strings() {
        let e = AuDictionary::builtin()
            .entry(ActionUnit::BrowLowerer)
            .clone();
        assert_eq!(e.region, Region::Eyebrows);
        assert_eq!(e.description, "eyebrows are lowered.");
        assert_eq!(e.prescribe_pos, "lower your eyebrows.");
        assert_eq!(e.prescribe_neg, "do not lower your eyebrows.");
    }

    fn drop_entry(code: u32) -> String {
        let marker = format!("au = {code}\n");
        AuDictionary::builtin_source()
            .split("[[entry]]")
            .filter(|chunk| !chunk.contains(&marker))
            .collect::<Vec<_>>()
            .join("[[entry]]")
    }

    #[test]
    fn missing_entry_is_rejected() {
        assert_eq!(
            AuDictionary::parse(&drop_entry(43)),
            Err(DictionaryError::Missing(vec![43]))
        );
    }

    #[test]
    fn unknown_region_is_rejected() {
        let text = AuDictionary::builtin_source().replacen(
            "region = \"cheeks\"",
            "region = \"forehead\"",
            1,
        );
        assert_eq!(
            AuDictionary::parse(&text),
            Err(DictionaryError::UnknownRegion("forehead".into()))
        );
    }

    #[test]
    fn duplicate_and_unknown_codes_are_rejected() {
        let extra = "\n[[entry]]\nau = 4\nregion = \"eyebrows\"\ndescription = \"x\"\nprescribe_pos = \"y\"\nprescribe_neg = \"z\"\n";
        let text = format!("{}{extra}", AuDictionary::builtin_source());
        assert_eq!(
            AuDictionary::parse(&text),
            Err(DictionaryError::DuplicateAu(4))
        );
        let text = format!(
            "{}{}",
            AuDictionary::builtin_source(),
            extra.replace("au = 4", "au = 3")
        );
        assert_eq!(
            AuDictionary::parse(&text),
            Err(DictionaryError::UnknownAu(3))
        );
    }

    #[test]
    fn empty_text_is_rejected() {
        let text = AuDictionary::builtin_source().replacen(
            "description = \"the cheeks are raised.\"",
            "description = \"  \"",
            1,
        );
        assert_eq!(
            AuDictionary::parse(&text),
            Err(DictionaryError::EmptyField {
                au: 6,
                field: "description"
            })
        );
    }

    #[test]
    fn combinations_are_parsed_but_validated() {
        let ok = format!(
            "{}\n[[combination]]\naus = [6, 12]\nregion = \"cheeks\"\ndescription = \"a smile.\"\n",
            AuDictionary::builtin_source()
        );
        let d = AuDictionary::parse(&ok).unwrap();
        assert_eq!(d.combinations().len(), 1);
        assert_eq!(d.combinations()[0].aus.codes(), vec![6, 12]);
        let bad = ok.replace("aus = [6, 12]", "aus = [6]");
        assert_eq!(
            AuDictionary::parse(&bad),
            Err(DictionaryError::BadCombination(0))
        );
    }

    #[test]
    fn region_parsing_accepts_spaced_form() {
        assert_eq!(
            "chin and nose".parse::<Region>().unwrap(),
            Region::ChinAndNose
        );
    }
}
