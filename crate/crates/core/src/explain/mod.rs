//! Scoring and explanation of an imitation attempt.
//!
//! The score of player set `P` against target set `T` is the Jaccard index
//! `|P ∩ T| / |P ∪ T|`. Mistakes come in two polarities: units in `T - P`
//! are missing and produce an "add" prescription, units in `P - T` are
//! spurious and produce a "remove" prescription.

mod dictionary;

pub use dictionary::{AuDictionary, CombinationEntry, DictionaryEntry, DictionaryError, Region};

use serde::Serialize;

use crate::model::{ActionUnit, AuSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExplainError {
    #[error("score undefined: both action unit sets are empty")]
    EmptyUniverse,
}

/// Jaccard overlap of the player and target sets.
pub fn score(player: AuSet, target: AuSet) -> Result<f64, ExplainError> {
    let union = player.union(target).len();
    if union == 0 {
        return Err(ExplainError::EmptyUniverse);
    }
    Ok(player.intersection(target).len() as f64 / union as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AuDiff {
    /// `P ∩ T`
    pub correct: AuSet,
    /// `P - T`: shown by the player but absent from the target.
    pub spurious: AuSet,
    /// `T - P`: required by the target but not shown.
    pub missing: AuSet,
}

pub fn diff(player: AuSet, target: AuSet) -> AuDiff {
    AuDiff {
        correct: player.intersection(target),
        spurious: player.difference(target),
        missing: target.difference(player),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Add,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Prescription {
    pub au: ActionUnit,
    pub polarity: Polarity,
    pub text: String,
    pub region: Region,
}

/// One prescription per unit of the symmetric difference, ordered by the
/// dictionary's region precedence and then by AU code.
pub fn prescribe(player: AuSet, target: AuSet, dict: &AuDictionary) -> Vec<Prescription> {
    let d = diff(player, target);
    dict.ordered(d.spurious.union(d.missing))
        .into_iter()
        .map(|au| {
            let entry = dict.entry(au);
            let (polarity, text) = if d.missing.contains(au) {
                (Polarity::Add, &entry.prescribe_pos)
            } else {
                (Polarity::Remove, &entry.prescribe_neg)
            };
            Prescription {
                au,
                polarity,
                text: text.clone(),
                region: entry.region,
            }
        })
        .collect()
}

/// Natural-language description of what a set of units looks like.
pub fn describe(set: AuSet, dict: &AuDictionary) -> Vec<String> {
    dict.ordered(set)
        .into_iter()
        .map(|au| dict.entry(au).description.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(codes: &[u32]) -> AuSet {
        AuSet::from_codes(codes.iter().copied()).unwrap()
    }

    #[test]
    fn score_examples() {
        assert_eq!(score(set(&[12]), set(&[12])).unwrap(), 1.0);
        assert_eq!(score(set(&[]), set(&[4])).unwrap(), 0.0);
        assert_eq!(score(set(&[12, 25]), set(&[12, 6, 25])).unwrap(), 2.0 / 3.0);
        assert_eq!(score(set(&[]), set(&[])), Err(ExplainError::EmptyUniverse));
    }

    #[test]
    fn diff_examples() {
        let d = diff(set(&[6, 12]), set(&[6, 12]));
        assert_eq!(
            (d.correct, d.spurious, d.missing),
            (set(&[6, 12]), set(&[]), set(&[]))
        );
        assert_eq!(diff(set(&[4]), set(&[])).spurious, set(&[4]));
        let d = diff(set(&[4, 12]), set(&[12, 25]));
        assert_eq!(d.correct, set(&[12]));
        assert_eq!(d.spurious, set(&[4]));
        assert_eq!(d.missing, set(&[25]));
    }

    #[test]
    fn prescribe_brow_lowerer_both_polarities() {
        let dict = AuDictionary::builtin();
        let add = prescribe(set(&[]), set(&[4]), &dict);
        assert_eq!(add.len(), 1);
        assert_eq!(add[0].au, ActionUnit::BrowLowerer);
        assert_eq!(add[0].polarity, Polarity::Add);
        assert_eq!(add[0].text, "lower your eyebrows.");

        let remove = prescribe(set(&[4]), set(&[]), &dict);
        assert_eq!(remove[0].polarity, Polarity::Remove);
        assert_eq!(remove[0].text, "do not lower your eyebrows.");

        assert!(prescribe(set(&[6, 12]), set(&[6, 12]), &dict).is_empty());
    }

    #[test]
    fn prescriptions_follow_region_then_code() {
        let dict = AuDictionary::builtin();
        // 26 (mouth) and 12 (oblique) and 1, 4 (eyebrows) and 6 (cheeks).
        let out = prescribe(set(&[26, 12]), set(&[1, 4, 6]), &dict);
        let codes: Vec<u8> = out.iter().map(|p| p.au.code()).collect();
        assert_eq!(codes, vec![1, 4, 6, 12, 26]);
    }

    #[test]
    fn describe_examples() {
        let dict = AuDictionary::builtin();
        assert_eq!(describe(set(&[4]), &dict), vec!["eyebrows are lowered."]);
        assert!(describe(set(&[]), &dict).is_empty());
        let two = describe(set(&[12, 4]), &dict);
        assert_eq!(two[0], "eyebrows are lowered.");
        assert_eq!(two.len(), 2);
    }

    #[test]
    fn describe_uses_file_region_order() {
        // Fixture dictionary: lips block moved ahead of eyebrows, AU12 under lips.
        let src = AuDictionary::builtin_source().replace(
            "au = 12\nregion = \"oblique\"",
            "au = 12\nregion = \"lips\"",
        );
        let (head, rest) = src.split_once("[[entry]]").unwrap();
        let mut chunks: Vec<String> = rest
            .split("[[entry]]")
            .map(|c| format!("[[entry]]{c}"))
            .collect();
        let lips: Vec<String> = chunks
            .iter()
            .filter(|c| c.contains("region = \"lips\""))
            .cloned()
            .collect();
        chunks.retain(|c| !c.contains("region = \"lips\""));
        let text = format!("{head}{}{}", lips.concat(), chunks.concat());
        let dict = AuDictionary::parse(&text).unwrap();
        assert_eq!(dict.region_order()[0], Region::Lips);
        let out = describe(set(&[4, 12]), &dict);
        assert_eq!(out[0], "the corners of the lips are pulled up.");
        assert_eq!(out[1], "eyebrows are lowered.");
    }
}
