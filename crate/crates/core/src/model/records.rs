use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{AuSet, Emotion, GrayImage, LandmarkSet, ModelError};

/// Experiment arm: control players see only the score, treatment players
/// also receive prescriptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Control,
    Treatment,
}

impl Group {
    pub fn label(self) -> &'static str {
        match self {
            Group::Control => "control",
            Group::Treatment => "treatment",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Group {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "control" | "c" => Ok(Group::Control),
            "treatment" | "t" => Ok(Group::Treatment),
            _ => Err(ModelError::UnknownGroup(s.to_string())),
        }
    }
}

/// A target face the players imitate.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEntry {
    pub target_id: String,
    pub image: GrayImage,
    /// Reference to the original (possibly color) asset shown in the UI.
    pub asset_ref: Option<String>,
    pub emotion: Emotion,
    pub au_set: AuSet,
    pub landmarks: LandmarkSet,
}

impl TargetEntry {
    pub fn new(
        target_id: impl Into<String>,
        image: GrayImage,
        emotion: Emotion,
        au_set: AuSet,
        landmarks: LandmarkSet,
    ) -> Result<TargetEntry, ModelError> {
        let target_id = target_id.into();
        if au_set.is_empty() {
            return Err(ModelError::EmptyTargetAuSet(target_id));
        }
        Ok(TargetEntry {
            target_id,
            image,
            asset_ref: None,
            emotion,
            au_set,
            landmarks,
        })
    }
}

/// One scored attempt, exactly as persisted in the record log.
///
/// Field names are part of the log format and must not change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub record_id: u64,
    pub session_id: String,
    pub round_id: String,
    pub target_id: String,
    pub emotion: Emotion,
    pub group: Group,
    pub attempt_index: u32,
    pub player_aus: AuSet,
    pub target_aus: AuSet,
    pub score: f64,
    pub prescriptions_shown: bool,
    pub frame_ref: Option<String>,
    pub captured_at: DateTime<Utc>,
    pub received_at: DateTime<Utc>,
}

impl RoundRecord {
    /// Jaccard overlap of the stored sets; `None` when both are empty.
    pub fn recomputed_score(&self) -> Option<f64> {
        let union = self.player_aus.union(self.target_aus).len();
        (union > 0)
            .then(|| self.player_aus.intersection(self.target_aus).len() as f64 / union as f64)
    }
}
