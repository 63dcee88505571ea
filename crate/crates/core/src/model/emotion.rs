use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// The six basic emotions. The integer encoding (alphabetical) is the one
/// used by every export, matrix row and report column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger,
    Disgust,
    Fear,
    Happiness,
    Sadness,
    Surprise,
}

pub const EMOTION_COUNT: usize = 6;

impl Emotion {
    pub const ALL: [Emotion; EMOTION_COUNT] = [
        Emotion::Anger,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Happiness,
        Emotion::Sadness,
        Emotion::Surprise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Emotion, ModelError> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or(ModelError::UnknownEmotionIndex(index))
    }

    pub fn label(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Happiness => "happiness",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Emotion {
    type Err = ModelError;

    /// Accepts the canonical labels plus the adjective forms common in
    /// dataset label files ("angry", "happy", ...) and integer encodings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let emotion = match lower.as_str() {
            "anger" | "angry" => Emotion::Anger,
            "disgust" | "disgusted" => Emotion::Disgust,
            "fear" | "fearful" | "afraid" => Emotion::Fear,
            "happiness" | "happy" => Emotion::Happiness,
            "sadness" | "sad" => Emotion::Sadness,
            "surprise" | "surprised" => Emotion::Surprise,
            other => match other.parse::<usize>() {
                Ok(i) => Emotion::from_index(i)?,
                Err(_) => return Err(ModelError::UnknownEmotion(s.to_string())),
            },
        };
        Ok(emotion)
    }
}
