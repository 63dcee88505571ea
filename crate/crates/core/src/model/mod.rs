//! Domain vocabulary shared by every other module.

mod au;
mod emotion;
mod image;
mod landmarks;
mod records;

pub use au::{ActionUnit, AuSet, AU_COUNT};
pub use emotion::{Emotion, EMOTION_COUNT};
pub use image::GrayImage;
pub use landmarks::{LandmarkSet, Point, LANDMARK_COUNT};
pub use records::{Group, RoundRecord, TargetEntry};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown action unit code {0}")]
    UnknownAuCode(u32),
    #[error("unknown emotion label {0:?}")]
    UnknownEmotion(String),
    #[error("emotion index {0} out of range 0..6")]
    UnknownEmotionIndex(usize),
    #[error("unknown group {0:?}")]
    UnknownGroup(String),
    #[error("expected 68 landmarks, got {0}")]
    LandmarkCount(usize),
    #[error("landmark {0} has a non-finite coordinate")]
    NonFiniteLandmark(usize),
    #[error("{width}x{height} image needs {} pixels, got {len}", width * height)]
    PixelCount {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("target {0:?} has an empty action unit set")]
    EmptyTargetAuSet(String),
}
