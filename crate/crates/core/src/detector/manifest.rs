//! AU training manifests: JSON lines of
//! `{"image": "<path>", "landmarks": [[x, y], ...68], "aus": [codes]}`
//! with image paths relative to the manifest's directory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::{extract_features_with, FeatureConfig};
use crate::model::{AuSet, GrayImage, LandmarkSet};

use super::{AuTrainingSet, DetectorError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifestLine {
    pub image: String,
    pub landmarks: LandmarkSet,
    pub aus: AuSet,
}

/// Reads the manifest and runs the feature pipeline over every image.
pub fn load_training_manifest(
    path: &Path,
    config: &FeatureConfig,
) -> Result<AuTrainingSet, DetectorError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DetectorError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut set = AuTrainingSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: TrainingManifestLine = serde_json::from_str(line)
            .map_err(|e| DetectorError::BadManifest(format!("line {}: {e}", lineno + 1)))?;
        let image = GrayImage::open(&base.join(&entry.image))
            .map_err(|e| DetectorError::BadManifest(format!("line {}: {e}", lineno + 1)))?;
        let features = extract_features_with(&image, &entry.landmarks, config)?;
        set.push(features, entry.aus)?;
    }
    Ok(set)
}
