//! Target catalog.
//!
//! A targets directory holds `catalog.jsonl` and the images it references:
//!
//! ```text
//! {"target_id": "happy-01", "image": "happy-01.png", "emotion": "happiness",
//!  "landmarks": [[x, y], ...], "aus": [6, 12]}
//! ```
//!
//! `aus` is optional; entries without it are run through the AU detector
//! when the catalog is loaded.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::detector::AuClassifier;
use crate::features::{extract_features_with, FeatureConfig};
use crate::model::{AuSet, Emotion, GrayImage, LandmarkSet, ModelError, TargetEntry};

use super::GameError;

pub const CATALOG_FILE: &str = "catalog.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogLine {
    pub target_id: String,
    pub image: String,
    pub emotion: Emotion,
    pub landmarks: LandmarkSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aus: Option<AuSet>,
}

/// Labels a target with the detector's AU set. The emotion always comes
/// from the operator.
pub fn ingest_target(
    target_id: impl Into<String>,
    image: GrayImage,
    landmarks: LandmarkSet,
    emotion: Emotion,
    classifier: &dyn AuClassifier,
    features: &FeatureConfig,
) -> Result<TargetEntry, GameError> {
    let f = extract_features_with(&image, &landmarks, features)
        .map_err(|e| GameError::Pipeline(e.to_string()))?;
    let aus = classifier
        .detect(&f)
        .map_err(|e| GameError::Pipeline(e.to_string()))?;
    TargetEntry::new(target_id, image, emotion, aus, landmarks).map_err(|e| match e {
        ModelError::EmptyTargetAuSet(id) => GameError::EmptyTargetAuSet(id),
        other => GameError::InvalidRequest(other.to_string()),
    })
}

/// In-memory catalog, optionally backed by a directory.
#[derive(Default)]
pub struct TargetCatalog {
    dir: Option<PathBuf>,
    targets: Vec<Arc<TargetEntry>>,
}

impl TargetCatalog {
    pub fn new() -> TargetCatalog {
        TargetCatalog::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = TargetEntry>) -> TargetCatalog {
        TargetCatalog {
            dir: None,
            targets: entries.into_iter().map(Arc::new).collect(),
        }
    }

    pub fn load(
        dir: &Path,
        classifier: &dyn AuClassifier,
        features: &FeatureConfig,
    ) -> Result<TargetCatalog, GameError> {
        let path = dir.join(CATALOG_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| GameError::Storage(format!("{}: {e}", path.display())))?;
        let mut catalog = TargetCatalog {
            dir: Some(dir.to_path_buf()),
            targets: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: CatalogLine = serde_json::from_str(line).map_err(|e| {
                GameError::Storage(format!("{} line {}: {e}", path.display(), i + 1))
            })?;
            let image = GrayImage::open(&dir.join(&entry.image))
                .map_err(|e| GameError::Storage(e.to_string()))?;
            let mut target = match entry.aus {
                Some(aus) => {
                    TargetEntry::new(entry.target_id, image, entry.emotion, aus, entry.landmarks)
                        .map_err(|e| match e {
                            ModelError::EmptyTargetAuSet(id) => GameError::EmptyTargetAuSet(id),
                            other => GameError::Storage(other.to_string()),
                        })?
                }
                None => ingest_target(
                    entry.target_id,
                    image,
                    entry.landmarks,
                    entry.emotion,
                    classifier,
                    features,
                )?,
            };
            target.asset_ref = Some(entry.image);
            catalog.insert(target)?;
        }
        Ok(catalog)
    }

    /// Adds a target; when the catalog is directory-backed the image and a
    /// catalog line are written too.
    pub fn add(&mut self, mut target: TargetEntry) -> Result<Arc<TargetEntry>, GameError> {
        if self.get(&target.target_id).is_some() {
            return Err(GameError::InvalidRequest(format!(
                "target {} already exists",
                target.target_id
            )));
        }
        if let Some(dir) = &self.dir {
            let file = format!("{}.png", target.target_id);
            let img_path = dir.join(&file);
            std::fs::write(&img_path, target.image.to_png())
                .map_err(|e| GameError::Storage(format!("{}: {e}", img_path.display())))?;
            let line = CatalogLine {
                target_id: target.target_id.clone(),
                image: file.clone(),
                emotion: target.emotion,
                landmarks: target.landmarks.clone(),
                aus: Some(target.au_set),
            };
            append_catalog_line(dir, &line)?;
            target.asset_ref = Some(file);
        }
        self.insert(target)
    }

    fn insert(&mut self, target: TargetEntry) -> Result<Arc<TargetEntry>, GameError> {
        if self.get(&target.target_id).is_some() {
            return Err(GameError::Storage(format!(
                "duplicate target {}",
                target.target_id
            )));
        }
        let target = Arc::new(target);
        self.targets.push(target.clone());
        Ok(target)
    }

    pub fn get(&self, target_id: &str) -> Option<&Arc<TargetEntry>> {
        self.targets.iter().find(|t| t.target_id == target_id)
    }

    pub fn targets(&self) -> &[Arc<TargetEntry>] {
        &self.targets
    }

    pub fn for_emotion(&self, emotion: Emotion) -> Vec<&Arc<TargetEntry>> {
        self.targets
            .iter()
            .filter(|t| t.emotion == emotion)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

pub fn append_catalog_line(dir: &Path, line: &CatalogLine) -> Result<(), GameError> {
    use std::io::Write;
    let path = dir.join(CATALOG_FILE);
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| GameError::Storage(format!("{}: {e}", path.display())))?;
    let mut bytes = serde_json::to_vec(line).expect("catalog line serializes");
    bytes.push(b'\n');
    f.write_all(&bytes)
        .map_err(|e| GameError::Storage(format!("{}: {e}", path.display())))
}
