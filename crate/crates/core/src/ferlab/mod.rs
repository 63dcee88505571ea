//! Facial-expression-recognition harness: a shallow CNN trained from
//! scratch, balanced sampling, and the with/without-extra-data comparison.
//!
//! Datasets are directories with either
//!
//! * `labels.csv`: `path,label` rows (optional header), label being an
//!   emotion name or its integer encoding, paths relative to the directory;
//! * `manifest.jsonl`: a dataset export, using `frame_ref` and `emotion`.
//!
//! Images are converted to grayscale and resized to the network input.

mod cnn;
mod experiment;
mod train;

pub use cnn::{
    build_model, one_hot, CnnConfig, CnnModel, Gradients, Output, CNN_VERSION, CONV_LAYERS,
    TENSOR_COUNT, TENSOR_NAMES,
};
pub use experiment::{
    balanced_sample, run_enrichment_experiment, EnrichmentReport, ExperimentConfig, ExperimentRow,
    SamplePair,
};
pub use train::{evaluate, train_cnn, CnnTrainConfig, EpochStats};

use std::path::Path;

use crate::model::{Emotion, GrayImage, EMOTION_COUNT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FerError {
    #[error("input size {0} is not a positive multiple of 8")]
    BadInputSize(usize),
    #[error("bad network configuration: {0}")]
    BadConfig(String),
    #[error("image is {width}x{height}, network expects {expected}x{expected}")]
    ShapeMismatch {
        expected: usize,
        width: usize,
        height: usize,
    },
    #[error("{images} images but {targets} targets")]
    TargetCount { images: usize, targets: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("{emotion} has {available} instances, {required} required")]
    InsufficientClassData {
        emotion: Emotion,
        available: usize,
        required: usize,
    },
    #[error("bad experiment configuration: {0}")]
    BadExperiment(String),
    #[error("bad model file: {0}")]
    BadModelFile(String),
    #[error("bad dataset: {0}")]
    BadDataset(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Images with one emotion label each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledImageSet {
    pub name: String,
    images: Vec<GrayImage>,
    labels: Vec<Emotion>,
}

impl LabeledImageSet {
    pub fn new(name: impl Into<String>) -> LabeledImageSet {
        LabeledImageSet {
            name: name.into(),
            ..LabeledImageSet::default()
        }
    }

    pub fn push(&mut self, image: GrayImage, label: Emotion) {
        self.images.push(image);
        self.labels.push(label);
    }

    pub fn images(&self) -> &[GrayImage] {
        &self.images
    }

    pub fn labels(&self) -> &[Emotion] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn class_counts(&self) -> [usize; EMOTION_COUNT] {
        let mut counts = [0; EMOTION_COUNT];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// The items at `indices`, in that order.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> LabeledImageSet {
        LabeledImageSet {
            name: name.into(),
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// This set followed by `other`.
    pub fn concat(&self, other: &LabeledImageSet, name: impl Into<String>) -> LabeledImageSet {
        LabeledImageSet {
            name: name.into(),
            images: self.images.iter().chain(&other.images).cloned().collect(),
            labels: self.labels.iter().chain(&other.labels).copied().collect(),
        }
    }
}

fn fit(image: GrayImage, size: usize) -> GrayImage {
    if image.width() == size && image.height() == size {
        image
    } else {
        image.resized(size, size)
    }
}

fn parse_label(text: &str) -> Option<Emotion> {
    text.trim().parse().ok()
}

/// Loads a dataset directory (see the module docs), resizing every image to
/// `size x size`.
pub fn load_dataset(dir: &Path, size: usize) -> Result<LabeledImageSet, FerError> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let mut set = LabeledImageSet::new(name);
    let open = |rel: &str| -> Result<GrayImage, FerError> {
        GrayImage::open(&dir.join(rel))
            .map(|img| fit(img, size))
            .map_err(|e| FerError::BadDataset(format!("{rel}: {e}")))
    };
    let csv = dir.join("labels.csv");
    let manifest = dir.join(crate::forge::MANIFEST_FILE);
    if csv.exists() {
        let text = std::fs::read_to_string(&csv)
            .map_err(|e| FerError::Io(format!("{}: {e}", csv.display())))?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (path, label) = line.rsplit_once(',').ok_or_else(|| {
                FerError::BadDataset(format!("labels.csv line {}: expected path,label", i + 1))
            })?;
            match parse_label(label) {
                Some(emotion) => set.push(open(path.trim())?, emotion),
                None if i == 0 => continue, // header
                None => {
                    return Err(FerError::BadDataset(format!(
                        "labels.csv line {}: unknown label {label:?}",
                        i + 1
                    )))
                }
            }
        }
    } else if manifest.exists() {
        let export =
            crate::forge::read_export(dir).map_err(|e| FerError::BadDataset(e.to_string()))?;
        for entry in export.entries {
            if let Some(frame) = entry.frame_ref {
                set.push(open(&frame)?, entry.emotion);
            }
        }
    } else {
        return Err(FerError::BadDataset(format!(
            "{} has neither labels.csv nor {}",
            dir.display(),
            crate::forge::MANIFEST_FILE
        )));
    }
    Ok(set)
}

/// Writes `set` as PNG files plus `labels.csv`.
pub fn save_dataset(set: &LabeledImageSet, dir: &Path) -> Result<(), FerError> {
    let io = |e: std::io::Error| FerError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut csv = String::from("path,label\n");
    for (i, (img, label)) in set.images.iter().zip(&set.labels).enumerate() {
        let file = format!("{i:06}.png");
        std::fs::write(dir.join(&file), img.to_png()).map_err(io)?;
        csv.push_str(&format!("{file},{label}\n"));
    }
    std::fs::write(dir.join("labels.csv"), csv).map_err(io)
}
