//! Face feature pipeline: eye alignment, landmark hull masking, HOG, and
//! assembly of the classifier input vector.

mod align;
mod hog;
mod mask;

pub use align::{
    align_face, alignment_transform, canonical_eyes, eye_centers, AlignedFace, Similarity,
    EYE_ROW_FRACTION,
};
pub use hog::{
    compute_hog, compute_hog_with, HogParams, HogVector, HOG_CLIP, HOG_EPSILON, HOG_LEN,
};
pub use mask::{convex_hull, hull_contains, mask_face};

use crate::model::{GrayImage, LandmarkSet, ModelError, LANDMARK_COUNT};

/// Length of the classifier input: HOG followed by 136 landmark coordinates.
pub const FEATURE_LEN: usize = HOG_LEN + 2 * LANDMARK_COUNT;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("eye centers coincide; cannot align")]
    DegenerateEyes,
    #[error("{width}x{height} image does not tile into {cell_size}-pixel HOG cells and blocks")]
    BadDimensions {
        width: usize,
        height: usize,
        cell_size: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Alignment and HOG settings of the feature pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Side of the aligned square face, pixels.
    pub size: usize,
    /// Canonical inter-ocular distance in the aligned frame, pixels.
    pub iod: f64,
    pub hog: HogParams,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            size: 112,
            iod: 44.8,
            hog: HogParams::default(),
        }
    }
}

/// HOG values followed by aligned landmarks scaled to `[0, 1]` by the
/// aligned frame size.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn from_vec(values: Vec<f64>) -> FeatureVector {
        FeatureVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn extract_features(
    img: &GrayImage,
    landmarks: &LandmarkSet,
) -> Result<FeatureVector, FeatureError> {
    extract_features_with(img, landmarks, &FeatureConfig::default())
}

/// align -> mask -> HOG, then the aligned landmarks.
pub fn extract_features_with(
    img: &GrayImage,
    landmarks: &LandmarkSet,
    config: &FeatureConfig,
) -> Result<FeatureVector, FeatureError> {
    let aligned = align_face(img, landmarks, config.size, config.iod)?;
    let masked = mask_face(&aligned);
    let hog = compute_hog_with(&masked.image, &config.hog)?;
    let scale = config.size as f64;
    let mut values = hog.into_values();
    values.extend(masked.landmarks.flatten().into_iter().map(|v| v / scale));
    Ok(FeatureVector(values))
}
