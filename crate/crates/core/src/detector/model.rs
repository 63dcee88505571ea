use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{decode_f64, encode_f64, F64_ENCODING};
use crate::features::FeatureVector;
use crate::model::{ActionUnit, AuSet, AU_COUNT};

use super::DetectorError;

/// Format tag written to and required from every model file.
pub const MODEL_VERSION: &str = "facegame-au-model/1";

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// One logistic classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct AuHead {
    pub au: ActionUnit,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

/// Twenty independent logistic regressions over standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct AuModel {
    feature_len: usize,
    mean: Vec<f64>,
    std: Vec<f64>,
    heads: Vec<AuHead>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl AuModel {
    /// All-zero weights and biases, identity standardization, default
    /// thresholds.
    pub fn zeros(feature_len: usize) -> AuModel {
        AuModel {
            feature_len,
            mean: vec![0.0; feature_len],
            std: vec![1.0; feature_len],
            heads: ActionUnit::ALL
                .into_iter()
                .map(|au| AuHead {
                    au,
                    weights: vec![0.0; feature_len],
                    bias: 0.0,
                    threshold: DEFAULT_THRESHOLD,
                })
                .collect(),
        }
    }

    pub(crate) fn from_parts(
        mean: Vec<f64>,
        std: Vec<f64>,
        heads: Vec<AuHead>,
    ) -> Result<AuModel, DetectorError> {
        let model = AuModel {
            feature_len: mean.len(),
            mean,
            std,
            heads,
        };
        model.validate().map_err(DetectorError::BadModelFile)?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), String> {
        if self.std.len() != self.feature_len {
            return Err(format!(
                "std has {} values, expected {}",
                self.std.len(),
                self.feature_len
            ));
        }
        if let Some(i) = self.std.iter().position(|s| !s.is_finite() || *s <= 0.0) {
            return Err(format!("std[{i}] must be positive"));
        }
        if self.heads.len() != AU_COUNT {
            return Err(format!(
                "expected {AU_COUNT} heads, found {}",
                self.heads.len()
            ));
        }
        for (i, head) in self.heads.iter().enumerate() {
            if head.au.index() != i {
                return Err(format!(
                    "head {i} is {} (heads must follow catalog order)",
                    head.au
                ));
            }
            if head.weights.len() != self.feature_len {
                return Err(format!(
                    "{} has {} weights, expected {}",
                    head.au,
                    head.weights.len(),
                    self.feature_len
                ));
            }
            if !(head.threshold > 0.0 && head.threshold < 1.0) {
                return Err(format!(
                    "{} threshold {} outside (0, 1)",
                    head.au, head.threshold
                ));
            }
            if !head.bias.is_finite() || head.weights.iter().any(|w| !w.is_finite()) {
                return Err(format!("{} has non-finite parameters", head.au));
            }
        }
        Ok(())
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn heads(&self) -> &[AuHead] {
        &self.heads
    }

    pub fn head(&self, au: ActionUnit) -> &AuHead {
        &self.heads[au.index()]
    }

    pub fn head_mut(&mut self, au: ActionUnit) -> &mut AuHead {
        &mut self.heads[au.index()]
    }

    pub fn set_threshold(&mut self, au: ActionUnit, threshold: f64) -> Result<(), DetectorError> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(DetectorError::InvalidThreshold(threshold));
        }
        self.heads[au.index()].threshold = threshold;
        Ok(())
    }

    fn check_len(&self, features: &FeatureVector) -> Result<(), DetectorError> {
        if features.len() != self.feature_len {
            return Err(DetectorError::DimensionMismatch {
                expected: self.feature_len,
                found: features.len(),
            });
        }
        Ok(())
    }

    /// `sigmoid(w · standardize(f) + b)` for every head, in catalog order.
    pub fn predict_probabilities(
        &self,
        features: &FeatureVector,
    ) -> Result<[f64; AU_COUNT], DetectorError> {
        self.check_len(features)?;
        let standardized: Vec<f64> = features
            .values()
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        let mut out = [0.0; AU_COUNT];
        for (p, head) in out.iter_mut().zip(&self.heads) {
            let z: f64 = head
                .weights
                .iter()
                .zip(&standardized)
                .map(|(w, x)| w * x)
                .sum::<f64>()
                + head.bias;
            *p = sigmoid(z);
        }
        Ok(out)
    }

    /// Units whose probability reaches their threshold (inclusive).
    pub fn detect_aus(&self, features: &FeatureVector) -> Result<AuSet, DetectorError> {
        let probs = self.predict_probabilities(features)?;
        Ok(self
            .heads
            .iter()
            .zip(probs)
            .filter(|(head, p)| *p >= head.threshold)
            .map(|(head, _)| head.au)
            .collect())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MODEL_VERSION.to_string(),
            feature_len: self.feature_len,
            encoding: ENCODING.to_string(),
            mean: encode(&self.mean),
            std: encode(&self.std),
            heads: self
                .heads
                .iter()
                .map(|h| HeadFile {
                    au: h.au.code(),
                    bias: h.bias,
                    threshold: h.threshold,
                    weights: encode(&h.weights),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<AuModel, DetectorError> {
        let bad = DetectorError::BadModelFile;
        // Check the tag before the full schema so version errors are precise.
        let probe: VersionProbe =
            serde_json::from_str(text).map_err(|e| bad(format!("not a model file: {e}")))?;
        if probe.version != MODEL_VERSION {
            return Err(bad(format!(
                "version mismatch: expected {MODEL_VERSION}, found {}",
                probe.version
            )));
        }
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| bad(format!("malformed model file: {e}")))?;
        if file.encoding != ENCODING {
            return Err(bad(format!(
                "unsupported array encoding {:?}, expected {ENCODING}",
                file.encoding
            )));
        }
        let mean = decode(&file.mean, file.feature_len, "mean")?;
        let std = decode(&file.std, file.feature_len, "std")?;
        let mut heads = Vec::with_capacity(file.heads.len());
        for h in file.heads {
            let au = ActionUnit::from_code(h.au.into()).map_err(|e| bad(format!("head: {e}")))?;
            let weights = decode(&h.weights, file.feature_len, &format!("{au} weights"))?;
            heads.push(AuHead {
                au,
                weights,
                bias: h.bias,
                threshold: h.threshold,
            });
        }
        AuModel::from_parts(mean, std, heads)
    }

    pub fn save(&self, path: &Path) -> Result<(), DetectorError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| DetectorError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<AuModel, DetectorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DetectorError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

const ENCODING: &str = F64_ENCODING;

#[derive(Deserialize)]
struct VersionProbe {
    version: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: String,
    feature_len: usize,
    encoding: String,
    mean: String,
    std: String,
    heads: Vec<HeadFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeadFile {
    au: u8,
    bias: f64,
    threshold: f64,
    weights: String,
}

fn encode(values: &[f64]) -> String {
    encode_f64(values)
}

fn decode(text: &str, len: usize, field: &str) -> Result<Vec<f64>, DetectorError> {
    decode_f64(text, len).map_err(|e| DetectorError::BadModelFile(format!("{field}: {e}")))
}
