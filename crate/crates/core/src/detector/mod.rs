//! Action Unit classification.
//!
//! The reference detector is twenty independent L2-regularized logistic
//! regressions over standardized [`FeatureVector`]s. Anything implementing
//! [`AuClassifier`] can stand in for it.

mod manifest;
mod model;
mod train;

pub use manifest::{load_training_manifest, TrainingManifestLine};
pub use model::{AuHead, AuModel, DEFAULT_THRESHOLD, MODEL_VERSION};
pub use train::{objective, train, AuTrainingSet, Objective, TrainConfig, TrainReport};

use crate::features::{FeatureError, FeatureVector};
use crate::model::{ActionUnit, AuSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetectorError {
    #[error("feature vector has {found} values, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{au} needs positive and negative examples (got {positives} positive, {negatives} negative)")]
    DegenerateData {
        au: ActionUnit,
        positives: usize,
        negatives: usize,
    },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("bad model file: {0}")]
    BadModelFile(String),
    #[error("threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("bad training manifest: {0}")]
    BadManifest(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Maps a feature vector to the set of active Action Units.
pub trait AuClassifier: Send + Sync {
    fn detect(&self, features: &FeatureVector) -> Result<AuSet, DetectorError>;
}

impl AuClassifier for AuModel {
    fn detect(&self, features: &FeatureVector) -> Result<AuSet, DetectorError> {
        self.detect_aus(features)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector::from_vec(values)
    }

    #[test]
    fn zero_model_predicts_one_half() {
        let m = AuModel::zeros(10);
        let p = m.predict_probabilities(&fv(vec![3.0; 10])).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn large_bias_saturates_one_head() {
        let mut m = AuModel::zeros(4);
        m.head_mut(ActionUnit::LipCornerPuller).bias = 10.0;
        let p = m.predict_probabilities(&fv(vec![0.0; 4])).unwrap();
        assert!(p[ActionUnit::LipCornerPuller.index()] > 0.9999);
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn threshold_is_inclusive() {
        let m = AuModel::zeros(3);
        assert_eq!(m.detect_aus(&fv(vec![0.0; 3])).unwrap(), AuSet::full());

        // sigmoid(b) = 0.4999 for every head
        let mut m = AuModel::zeros(3);
        let b = (0.4999f64 / 0.5001).ln();
        for au in ActionUnit::ALL {
            m.head_mut(au).bias = b;
        }
        assert_eq!(m.detect_aus(&fv(vec![0.0; 3])).unwrap(), AuSet::empty());
    }

    #[test]
    fn mixed_detection_matches_direct_comparison() {
        let mut m = AuModel::zeros(5);
        for (i, au) in ActionUnit::ALL.into_iter().enumerate() {
            m.head_mut(au).weights[i % 5] = (i as f64 - 9.5) * 0.3;
            m.head_mut(au).bias = ((i * 7) % 5) as f64 * 0.2 - 0.4;
            m.set_threshold(au, 0.3 + 0.02 * i as f64).unwrap();
        }
        let f = fv(vec![0.4, -1.1, 0.7, 2.0, -0.3]);
        let probs = m.predict_probabilities(&f).unwrap();
        let oracle: AuSet = ActionUnit::ALL
            .into_iter()
            .filter(|au| probs[au.index()] >= m.head(*au).threshold)
            .collect();
        let detected = m.detect_aus(&f).unwrap();
        assert_eq!(detected, oracle);
        assert!(!detected.is_empty() && detected != AuSet::full());
    }

    #[test]
    fn dimension_mismatch() {
        let m = AuModel::zeros(5);
        assert_eq!(
            m.detect_aus(&fv(vec![0.0; 4])),
            Err(DetectorError::DimensionMismatch {
                expected: 5,
                found: 4
            })
        );
    }

    #[test]
    fn invalid_thresholds_are_rejected() {
        let mut m = AuModel::zeros(1);
        for t in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(m.set_threshold(ActionUnit::Dimpler, t).is_err());
        }
        m.set_threshold(ActionUnit::NasolabialDeepener, 0.8)
            .unwrap();
        assert_eq!(m.head(ActionUnit::NasolabialDeepener).threshold, 0.8);
    }

    fn toy_set(n: usize) -> AuTrainingSet {
        let mut set = AuTrainingSet::new();
        for i in 0..n {
            let x = [(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()];
            let labels: AuSet = ActionUnit::ALL
                .into_iter()
                .filter(|au| {
                    let a = au.index() as f64 * 0.3;
                    a.cos() * x[0] + a.sin() * x[1] > 0.0
                })
                .collect();
            set.push(fv(vec![x[0], x[1], 1.0, 0.0]), labels).unwrap();
        }
        set
    }

    #[test]
    fn degenerate_labels_are_rejected() {
        let mut set = AuTrainingSet::new();
        set.push(fv(vec![0.0]), AuSet::full()).unwrap();
        set.push(fv(vec![1.0]), AuSet::full().without(ActionUnit::Dimpler))
            .unwrap();
        let err = train(&set, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, DetectorError::DegenerateData { .. }));
        assert_eq!(
            train(&AuTrainingSet::new(), &TrainConfig::default()),
            Err(DetectorError::EmptyTrainingSet)
        );
    }

    #[test]
    fn training_set_rejects_ragged_vectors() {
        let mut set = AuTrainingSet::new();
        set.push(fv(vec![0.0; 3]), AuSet::empty()).unwrap();
        assert!(set.push(fv(vec![0.0; 4]), AuSet::empty()).is_err());
    }

    #[test]
    fn constant_features_get_unit_std_and_zero_weight() {
        let (model, report) = train(&toy_set(60), &TrainConfig::default()).unwrap();
        assert_eq!(report.active_features, 2);
        assert_eq!(&model.std()[2..], &[1.0, 1.0]);
        for head in model.heads() {
            assert_eq!(&head.weights[2..], &[0.0, 0.0]);
        }
        assert_eq!(report.loss_history.len(), TrainConfig::default().epochs + 1);
    }

    #[test]
    fn same_seed_same_model() {
        let cfg = TrainConfig {
            init_scale: 0.05,
            seed: 11,
            epochs: 20,
            ..TrainConfig::default()
        };
        let a = train(&toy_set(40), &cfg).unwrap().0;
        let b = train(&toy_set(40), &cfg).unwrap().0;
        assert_eq!(a, b);
        let c = train(&toy_set(40), &TrainConfig { seed: 12, ..cfg })
            .unwrap()
            .0;
        assert_ne!(a, c);
    }

    #[test]
    fn heavy_l2_shrinks_towards_prior() {
        let set = toy_set(80);
        let base = TrainConfig {
            lr: 0.01,
            epochs: 3000,
            ..TrainConfig::default()
        };
        let (free, _) = train(&set, &TrainConfig { l2: 0.0, ..base }).unwrap();
        let (tight, _) = train(&set, &TrainConfig { l2: 100.0, ..base }).unwrap();
        for au in ActionUnit::ALL {
            let norm = |m: &AuModel| m.head(au).weights.iter().map(|w| w * w).sum::<f64>();
            assert!(norm(&tight) < 1e-3 * norm(&free).max(1e-9) + 1e-6);
            let prior =
                set.labels().iter().filter(|l| l.contains(au)).count() as f64 / set.len() as f64;
            let p_bias = 1.0 / (1.0 + (-tight.head(au).bias).exp());
            assert!(
                (p_bias - prior).abs() < 0.02,
                "{au}: {p_bias} vs prior {prior}"
            );
        }
    }

    #[test]
    fn small_lr_loss_is_non_increasing() {
        let (_, report) = train(
            &toy_set(50),
            &TrainConfig {
                lr: 1e-2,
                epochs: 200,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        for w in report.loss_history.windows(2) {
            for (after, before) in w[1].iter().zip(&w[0]) {
                assert!(*after <= before + 1e-15);
            }
        }
    }

    #[test]
    fn model_file_round_trip_is_bit_exact() {
        let (mut model, _) = train(
            &toy_set(30),
            &TrainConfig {
                epochs: 15,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        model
            .set_threshold(ActionUnit::NasolabialDeepener, 0.731)
            .unwrap();
        let back = AuModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        for (a, b) in back.heads().iter().zip(model.heads()) {
            assert_eq!(a.bias.to_bits(), b.bias.to_bits());
        }
    }

    #[test]
    fn truncated_model_file_is_rejected() {
        let json = AuModel::zeros(8).to_json();
        let cut = &json[..json.len() / 2];
        assert!(matches!(
            AuModel::from_json(cut),
            Err(DetectorError::BadModelFile(_))
        ));
    }

    #[test]
    fn version_mismatch_names_both_versions() {
        let json = AuModel::zeros(2)
            .to_json()
            .replace(MODEL_VERSION, "facegame-au-model/0");
        match AuModel::from_json(&json) {
            Err(DetectorError::BadModelFile(msg)) => {
                assert!(msg.contains(MODEL_VERSION), "{msg}");
                assert!(msg.contains("facegame-au-model/0"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_numbers_in_file_are_rejected() {
        let json =
            AuModel::zeros(2)
                .to_json()
                .replacen("\"threshold\": 0.5", "\"threshold\": 1.5", 1);
        assert!(matches!(
            AuModel::from_json(&json),
            Err(DetectorError::BadModelFile(_))
        ));
    }
}
