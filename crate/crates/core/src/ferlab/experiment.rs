use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::Emotion;

use super::cnn::{build_model, CnnConfig};
use super::train::{evaluate, train_cnn, CnnTrainConfig};
use super::{FerError, LabeledImageSet};

/// A class-balanced train/test split drawn without replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub train: LabeledImageSet,
    pub test: LabeledImageSet,
    /// Source positions of the training items.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Draws `n_train + n_test` distinct instances of every emotion.
pub fn balanced_sample(
    data: &LabeledImageSet,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<SamplePair, FerError> {
    let counts = data.class_counts();
    let required = n_train + n_test;
    for e in Emotion::ALL {
        if counts[e.index()] < required {
            return Err(FerError::InsufficientClassData {
                emotion: e,
                available: counts[e.index()],
                required,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train_indices, mut test_indices) = (Vec::new(), Vec::new());
    for e in Emotion::ALL {
        let mut pool: Vec<usize> = (0..data.len()).filter(|&i| data.labels()[i] == e).collect();
        pool.shuffle(&mut rng);
        train_indices.extend_from_slice(&pool[..n_train]);
        test_indices.extend_from_slice(&pool[n_train..required]);
    }
    Ok(SamplePair {
        train: data.subset(format!("{}-train-{seed}", data.name), &train_indices),
        test: data.subset(format!("{}-test-{seed}", data.name), &test_indices),
        train_indices,
        test_indices,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// One repetition per seed.
    pub seeds: Vec<u64>,
    pub n_train: usize,
    pub n_test: usize,
    pub cnn: CnnConfig,
    pub train: CnnTrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: vec![1, 2, 3, 4, 5],
            n_train: 200,
            n_test: 50,
            cnn: CnnConfig::default(),
            train: CnnTrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub seed: u64,
    pub without_extra: f64,
    pub with_extra: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnrichmentReport {
    pub base: String,
    pub extra: String,
    pub extra_size: usize,
    pub rows: Vec<ExperimentRow>,
    pub mean_without: f64,
    pub mean_with: f64,
}

/// For each seed: sample the base set, train one model on the sample and an
/// identically initialized one on the sample plus `extra`, and score both on
/// the sample's held-out split.
pub fn run_enrichment_experiment(
    base: &LabeledImageSet,
    extra: &LabeledImageSet,
    config: &ExperimentConfig,
) -> Result<EnrichmentReport, FerError> {
    if config.seeds.is_empty() {
        return Err(FerError::BadExperiment(
            "at least one seed is required".into(),
        ));
    }
    let mut rows = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let sample = balanced_sample(base, config.n_train, config.n_test, seed)?;
        let init = build_model(config.cnn, seed)?;
        let train = CnnTrainConfig {
            seed,
            ..config.train
        };
        let (plain, _) = train_cnn(init.clone(), &sample.train, &train)?;
        let enriched_set = sample
            .train
            .concat(extra, format!("{}+{}", sample.train.name, extra.name));
        let (enriched, _) = train_cnn(init, &enriched_set, &train)?;
        rows.push(ExperimentRow {
            seed,
            without_extra: evaluate(&plain, &sample.test)?,
            with_extra: evaluate(&enriched, &sample.test)?,
        });
    }
    let k = rows.len() as f64;
    Ok(EnrichmentReport {
        base: base.name.clone(),
        extra: extra.name.clone(),
        extra_size: extra.len(),
        mean_without: rows.iter().map(|r| r.without_extra).sum::<f64>() / k,
        mean_with: rows.iter().map(|r| r.with_extra).sum::<f64>() / k,
        rows,
    })
}

/// Columns: sample number, seed, accuracy without the extra data, accuracy
/// with it (percent).
impl fmt::Display for EnrichmentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# test accuracy on {}; extra data {} ({} images)",
            self.base, self.extra, self.extra_size
        )?;
        writeln!(
            f,
            "{:<8}{:>8}{:>16}{:>16}",
            "sample", "seed", "without_extra", "with_extra"
        )?;
        for (i, r) in self.rows.iter().enumerate() {
            writeln!(
                f,
                "{:<8}{:>8}{:>15.2}%{:>15.2}%",
                i + 1,
                r.seed,
                100.0 * r.without_extra,
                100.0 * r.with_extra
            )?;
        }
        writeln!(
            f,
            "{:<8}{:>8}{:>15.2}%{:>15.2}%",
            "mean",
            "",
            100.0 * self.mean_without,
            100.0 * self.mean_with
        )
    }
}
