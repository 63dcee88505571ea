use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::cnn::{argmax, one_hot, CnnModel, Output};
use super::{FerError, LabeledImageSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnnTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffling.
    pub seed: u64,
}

impl Default for CnnTrainConfig {
    fn default() -> Self {
        CnnTrainConfig {
            epochs: 30,
            lr: 0.5,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Running statistics of one epoch, measured on each mini-batch before its
/// update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub loss: f64,
    pub accuracy: f64,
}

/// Mini-batch gradient descent over shuffled data.
pub fn train_cnn(
    mut model: CnnModel,
    data: &LabeledImageSet,
    config: &CnnTrainConfig,
) -> Result<(CnnModel, Vec<EpochStats>), FerError> {
    if data.is_empty() {
        return Err(FerError::EmptyBatch);
    }
    if config.batch_size == 0 || !config.lr.is_finite() || config.lr < 0.0 {
        return Err(FerError::BadConfig(format!(
            "batch size {} / learning rate {}",
            config.batch_size, config.lr
        )));
    }
    let targets: Vec<Output> = data.labels().iter().map(|&e| one_hot(e)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let images: Vec<_> = chunk.iter().map(|&i| data.images()[i].clone()).collect();
            let ys: Vec<Output> = chunk.iter().map(|&i| targets[i]).collect();
            let outputs = model.forward(&images)?;
            correct += outputs
                .iter()
                .zip(chunk)
                .filter(|(o, &i)| argmax(o) == data.labels()[i])
                .count();
            let (loss, grads) = model.backward(&images, &ys)?;
            loss_sum += loss * chunk.len() as f64;
            model.apply_gradients(&grads, config.lr);
        }
        history.push(EpochStats {
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        });
    }
    Ok((model, history))
}

/// Fraction of images whose most probable output is their label.
pub fn evaluate(model: &CnnModel, data: &LabeledImageSet) -> Result<f64, FerError> {
    if data.is_empty() {
        return Err(FerError::EmptyBatch);
    }
    let predicted = model.predict(data.images())?;
    let hits = predicted
        .iter()
        .zip(data.labels())
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / data.len() as f64)
}
