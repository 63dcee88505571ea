use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::FeatureVector;
use crate::linalg::gemm;
use crate::model::{ActionUnit, AuSet, AU_COUNT};

use super::model::{sigmoid, AuHead, AuModel, DEFAULT_THRESHOLD};
use super::DetectorError;

/// Feature vectors paired with their ground-truth Action Units.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuTrainingSet {
    features: Vec<FeatureVector>,
    labels: Vec<AuSet>,
}

impl AuTrainingSet {
    pub fn new() -> AuTrainingSet {
        AuTrainingSet::default()
    }

    /// Adds one example; every vector must match the first one's length.
    pub fn push(&mut self, features: FeatureVector, labels: AuSet) -> Result<(), DetectorError> {
        if let Some(first) = self.features.first() {
            if first.len() != features.len() {
                return Err(DetectorError::DimensionMismatch {
                    expected: first.len(),
                    found: features.len(),
                });
            }
        }
        self.features.push(features);
        self.labels.push(labels);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.features.first().map_or(0, FeatureVector::len)
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn labels(&self) -> &[AuSet] {
        &self.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// L2 penalty on weights (not biases).
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Half-width of the uniform weight initialization drawn from `seed`;
    /// 0 starts every head at the origin.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2: 1e-3,
            lr: 0.1,
            epochs: 300,
            seed: 0,
            init_scale: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Objective per head before each epoch's update, then once more after
    /// the last one (`epochs + 1` rows).
    pub loss_history: Vec<[f64; AU_COUNT]>,
    /// Features with non-zero variance; the rest carry zero weight.
    pub active_features: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> [f64; AU_COUNT] {
        *self.loss_history.last().expect("history is never empty")
    }
}

/// Objective value and gradient of all twenty heads at once.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    /// Mean binary cross-entropy plus `l2 / 2 * |w|^2`, per head.
    pub loss: [f64; AU_COUNT],
    /// `d x 20`, row-major.
    pub grad_weights: Vec<f64>,
    pub grad_bias: [f64; AU_COUNT],
}

/// Evaluates the training objective.
///
/// `design` is `n x d` row-major, `targets` is `n x 20` of 0/1 values,
/// `weights` is `d x 20`.
pub fn objective(
    design: &[f64],
    n: usize,
    d: usize,
    targets: &[f64],
    weights: &[f64],
    bias: &[f64; AU_COUNT],
    l2: f64,
) -> Objective {
    assert_eq!(design.len(), n * d);
    assert_eq!(targets.len(), n * AU_COUNT);
    assert_eq!(weights.len(), d * AU_COUNT);
    let k = AU_COUNT;

    let mut logits = vec![0.0; n * k];
    for row in logits.chunks_exact_mut(k) {
        row.copy_from_slice(bias);
    }
    if d > 0 {
        gemm(n, d, k, design, false, weights, false, 1.0, &mut logits);
    }

    let mut loss = [0.0; AU_COUNT];
    let mut grad_bias = [0.0; AU_COUNT];
    let mut residual = vec![0.0; n * k];
    for i in 0..n {
        for j in 0..k {
            let z = logits[i * k + j];
            let y = targets[i * k + j];
            // softplus(z) - y z, evaluated stably.
            loss[j] += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
            let r = sigmoid(z) - y;
            residual[i * k + j] = r;
            grad_bias[j] += r;
        }
    }
    let inv_n = 1.0 / n as f64;
    for j in 0..k {
        loss[j] *= inv_n;
        grad_bias[j] *= inv_n;
        let norm2: f64 = (0..d).map(|r| weights[r * k + j].powi(2)).sum();
        loss[j] += 0.5 * l2 * norm2;
    }

    // The residual is only needed for the weight gradient; fold the 1/n in.
    for r in residual.iter_mut() {
        *r *= inv_n;
    }
    let mut grad_weights: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    if d > 0 {
        gemm(
            d,
            n,
            k,
            design,
            true,
            &residual,
            false,
            1.0,
            &mut grad_weights,
        );
    }
    Objective {
        loss,
        grad_weights,
        grad_bias,
    }
}

/// Population mean and standard deviation per feature. Features whose
/// spread is negligible relative to their magnitude report `None`.
fn feature_stats(data: &AuTrainingSet) -> Vec<(f64, Option<f64>)> {
    let n = data.len() as f64;
    (0..data.feature_len())
        .map(|j| {
            let mean = data.features.iter().map(|f| f.values()[j]).sum::<f64>() / n;
            let var = data
                .features
                .iter()
                .map(|f| (f.values()[j] - mean).powi(2))
                .sum::<f64>()
                / n;
            let std = var.sqrt();
            let live = std > 1e-12 * (1.0 + mean.abs());
            (mean, live.then_some(std))
        })
        .collect()
}

/// Fits all twenty heads by full-batch gradient descent.
pub fn train(
    data: &AuTrainingSet,
    config: &TrainConfig,
) -> Result<(AuModel, TrainReport), DetectorError> {
    if data.is_empty() {
        return Err(DetectorError::EmptyTrainingSet);
    }
    for au in ActionUnit::ALL {
        let positives = data.labels.iter().filter(|l| l.contains(au)).count();
        let negatives = data.len() - positives;
        if positives == 0 || negatives == 0 {
            return Err(DetectorError::DegenerateData {
                au,
                positives,
                negatives,
            });
        }
    }

    let n = data.len();
    let full_len = data.feature_len();
    let stats = feature_stats(data);
    let active: Vec<usize> = (0..full_len).filter(|&j| stats[j].1.is_some()).collect();
    let d = active.len();

    let mut design = Vec::with_capacity(n * d);
    for f in &data.features {
        let v = f.values();
        design.extend(active.iter().map(|&j| {
            let (m, s) = stats[j];
            (v[j] - m) / s.expect("active features have spread")
        }));
    }
    let mut targets = Vec::with_capacity(n * AU_COUNT);
    for labels in &data.labels {
        targets.extend(
            ActionUnit::ALL
                .iter()
                .map(|au| f64::from(u8::from(labels.contains(*au)))),
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights: Vec<f64> = (0..d * AU_COUNT)
        .map(|_| {
            if config.init_scale > 0.0 {
                rng.random_range(-config.init_scale..config.init_scale)
            } else {
                0.0
            }
        })
        .collect();
    let mut bias = [0.0; AU_COUNT];

    let mut loss_history = Vec::with_capacity(config.epochs + 1);
    for _ in 0..config.epochs {
        let obj = objective(&design, n, d, &targets, &weights, &bias, config.l2);
        loss_history.push(obj.loss);
        for (w, g) in weights.iter_mut().zip(&obj.grad_weights) {
            *w -= config.lr * g;
        }
        for (b, g) in bias.iter_mut().zip(&obj.grad_bias) {
            *b -= config.lr * g;
        }
    }
    loss_history.push(objective(&design, n, d, &targets, &weights, &bias, config.l2).loss);

    let mean: Vec<f64> = stats.iter().map(|(m, _)| *m).collect();
    let std: Vec<f64> = stats.iter().map(|(_, s)| s.unwrap_or(1.0)).collect();
    let heads = ActionUnit::ALL
        .into_iter()
        .map(|au| {
            let mut full = vec![0.0; full_len];
            for (r, &j) in active.iter().enumerate() {
                full[j] = weights[r * AU_COUNT + au.index()];
            }
            AuHead {
                au,
                weights: full,
                bias: bias[au.index()],
                threshold: DEFAULT_THRESHOLD,
            }
        })
        .collect();
    let model = AuModel::from_parts(mean, std, heads).map_err(|e| match e {
        DetectorError::BadModelFile(msg) => DetectorError::Diverged(msg),
        other => other,
    })?;
    Ok((
        model,
        TrainReport {
            loss_history,
            active_features: d,
        },
    ))
}
