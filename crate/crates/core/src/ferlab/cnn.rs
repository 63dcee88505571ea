//! The shallow emotion CNN.
//!
//! ```text
//! input s x s x 1
//! conv 3x3 same (f1) -> ReLU -> maxpool 2x2
//! conv 3x3 same (f2) -> ReLU -> maxpool 2x2
//! conv 3x3 same (f3) -> ReLU -> maxpool 2x2
//! conv 3x3 same (f4) -> ReLU -> flatten (s/8 * s/8 * f4)
//! dense (hidden) -> ReLU
//! dense (6) -> sigmoid
//! ```
//!
//! Parameters live in twelve flat tensors in the order
//! `conv1.w, conv1.b, ..., conv4.w, conv4.b, fc1.w, fc1.b, fc2.w, fc2.b`.
//! Convolution weights are `out x (in * 9)` with the kernel index
//! `in * 9 + ky * 3 + kx`; dense weights are `out x in`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{decode_f64, encode_f64, F64_ENCODING};
use crate::linalg::gemm;
use crate::model::{Emotion, GrayImage, EMOTION_COUNT};

use super::FerError;

pub const CNN_VERSION: &str = "facegame-cnn/1";

/// Number of convolution layers.
pub const CONV_LAYERS: usize = 4;
/// Number of parameter tensors.
pub const TENSOR_COUNT: usize = 2 * CONV_LAYERS + 4;

/// One output per emotion, in encoding order.
pub type Output = [f64; EMOTION_COUNT];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnConfig {
    /// Side of the square grayscale input; must be a positive multiple of 8.
    pub input_size: usize,
    pub filters: [usize; CONV_LAYERS],
    pub hidden: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            input_size: 48,
            filters: [32, 32, 64, 64],
            hidden: 96,
        }
    }
}

impl CnnConfig {
    fn validate(&self) -> Result<(), FerError> {
        if self.input_size == 0 || !self.input_size.is_multiple_of(8) {
            return Err(FerError::BadInputSize(self.input_size));
        }
        if self.filters.contains(&0) || self.hidden == 0 {
            return Err(FerError::BadConfig("layer widths must be positive".into()));
        }
        Ok(())
    }

    /// Input side of conv layer `l` (pooling halves it after layers 0–2).
    pub fn conv_side(&self, l: usize) -> usize {
        self.input_size >> l.min(3)
    }

    pub fn flatten_len(&self) -> usize {
        let side = self.input_size / 8;
        side * side * self.filters[CONV_LAYERS - 1]
    }

    fn conv_in(&self, l: usize) -> usize {
        if l == 0 {
            1
        } else {
            self.filters[l - 1]
        }
    }

    /// Element count of every parameter tensor, in tensor order.
    pub fn tensor_lens(&self) -> [usize; TENSOR_COUNT] {
        let mut lens = [0; TENSOR_COUNT];
        for l in 0..CONV_LAYERS {
            lens[2 * l] = self.filters[l] * self.conv_in(l) * 9;
            lens[2 * l + 1] = self.filters[l];
        }
        lens[8] = self.hidden * self.flatten_len();
        lens[9] = self.hidden;
        lens[10] = EMOTION_COUNT * self.hidden;
        lens[11] = EMOTION_COUNT;
        lens
    }

    /// Fan-in of the unit fed by each weight tensor.
    fn fan_in(&self, tensor: usize) -> usize {
        match tensor {
            t if t < 2 * CONV_LAYERS => self.conv_in(t / 2) * 9,
            8 | 9 => self.flatten_len(),
            _ => self.hidden,
        }
    }
}

pub const TENSOR_NAMES: [&str; TENSOR_COUNT] = [
    "conv1.w", "conv1.b", "conv2.w", "conv2.b", "conv3.w", "conv3.b", "conv4.w", "conv4.b",
    "fc1.w", "fc1.b", "fc2.w", "fc2.b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    config: CnnConfig,
    tensors: Vec<Vec<f64>>,
}

/// Gradient of the loss, shaped like the model's tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(config: &CnnConfig) -> Gradients {
        Gradients {
            tensors: config.tensor_lens().iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// He-uniform weights (`U(-sqrt(6 / fan_in), +)`) and zero biases, drawn
/// from `seed`.
pub fn build_model(config: CnnConfig, seed: u64) -> Result<CnnModel, FerError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = config
        .tensor_lens()
        .iter()
        .enumerate()
        .map(|(t, &n)| {
            if t % 2 == 1 {
                vec![0.0; n]
            } else {
                let limit = (6.0 / config.fan_in(t) as f64).sqrt();
                (0..n).map(|_| rng.random_range(-limit..limit)).collect()
            }
        })
        .collect();
    Ok(CnnModel { config, tensors })
}

pub fn one_hot(emotion: Emotion) -> Output {
    let mut y = [0.0; EMOTION_COUNT];
    y[emotion.index()] = 1.0;
    y
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy from a logit: `softplus(z) - y z`.
fn bce(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

fn im2col(input: &[f64], c: usize, side: usize, cols: &mut [f64]) {
    let hw = side * side;
    for ci in 0..c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..side {
                    let sy = y as isize + ky as isize - 1;
                    for x in 0..side {
                        let sx = x as isize + kx as isize - 1;
                        row[y * side + x] =
                            if sy >= 0 && sx >= 0 && (sy as usize) < side && (sx as usize) < side {
                                input[ci * hw + sy as usize * side + sx as usize]
                            } else {
                                0.0
                            };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`].
fn col2im(cols: &[f64], c: usize, side: usize, out: &mut [f64]) {
    let hw = side * side;
    out.fill(0.0);
    for ci in 0..c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..side {
                    let sy = y as isize + ky as isize - 1;
                    for x in 0..side {
                        let sx = x as isize + kx as isize - 1;
                        if sy >= 0 && sx >= 0 && (sy as usize) < side && (sx as usize) < side {
                            out[ci * hw + sy as usize * side + sx as usize] += row[y * side + x];
                        }
                    }
                }
            }
        }
    }
}

/// 2x2 max pooling; returns the pooled map and, per output, the flat index
/// of the winning input (first maximum on ties).
fn max_pool(input: &[f64], c: usize, side: usize) -> (Vec<f64>, Vec<usize>) {
    let half = side / 2;
    let mut out = Vec::with_capacity(c * half * half);
    let mut idx = Vec::with_capacity(c * half * half);
    for ci in 0..c {
        for y in 0..half {
            for x in 0..half {
                let mut best = ci * side * side + 2 * y * side + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = ci * side * side + (2 * y + dy) * side + 2 * x + dx;
                    if input[i] > input[best] {
                        best = i;
                    }
                }
                out.push(input[best]);
                idx.push(best);
            }
        }
    }
    (out, idx)
}

struct ConvTrace {
    cols: Vec<f64>,
    /// Post-ReLU activations before pooling.
    act: Vec<f64>,
    pool_idx: Option<Vec<usize>>,
}

struct Trace {
    convs: Vec<ConvTrace>,
    flat: Vec<f64>,
    hidden: Vec<f64>,
    logits: Output,
}

impl CnnModel {
    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Vec<f64>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.tensors
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Vec::len).sum()
    }

    fn check_image(&self, img: &GrayImage) -> Result<(), FerError> {
        let s = self.config.input_size;
        if img.width() != s || img.height() != s {
            return Err(FerError::ShapeMismatch {
                expected: s,
                width: img.width(),
                height: img.height(),
            });
        }
        Ok(())
    }

    fn trace(&self, img: &GrayImage) -> Trace {
        let cfg = &self.config;
        let mut x = img.pixels().to_vec();
        let mut convs = Vec::with_capacity(CONV_LAYERS);
        for l in 0..CONV_LAYERS {
            let (cin, cout, side) = (cfg.conv_in(l), cfg.filters[l], cfg.conv_side(l));
            let hw = side * side;
            let mut cols = vec![0.0; cin * 9 * hw];
            im2col(&x, cin, side, &mut cols);
            let bias = &self.tensors[2 * l + 1];
            let mut act: Vec<f64> = (0..cout * hw).map(|i| bias[i / hw]).collect();
            gemm(
                cout,
                cin * 9,
                hw,
                &self.tensors[2 * l],
                false,
                &cols,
                false,
                1.0,
                &mut act,
            );
            for v in &mut act {
                *v = v.max(0.0);
            }
            let pool_idx = if l + 1 < CONV_LAYERS {
                let (pooled, idx) = max_pool(&act, cout, side);
                x = pooled;
                Some(idx)
            } else {
                x = act.clone();
                None
            };
            convs.push(ConvTrace {
                cols,
                act,
                pool_idx,
            });
        }
        let flat = x;
        let mut hidden = self.tensors[9].clone();
        gemm(
            cfg.hidden,
            flat.len(),
            1,
            &self.tensors[8],
            false,
            &flat,
            false,
            1.0,
            &mut hidden,
        );
        for v in &mut hidden {
            *v = v.max(0.0);
        }
        let mut logits = [0.0; EMOTION_COUNT];
        logits.copy_from_slice(&self.tensors[11]);
        gemm(
            EMOTION_COUNT,
            cfg.hidden,
            1,
            &self.tensors[10],
            false,
            &hidden,
            false,
            1.0,
            &mut logits,
        );
        Trace {
            convs,
            flat,
            hidden,
            logits,
        }
    }

    /// Sigmoid outputs for each image.
    pub fn forward(&self, batch: &[GrayImage]) -> Result<Vec<Output>, FerError> {
        batch.iter().try_for_each(|img| self.check_image(img))?;
        Ok(batch
            .iter()
            .map(|img| self.trace(img).logits.map(sigmoid))
            .collect())
    }

    /// Most probable emotion per image; ties go to the lower encoding.
    pub fn predict(&self, batch: &[GrayImage]) -> Result<Vec<Emotion>, FerError> {
        Ok(self.forward(batch)?.iter().map(argmax).collect())
    }

    fn check_targets(&self, batch: &[GrayImage], targets: &[Output]) -> Result<(), FerError> {
        if batch.len() != targets.len() {
            return Err(FerError::TargetCount {
                images: batch.len(),
                targets: targets.len(),
            });
        }
        if batch.is_empty() {
            return Err(FerError::EmptyBatch);
        }
        batch.iter().try_for_each(|img| self.check_image(img))
    }

    /// Mean binary cross-entropy over every image and every output unit.
    pub fn loss(&self, batch: &[GrayImage], targets: &[Output]) -> Result<f64, FerError> {
        self.check_targets(batch, targets)?;
        let total: f64 = batch
            .iter()
            .zip(targets)
            .map(|(img, y)| {
                let z = self.trace(img).logits;
                (0..EMOTION_COUNT).map(|k| bce(z[k], y[k])).sum::<f64>()
            })
            .sum();
        Ok(total / (batch.len() * EMOTION_COUNT) as f64)
    }

    /// Loss and its exact gradient with respect to every parameter.
    pub fn backward(
        &self,
        batch: &[GrayImage],
        targets: &[Output],
    ) -> Result<(f64, Gradients), FerError> {
        self.check_targets(batch, targets)?;
        let cfg = &self.config;
        let scale = 1.0 / (batch.len() * EMOTION_COUNT) as f64;
        let mut grads = Gradients::zeros(cfg);
        let mut loss = 0.0;
        for (img, y) in batch.iter().zip(targets) {
            let tr = self.trace(img);
            let mut dz2 = [0.0; EMOTION_COUNT];
            for k in 0..EMOTION_COUNT {
                loss += bce(tr.logits[k], y[k]);
                dz2[k] = (sigmoid(tr.logits[k]) - y[k]) * scale;
            }
            let g = &mut grads.tensors;
            // Output layer.
            gemm(
                EMOTION_COUNT,
                1,
                cfg.hidden,
                &dz2,
                false,
                &tr.hidden,
                false,
                1.0,
                &mut g[10],
            );
            for k in 0..EMOTION_COUNT {
                g[11][k] += dz2[k];
            }
            let mut dh = vec![0.0; cfg.hidden];
            gemm(
                cfg.hidden,
                EMOTION_COUNT,
                1,
                &self.tensors[10],
                true,
                &dz2,
                false,
                0.0,
                &mut dh,
            );
            for (d, h) in dh.iter_mut().zip(&tr.hidden) {
                if *h <= 0.0 {
                    *d = 0.0;
                }
            }
            // Hidden layer.
            let f = tr.flat.len();
            gemm(
                cfg.hidden, 1, f, &dh, false, &tr.flat, false, 1.0, &mut g[8],
            );
            for (b, d) in g[9].iter_mut().zip(&dh) {
                *b += d;
            }
            let mut dx = vec![0.0; f];
            gemm(
                f,
                cfg.hidden,
                1,
                &self.tensors[8],
                true,
                &dh,
                false,
                0.0,
                &mut dx,
            );

            for l in (0..CONV_LAYERS).rev() {
                let (cin, cout, side) = (cfg.conv_in(l), cfg.filters[l], cfg.conv_side(l));
                let hw = side * side;
                let ct = &tr.convs[l];
                let mut dz = match &ct.pool_idx {
                    Some(idx) => {
                        let mut d = vec![0.0; cout * hw];
                        for (&i, &v) in idx.iter().zip(&dx) {
                            d[i] += v;
                        }
                        d
                    }
                    None => dx,
                };
                for (d, a) in dz.iter_mut().zip(&ct.act) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
                gemm(
                    cout,
                    hw,
                    cin * 9,
                    &dz,
                    false,
                    &ct.cols,
                    true,
                    1.0,
                    &mut g[2 * l],
                );
                for (o, b) in g[2 * l + 1].iter_mut().enumerate() {
                    *b += dz[o * hw..(o + 1) * hw].iter().sum::<f64>();
                }
                if l == 0 {
                    break;
                }
                let mut dcols = vec![0.0; cin * 9 * hw];
                gemm(
                    cin * 9,
                    cout,
                    hw,
                    &self.tensors[2 * l],
                    true,
                    &dz,
                    false,
                    0.0,
                    &mut dcols,
                );
                dx = vec![0.0; cin * hw];
                col2im(&dcols, cin, side, &mut dx);
            }
        }
        Ok((loss * scale, grads))
    }

    /// `p -= lr * g` for every parameter.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (p, g) in self.tensors.iter_mut().zip(&grads.tensors) {
            for (w, d) in p.iter_mut().zip(g) {
                *w -= lr * d;
            }
        }
    }

    pub fn to_json(&self) -> String {
        let file = CnnFile {
            version: CNN_VERSION.to_string(),
            config: self.config,
            encoding: F64_ENCODING.to_string(),
            tensors: self.tensors.iter().map(|t| encode_f64(t)).collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<CnnModel, FerError> {
        let bad = FerError::BadModelFile;
        let probe: serde_json::Value =
            serde_json::from_str(text).map_err(|e| bad(format!("not a model file: {e}")))?;
        match probe.get("version").and_then(|v| v.as_str()) {
            Some(CNN_VERSION) => {}
            other => {
                return Err(bad(format!(
                    "version mismatch: expected {CNN_VERSION}, found {}",
                    other.unwrap_or("none")
                )))
            }
        }
        let file: CnnFile =
            serde_json::from_value(probe).map_err(|e| bad(format!("malformed model file: {e}")))?;
        if file.encoding != F64_ENCODING {
            return Err(bad(format!(
                "unsupported array encoding {:?}",
                file.encoding
            )));
        }
        file.config.validate()?;
        let lens = file.config.tensor_lens();
        if file.tensors.len() != TENSOR_COUNT {
            return Err(bad(format!(
                "expected {TENSOR_COUNT} tensors, found {}",
                file.tensors.len()
            )));
        }
        let tensors = file
            .tensors
            .iter()
            .zip(lens)
            .zip(TENSOR_NAMES)
            .map(|((t, n), name)| decode_f64(t, n).map_err(|e| bad(format!("{name}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if tensors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter".into()));
        }
        Ok(CnnModel {
            config: file.config,
            tensors,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), FerError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| FerError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &std::path::Path) -> Result<CnnModel, FerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FerError::Io(format!("{}: {e}", path.display())))?;
        CnnModel::from_json(&text)
    }
}

pub(crate) fn argmax(o: &Output) -> Emotion {
    let mut best = 0;
    for k in 1..EMOTION_COUNT {
        if o[k] > o[best] {
            best = k;
        }
    }
    Emotion::ALL[best]
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CnnFile {
    version: String,
    config: CnnConfig,
    encoding: String,
    tensors: Vec<String>,
}
