mod common;

use std::time::Instant;

use common::{random_image, seeded};
use facegame::ferlab::{
    build_model, evaluate, one_hot, train_cnn, CnnConfig, CnnModel, CnnTrainConfig, Output,
    TENSOR_NAMES,
};
use facegame::model::{Emotion, GrayImage};
use facegame::synth::emotion_dataset;

fn reduced() -> CnnConfig {
    CnnConfig {
        input_size: 16,
        filters: [3, 4, 4, 5],
        hidden: 8,
    }
}

fn batch(n: usize, side: usize, seed: u64) -> (Vec<GrayImage>, Vec<Output>) {
    let mut rng = seeded(seed);
    let images = (0..n).map(|_| random_image(&mut rng, side)).collect();
    let targets = (0..n)
        .map(|i| one_hot(Emotion::ALL[(i * 5 + 1) % 6]))
        .collect();
    (images, targets)
}

/// Central difference of the loss along parameter `i` of tensor `t`.
fn central_difference(
    model: &CnnModel,
    images: &[GrayImage],
    targets: &[Output],
    t: usize,
    i: usize,
    h: f64,
) -> f64 {
    let mut m = model.clone();
    m.tensors_mut()[t][i] += h;
    let up = m.loss(images, targets).unwrap();
    m.tensors_mut()[t][i] -= 2.0 * h;
    let down = m.loss(images, targets).unwrap();
    (up - down) / (2.0 * h)
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-7)
}

/// Worst relative disagreement between the analytic gradient and central
/// differences over every parameter of tensor `t`, and the worst
/// disagreement between steps `h` and `h / 10`. ReLU and max-pooling are
/// piecewise linear, so a step that crosses a switch point gives a wrong
/// difference quotient; the second number shows no switch lies within `h`.
fn tensor_check(
    model: &CnnModel,
    images: &[GrayImage],
    targets: &[Output],
    t: usize,
) -> (f64, f64) {
    let h = 1e-4;
    let (_, grads) = model.backward(images, targets).unwrap();
    let (mut worst, mut kink) = (0.0f64, 0.0f64);
    for i in 0..model.tensors()[t].len() {
        let coarse = central_difference(model, images, targets, t, i, h);
        let fine = central_difference(model, images, targets, t, i, h / 10.0);
        worst = worst.max(relative(grads.tensors[t][i], coarse));
        kink = kink.max(relative(coarse, fine));
    }
    (worst, kink)
}

/// (model seed, batch seed) pairs whose evaluation points are at least `h`
/// away from every activation and pooling switch.
const SMOOTH_FIXTURES: [(u64, u64); 3] = [(0, 1), (4, 2), (5, 1)];

#[test]
fn every_tensor_passes_finite_differences() {
    for (model_seed, batch_seed) in SMOOTH_FIXTURES {
        let model = build_model(reduced(), model_seed).unwrap();
        let (images, targets) = batch(4, 16, batch_seed);
        for (t, name) in TENSOR_NAMES.iter().enumerate() {
            let (worst, kink) = tensor_check(&model, &images, &targets, t);
            assert!(kink < 1e-5, "{name}: fixture not smooth ({kink})");
            assert!(worst < 1e-4, "{name}: relative error {worst}");
        }
    }
}

#[test]
fn output_layer_gradient_is_sigmoid_minus_target() {
    // With the mean over n·6 outputs, d loss / d fc2.b = mean_i (σ(z) - y) / 6.
    let model = build_model(reduced(), 2).unwrap();
    let (images, targets) = batch(3, 16, 1);
    let outputs = model.forward(&images).unwrap();
    let (_, grads) = model.backward(&images, &targets).unwrap();
    for k in 0..6 {
        let expected: f64 = outputs
            .iter()
            .zip(&targets)
            .map(|(o, y)| o[k] - y[k])
            .sum::<f64>()
            / (3.0 * 6.0);
        assert!((grads.tensors[11][k] - expected).abs() < 1e-12);
    }
}

#[test]
fn default_network_flattens_to_2304() {
    let cfg = CnnConfig::default();
    assert_eq!(cfg.input_size, 48);
    assert_eq!(cfg.flatten_len(), 2304);
    assert_eq!(cfg.tensor_lens()[8], 96 * 2304);
    let model = build_model(cfg, 0).unwrap();
    let out = model.forward(&[GrayImage::filled(48, 48, 0.4)]).unwrap();
    assert!(out[0].iter().all(|p| (0.0..=1.0).contains(p)));
}

#[test]
fn shapes_hold_for_every_valid_input_size() {
    for size in (8..=64).step_by(8) {
        let cfg = CnnConfig {
            input_size: size,
            filters: [2, 2, 3, 3],
            hidden: 4,
        };
        assert_eq!(cfg.flatten_len(), (size / 8) * (size / 8) * 3);
        let model = build_model(cfg, 1).unwrap();
        let lens = cfg.tensor_lens();
        assert!(model.tensors().iter().zip(lens).all(|(t, n)| t.len() == n));
        assert_eq!(
            model
                .forward(&[GrayImage::filled(size, size, 0.2)])
                .unwrap()
                .len(),
            1
        );
        assert!(model
            .forward(&[GrayImage::filled(size + 8, size, 0.2)])
            .is_err());
    }
    for bad in [0, 4, 12, 50] {
        let cfg = CnnConfig {
            input_size: bad,
            ..CnnConfig::default()
        };
        assert!(build_model(cfg, 0).is_err(), "size {bad}");
    }
}

#[test]
fn full_batch_loss_decreases() {
    let model = build_model(reduced(), 3).unwrap();
    let (images, targets) = batch(8, 16, 2);
    let mut m = model;
    let mut losses = vec![m.loss(&images, &targets).unwrap()];
    for _ in 0..10 {
        let (_, g) = m.backward(&images, &targets).unwrap();
        m.apply_gradients(&g, 0.2);
        losses.push(m.loss(&images, &targets).unwrap());
    }
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

/// 32 synthetic emotion faces at 16x16: five per class plus one more
/// anger and disgust face.
fn overfit_fixture() -> facegame::ferlab::LabeledImageSet {
    let set = emotion_dataset("overfit", 6, 16, 0.1, 3);
    let mut keep: Vec<usize> = (0..6)
        .flat_map(|c| (0..5).map(move |i| c * 6 + i))
        .collect();
    keep.extend([5, 11]);
    set.subset("overfit-32", &keep)
}

#[test]
fn thirty_two_images_are_memorized() {
    let start = Instant::now();
    let data = overfit_fixture();
    assert_eq!(data.len(), 32);
    let cfg = CnnConfig {
        input_size: 16,
        filters: [8, 8, 16, 16],
        hidden: 32,
    };
    let train = CnnTrainConfig {
        epochs: 300,
        lr: 0.3,
        batch_size: 8,
        seed: 0,
    };
    let (model, history) = train_cnn(build_model(cfg, 0).unwrap(), &data, &train).unwrap();
    assert_eq!(evaluate(&model, &data).unwrap(), 1.0);
    assert!(history.last().unwrap().loss < history[0].loss);
    assert!(start.elapsed().as_secs() < 300);
}
