//! Train the twenty logistic Action Unit heads on synthetic faces and
//! measure them on faces they have not seen.
//!
//! ```bash
//! cargo run --release --example train_au_detector
//! ```

use facegame::detector::{train, AuModel, TrainConfig};
use facegame::features::FeatureConfig;
use facegame::model::AU_COUNT;
use facegame::synth::{au_training_set, FaceParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let features = FeatureConfig::default();
    let base = FaceParams::default();
    let train_set = au_training_set(300, 1, &base, &features)?;
    let test_set = au_training_set(100, 2, &base, &features)?;

    let config = TrainConfig::default();
    let (model, report) = train(&train_set, &config)?;
    let first = report.loss_history[0].iter().sum::<f64>() / AU_COUNT as f64;
    let last = report.final_loss().iter().sum::<f64>() / AU_COUNT as f64;
    println!(
        "{} epochs, lr {}, l2 {}: mean head loss {first:.4} -> {last:.4} ({} active features)",
        config.epochs, config.lr, config.l2, report.active_features
    );

    let (mut units, mut exact) = (0, 0);
    for (f, labels) in test_set.features().iter().zip(test_set.labels()) {
        let predicted = model.detect_aus(f)?;
        units += AU_COUNT - predicted.symmetric_difference(*labels).len();
        exact += usize::from(predicted == *labels);
    }
    println!(
        "held-out: {:.1}% of units right, {:.1}% of sets exact",
        100.0 * units as f64 / (test_set.len() * AU_COUNT) as f64,
        100.0 * exact as f64 / test_set.len() as f64
    );

    let path = std::env::temp_dir().join("facegame-au-model.json");
    model.save(&path)?;
    assert_eq!(AuModel::load(&path)?, model);
    println!("model written to {}", path.display());
    Ok(())
}
