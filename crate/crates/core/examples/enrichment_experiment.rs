//! Does adding collected faces to a small base sample help? Train matched
//! pairs of CNNs with and without the extra data over several seeds.
//!
//! ```bash
//! cargo run --release --example enrichment_experiment
//! ```

use facegame::ferlab::{run_enrichment_experiment, CnnConfig, CnnTrainConfig, ExperimentConfig};
use facegame::synth::emotion_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A noisy base set and cleaner "collected" faces.
    let base = emotion_dataset("base", 40, 24, 0.3, 1);
    let extra = emotion_dataset("collected", 30, 24, 0.05, 2);
    let config = ExperimentConfig {
        seeds: vec![1, 2, 3],
        n_train: 10,
        n_test: 20,
        cnn: CnnConfig {
            input_size: 24,
            filters: [8, 8, 16, 16],
            hidden: 32,
        },
        train: CnnTrainConfig {
            epochs: 20,
            lr: 0.3,
            batch_size: 16,
            seed: 0,
        },
    };
    let report = run_enrichment_experiment(&base, &extra, &config)?;
    print!("{report}");
    println!(
        "difference in mean accuracy: {:+.3}",
        report.mean_with - report.mean_without
    );
    Ok(())
}
