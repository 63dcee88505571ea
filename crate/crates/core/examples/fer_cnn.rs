//! Train the four-convolution emotion CNN on synthetic 48x48 faces and
//! score it on a held-out split.
//!
//! ```bash
//! cargo run --release --example fer_cnn
//! ```

use facegame::ferlab::{
    balanced_sample, build_model, evaluate, train_cnn, CnnConfig, CnnTrainConfig, TENSOR_NAMES,
};
use facegame::synth::emotion_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = emotion_dataset("synthetic", 60, 48, 0.1, 1);
    let split = balanced_sample(&data, 40, 20, 1)?;
    let config = CnnConfig::default();
    let model = build_model(config, 1)?;
    println!(
        "{} parameters in {} tensors ({}), flatten length {}",
        model.parameter_count(),
        TENSOR_NAMES.len(),
        TENSOR_NAMES.join(" "),
        config.flatten_len()
    );

    // Small batches get off the uniform-output plateau faster on a
    // sample this size than the defaults (lr 0.5, batch 32).
    let train = CnnTrainConfig {
        epochs: 20,
        lr: 0.3,
        batch_size: 8,
        seed: 1,
    };
    let (model, history) = train_cnn(model, &split.train, &train)?;
    for (i, s) in history.iter().enumerate().step_by(4) {
        println!(
            "epoch {:>2}  loss {:.4}  accuracy {:.1}%",
            i + 1,
            s.loss,
            100.0 * s.accuracy
        );
    }
    println!(
        "train {:.1}%  held-out {:.1}% (chance 16.7%)",
        100.0 * evaluate(&model, &split.train)?,
        100.0 * evaluate(&model, &split.test)?
    );
    Ok(())
}
