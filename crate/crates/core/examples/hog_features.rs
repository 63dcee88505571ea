//! Run the feature pipeline on a synthetic face: align on the eyes, mask to
//! the landmark hull, then HOG plus normalized landmarks.
//!
//! ```bash
//! cargo run --example hog_features
//! ```

use facegame::features::{
    align_face, compute_hog, extract_features, mask_face, FeatureConfig, FEATURE_LEN, HOG_LEN,
};
use facegame::model::Emotion;
use facegame::synth::{emotion_signature, render_face, FaceParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let face = render_face(&FaceParams::default().with_aus(emotion_signature(Emotion::Happiness)));
    println!(
        "input {}x{}, {} landmarks",
        face.image.width(),
        face.image.height(),
        face.landmarks.points().len()
    );

    let config = FeatureConfig::default();
    let aligned = align_face(&face.image, &face.landmarks, config.size, config.iod)?;
    let masked = mask_face(&aligned);
    let hog = compute_hog(&masked.image)?;
    assert_eq!(hog.len(), HOG_LEN);
    let nonzero = hog.values().iter().filter(|v| **v > 0.0).count();
    let max = hog.values().iter().copied().fold(0.0, f64::max);
    println!(
        "HOG: {} values, {nonzero} non-zero, max {max:.3} (clipped at 0.2 before renormalizing)",
        hog.len()
    );

    let features = extract_features(&face.image, &face.landmarks)?;
    assert_eq!(features.len(), FEATURE_LEN);
    let tail = &features.values()[HOG_LEN..HOG_LEN + 4];
    println!(
        "feature vector: {} values; first landmark coordinates {tail:.3?}",
        features.len()
    );

    let out = std::env::temp_dir().join("facegame-aligned.png");
    std::fs::write(&out, masked.image.to_png())?;
    println!("aligned, masked face written to {}", out.display());
    Ok(())
}
