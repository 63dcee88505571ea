mod common;

use std::time::Instant;

use common::{naive_hog, random_image, seeded};
use facegame::features::{
    align_face, compute_hog, extract_features, AlignedFace, FeatureConfig, FEATURE_LEN, HOG_LEN,
};
use facegame::model::{GrayImage, Point};
use facegame::synth::{render_face, FaceParams};

#[test]
fn matches_naive_reference_on_random_images() {
    let mut rng = seeded(11);
    let images: Vec<GrayImage> = (0..20).map(|_| random_image(&mut rng, 112)).collect();
    let start = Instant::now();
    let fast: Vec<_> = images.iter().map(|img| compute_hog(img).unwrap()).collect();
    assert!(start.elapsed().as_secs_f64() < 5.0);
    for (img, hog) in images.iter().zip(&fast) {
        assert_eq!(hog.len(), HOG_LEN);
        let reference = naive_hog(img);
        assert_eq!(reference.len(), HOG_LEN);
        let worst = hog
            .values()
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "max deviation {worst}");
    }
}

#[test]
fn matches_naive_reference_on_structured_images() {
    // Exact bin-center angles and flat regions exercise the edge cases of
    // the vote split.
    let images = [
        GrayImage::from_fn(112, 112, |x, _| x as f64 / 111.0),
        GrayImage::from_fn(112, 112, |x, y| ((x + y) % 2) as f64),
        GrayImage::from_fn(112, 112, |x, y| if x > 40 && y < 70 { 1.0 } else { 0.2 }),
        render_face(&FaceParams::square(112)).image,
    ];
    for img in &images {
        let hog = compute_hog(img).unwrap();
        for (a, b) in hog.values().iter().zip(naive_hog(img)) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn blocks_are_l2_hys_normalized() {
    let img = random_image(&mut seeded(3), 112);
    let hog = compute_hog(&img).unwrap();
    for block in hog.blocks() {
        let norm: f64 = block.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert!(block.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

fn aligned_pixels(face: &AlignedFace) -> Vec<f64> {
    face.image.pixels().to_vec()
}

#[test]
fn features_are_invariant_to_translation_scale_and_roll() {
    let base = FaceParams::default();
    let reference = render_face(&base);
    let fv = extract_features(&reference.image, &reference.landmarks).unwrap();
    assert_eq!(fv.len(), FEATURE_LEN);
    let poses = [
        FaceParams {
            center: Point::new(74.0, 66.0),
            ..base.clone()
        },
        FaceParams {
            iod: 52.0,
            ..base.clone()
        },
        FaceParams {
            roll: 0.12,
            ..base.clone()
        },
    ];
    for pose in poses {
        let moved = render_face(&pose);
        let other = extract_features(&moved.image, &moved.landmarks).unwrap();
        // Landmark geometry is exactly invariant.
        let tail = |v: &[f64]| v[HOG_LEN..].to_vec();
        for (a, b) in tail(fv.values()).iter().zip(tail(other.values())) {
            assert!(
                (a - b).abs() < 1e-6,
                "landmark coordinate moved: {a} vs {b}"
            );
        }
        // Appearance is invariant up to resampling.
        let cfg = FeatureConfig::default();
        let align = |img, lm| aligned_pixels(&align_face(img, lm, cfg.size, cfg.iod).unwrap());
        let a = align(&reference.image, &reference.landmarks);
        let b = align(&moved.image, &moved.landmarks);
        let mean_abs = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
        assert!(mean_abs < 0.03, "aligned crops differ by {mean_abs}");
    }
}
