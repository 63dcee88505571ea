//! Turn a record log into a training dataset: keep attempts that scored at
//! least a third, copy their frames, and tabulate which units players used
//! for each emotion.
//!
//! ```bash
//! cargo run --release --example dataset_forge
//! ```

use std::sync::Arc;

use chrono::Utc;
use facegame::explain::AuDictionary;
use facegame::forge::{cooccurrence, export_dataset, heatmap_text, render_heatmap};
use facegame::game::{
    read_records, AttemptSubmission, GameConfig, GameService, GroupPolicy, Store, TargetCatalog,
};
use facegame::model::{Emotion, TargetEntry};
use facegame::synth::{emotion_signature, random_au_set, reference_model, render_face, FaceParams};
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = TargetCatalog::from_entries(Emotion::ALL.map(|e| {
        let face = render_face(&FaceParams::default().with_aus(emotion_signature(e)));
        TargetEntry::new(format!("{e}-01"), face.image, e, face.aus, face.landmarks)
            .expect("non-empty")
    }));
    let dir = tempfile::tempdir()?;
    let store = dir.path().join("store");
    let service = GameService::new(
        GameConfig::default(),
        Arc::new(reference_model(400, 1)?),
        AuDictionary::builtin(),
        catalog,
        Store::open(&store)?,
    )?;

    // Players who mix the target's units with random ones.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..4 {
        let session = service.create_session(GroupPolicy::Alternating, None, None)?;
        for _ in 0..6 {
            let round = service.start_round(&session.session_id)?;
            let target = emotion_signature(round.emotion.expect("revealed"));
            for _ in 0..5 {
                let shown = random_au_set(&mut rng, 0.1)
                    .union(random_au_set(&mut rng, 0.6).intersection(target));
                let face = render_face(&FaceParams::default().with_aus(shown));
                service.submit_attempt(
                    &round.round_id,
                    AttemptSubmission {
                        frame: face.image.to_png(),
                        landmarks: face.landmarks,
                        captured_at: Utc::now(),
                    },
                )?;
            }
        }
    }

    let records = read_records(&store)?;
    let threshold = 1.0 / 3.0;
    let manifest = export_dataset(&records, threshold, &store, &dir.path().join("export"))?;
    println!(
        "kept {} of {} attempts with score >= 1/3",
        manifest.entries.len(),
        records.len()
    );
    for e in Emotion::ALL {
        println!("  {:<10} {}", e.label(), manifest.histogram.get(e));
    }

    let matrix = cooccurrence(&records, threshold)?;
    print!("{}", heatmap_text(&matrix));
    for e in Emotion::ALL {
        if let Some(au) = matrix.argmax(e) {
            println!(
                "most used for {e}: {au} (signature {})",
                emotion_signature(e)
            );
        }
    }
    let png = render_heatmap(&matrix, &dir.path().join("matrix.txt"))?;
    println!("heatmap rendered to {}", png.display());
    Ok(())
}
