//! Play a full treatment-group session in-process: six rounds, one per
//! emotion, five attempts each, with a player who follows the prescriptions.
//!
//! ```bash
//! cargo run --release --example game_session
//! ```

use std::sync::Arc;

use chrono::Utc;
use facegame::explain::AuDictionary;
use facegame::game::{
    AttemptSubmission, GameConfig, GameService, GroupPolicy, Store, TargetCatalog,
};
use facegame::model::{AuSet, Emotion, Group, TargetEntry};
use facegame::synth::{emotion_signature, reference_model, render_face, FaceParams};

/// One face per emotion, labeled with the units it was drawn with.
fn catalog() -> TargetCatalog {
    TargetCatalog::from_entries(Emotion::ALL.map(|e| {
        let face = render_face(&FaceParams::default().with_aus(emotion_signature(e)));
        TargetEntry::new(format!("{e}-01"), face.image, e, face.aus, face.landmarks)
            .expect("signatures are non-empty")
    }))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("training the reference detector on synthetic faces ...");
    let model = reference_model(400, 1)?;
    let store_dir = tempfile::tempdir()?;
    let service = GameService::new(
        GameConfig::default(),
        Arc::new(model),
        AuDictionary::builtin(),
        catalog(),
        Store::open(store_dir.path())?,
    )?;

    let session = service.create_session(GroupPolicy::Explicit(Group::Treatment), Some(7), None)?;
    println!(
        "session {} ({}), emotion order {:?}",
        session.session_id, session.group, session.emotion_order
    );
    for _ in 0..6 {
        let round = service.start_round(&session.session_id)?;
        let emotion = round
            .emotion
            .expect("emotion labels are revealed by default");
        println!("round {} ({emotion})", round.round_index);
        // The player starts with a neutral face and adds one unit the
        // feedback asked for per attempt.
        let mut shown = AuSet::empty();
        for _ in 0..5 {
            let face = render_face(&FaceParams::default().with_aus(shown));
            let res = service.submit_attempt(
                &round.round_id,
                AttemptSubmission {
                    frame: face.image.to_png(),
                    landmarks: face.landmarks,
                    captured_at: Utc::now(),
                },
            )?;
            let hint = res.prescriptions.first();
            println!(
                "  attempt {}: showed {shown:<16} score {:.2}  next: {}",
                res.attempt_index,
                res.score,
                hint.map_or("-", |p| p.text.as_str())
            );
            if let Some(p) = res.prescriptions.iter().find(|p| !shown.contains(p.au)) {
                shown.insert(p.au);
            } else if let Some(p) = hint {
                shown = shown.without(p.au);
            }
        }
    }

    let history = service.session_history(&session.session_id)?;
    let best: Vec<String> = history
        .iter()
        .map(|r| format!("{} {:.2}", r.emotion, r.best_score().unwrap_or(0.0)))
        .collect();
    println!("best per round: {}", best.join(", "));
    println!(
        "{} records in {}",
        service.store().records().len(),
        store_dir.path().display()
    );
    Ok(())
}
