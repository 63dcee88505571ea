//! Score a player's expression against a target and print the corrective
//! prescriptions a treatment-group player would see.
//!
//! ```bash
//! cargo run --example jaccard_prescriptions
//! ```

use facegame::explain::{describe, diff, prescribe, score, AuDictionary, ExplainError};
use facegame::model::{AuSet, Emotion};
use facegame::synth::emotion_signature;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dict = AuDictionary::builtin();
    let target = emotion_signature(Emotion::Surprise);
    // Brows and jaw are right, but the lids are not raised and the player
    // is frowning.
    let player = AuSet::from_codes([1u32, 2, 4, 26])?;

    println!("target {target}: {}", describe(target, &dict).join("; "));
    println!("player {player}: {}", describe(player, &dict).join("; "));
    let d = diff(player, target);
    println!(
        "correct {}  spurious {}  missing {}",
        d.correct, d.spurious, d.missing
    );
    println!("score {:.3}", score(player, target)?);
    for p in prescribe(player, target, &dict) {
        println!("  [{} {:>4}] {}", p.region, p.au.to_string(), p.text);
    }

    // Two empty sets have no overlap to measure.
    assert_eq!(
        score(AuSet::empty(), AuSet::empty()),
        Err(ExplainError::EmptyUniverse)
    );
    Ok(())
}
