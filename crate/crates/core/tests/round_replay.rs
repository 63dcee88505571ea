mod common;

use std::process::Command;

use common::{converging_attempts, count_overlap, groups_present, replay_sessions};
use facegame::forge::{cooccurrence, export_dataset, filter_records, read_export};
use facegame::model::{Emotion, RoundRecord};
use facegame::statlab::{analysis_report, trajectories, Comparison};
use facegame::synth::emotion_signature;

const THIRD: f64 = 1.0 / 3.0;

#[test]
fn converging_attempts_reach_the_target() {
    for e in Emotion::ALL {
        let target = emotion_signature(e);
        let attempts = converging_attempts(target);
        assert_eq!(attempts[4], target);
        assert!(attempts[0].intersection(target).is_empty());
    }
}

#[test]
fn converging_player_scores_never_drop() {
    let dir = tempfile::tempdir().unwrap();
    let (records, sequences) = replay_sessions(dir.path(), 4);
    assert_eq!(records.len(), 4 * 6 * 5);
    assert_eq!(sequences.len(), 24);
    for s in &sequences {
        assert!(s.windows(2).all(|w| w[0] <= w[1]), "{s:?}");
        assert_eq!(s[4], 1.0);
    }
    assert_eq!(groups_present(&records), (true, true));
}

#[test]
fn analysis_report_sees_learning() {
    let dir = tempfile::tempdir().unwrap();
    let (records, sequences) = replay_sessions(dir.path(), 4);
    let expected_gain = sequences
        .iter()
        .map(|s| s[1..].iter().sum::<f64>() / 4.0 - s[0])
        .sum::<f64>()
        / sequences.len() as f64;
    assert!(expected_gain > 0.0);
    let report = analysis_report(&records);
    assert_eq!(report.games, 24);
    assert_eq!(report.skipped, 0);
    let Comparison::Tested(all) = &report.all else {
        panic!("overall comparison missing: {report}");
    };
    assert!((all.mean_b - all.mean_a - expected_gain).abs() < 1e-12);
    assert!(all.t > 0.0 && all.p < 0.05);
    assert_eq!(all.df, 23);
    assert!(matches!(report.control, Comparison::Tested(_)));
    assert!(matches!(report.treatment, Comparison::Tested(_)));
    assert_eq!(report.rates.unwrap().overall.improved, 24);
    let games = trajectories(&records).games;
    assert!(games.iter().all(|g| g.improved()));
}

/// Whether a record's score is at least 1/3, by integer counting.
fn at_least_a_third(r: &RoundRecord) -> bool {
    let (inter, union) = count_overlap(&r.player_aus.codes(), &r.target_aus.codes());
    3 * inter >= union
}

#[test]
fn threshold_keeps_the_boundary_and_drops_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let (records, _) = replay_sessions(dir.path(), 2);
    let boundary = records.iter().filter(|r| r.score == THIRD).count();
    assert!(boundary > 0, "fixture must contain a score of exactly 1/3");
    assert!(records.iter().any(|r| !at_least_a_third(r)));
    let kept = filter_records(&records, THIRD).unwrap();
    let expected: Vec<u64> = records
        .iter()
        .filter(|r| at_least_a_third(r))
        .map(|r| r.record_id)
        .collect();
    let got: Vec<u64> = kept.iter().map(|r| r.record_id).collect();
    assert_eq!(got, expected);
    assert_eq!(kept.iter().filter(|r| r.score == THIRD).count(), boundary);

    let out = dir.path().join("export");
    let manifest = export_dataset(&records, THIRD, dir.path(), &out).unwrap();
    assert_eq!(manifest.entries.len(), expected.len());
    assert!(manifest.missing_frames.is_empty());
    let back = read_export(&out).unwrap();
    assert_eq!(back.histogram, manifest.histogram);
    for e in &back.entries {
        assert!(out.join(e.frame_ref.as_ref().unwrap()).exists());
    }
    let m = cooccurrence(&records, THIRD).unwrap();
    assert_eq!(m.records_used, expected.len());
    let au_total: u64 = kept.iter().map(|r| r.player_aus.len() as u64).sum();
    assert_eq!(m.total(), au_total);
}

#[test]
fn record_log_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (records, _) = replay_sessions(dir.path(), 1);
    let reread = facegame::game::read_records(dir.path()).unwrap();
    assert_eq!(reread, records);
    // A second service on the same store keeps numbering after the log.
    let (more, _) = replay_sessions(dir.path(), 1);
    assert_eq!(more.len(), 60);
    let ids: Vec<u64> = more.iter().map(|r| r.record_id).collect();
    assert!(ids.windows(2).all(|w| w[0] < w[1]));
    assert_ne!(more[0].session_id, more[59].session_id);
}

fn facegame(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_facegame"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "facegame {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn command_line_tools_read_the_store() {
    let dir = tempfile::tempdir().unwrap();
    replay_sessions(dir.path(), 2);
    let store = dir.path().to_str().unwrap();
    let stats = facegame(&["stats", "--store", store]);
    assert!(stats.contains("games analysed: 12"), "{stats}");
    let export_dir = dir.path().join("ds");
    let export = facegame(&[
        "export",
        "--store",
        store,
        "--threshold",
        "0.3333",
        "--out",
        export_dir.to_str().unwrap(),
    ]);
    assert!(export.starts_with("exported "), "{export}");
    assert!(export_dir.join("manifest.jsonl").exists());
    let matrix = dir.path().join("matrix.txt");
    facegame(&[
        "cooccur",
        "--store",
        store,
        "--threshold",
        "0.3333",
        "--out",
        matrix.to_str().unwrap(),
    ]);
    assert!(matrix.exists() && matrix.with_extension("png").exists());
}
