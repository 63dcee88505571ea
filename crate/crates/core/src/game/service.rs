use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};

use base64::Engine;
use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::AuClassifier;
use crate::explain::{self, AuDictionary, Prescription};
use crate::features::{extract_features_with, FeatureConfig};
use crate::model::{
    AuSet, Emotion, GrayImage, Group, LandmarkSet, RoundRecord, TargetEntry, EMOTION_COUNT,
};

use super::catalog::{ingest_target, TargetCatalog};
use super::store::{PipelineFailure, SessionEvent, Store};
use super::GameError;

/// Attempts allowed per round unless configured otherwise.
pub const DEFAULT_ATTEMPTS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Six rounds per session, one per emotion.
    Experiment,
    /// Unbounded rounds over any target.
    Free,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Experiment => "experiment",
            Mode::Free => "free",
        })
    }
}

impl FromStr for Mode {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "experiment" => Ok(Mode::Experiment),
            "free" => Ok(Mode::Free),
            _ => Err(GameError::InvalidRequest(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub attempts_per_round: u32,
    pub mode: Mode,
    /// Root of every per-session seed.
    pub seed: u64,
    /// Whether round payloads carry the target's emotion label.
    pub reveal_emotion: bool,
    pub features: FeatureConfig,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            attempts_per_round: DEFAULT_ATTEMPTS,
            mode: Mode::Experiment,
            seed: 0,
            reveal_emotion: true,
            features: FeatureConfig::default(),
        }
    }
}

/// How a new session's group is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupPolicy {
    Explicit(Group),
    /// Assigns whichever group is currently smaller, control first, so the
    /// two groups never differ by more than one.
    Alternating,
    /// A fair coin per session, drawn from `seed` on a stream keyed by the
    /// session ordinal.
    SeededRandom(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundStatus {
    Open,
    Exhausted,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub group: Group,
    pub seed: u64,
    pub emotion_order: Vec<Emotion>,
    pub created_at: DateTime<Utc>,
    pub player_meta: Option<serde_json::Value>,
}

/// What the client sees when a round starts; the target's AU set is not
/// part of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundView {
    pub round_id: String,
    pub round_index: u32,
    pub target_id: String,
    /// Base64 of the target image as PNG.
    pub target_image: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emotion: Option<Emotion>,
    pub attempts_remaining: u32,
}

/// One attempt as sent by the client.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptSubmission {
    /// Encoded image (PNG or JPEG).
    pub frame: Vec<u8>,
    pub landmarks: LandmarkSet,
    pub captured_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttemptResult {
    pub record_id: u64,
    pub round_id: String,
    pub attempt_index: u32,
    pub score: f64,
    pub correct: AuSet,
    pub spurious: AuSet,
    pub missing: AuSet,
    /// Always empty for the control group.
    pub prescriptions: Vec<Prescription>,
    pub retry_allowed: bool,
    pub attempts_remaining: u32,
    pub status: RoundStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundSummary {
    pub round_id: String,
    pub round_index: u32,
    pub target_id: String,
    pub emotion: Emotion,
    pub target_aus: AuSet,
    pub status: RoundStatus,
    pub records: Vec<RoundRecord>,
}

impl RoundSummary {
    pub fn best_score(&self) -> Option<f64> {
        self.records.iter().map(|r| r.score).reduce(f64::max)
    }
}

struct RoundState {
    round_id: String,
    round_index: u32,
    target: Arc<TargetEntry>,
    records: Vec<RoundRecord>,
    status: RoundStatus,
}

struct SessionState {
    info: SessionInfo,
    rounds: Vec<RoundState>,
}

#[derive(Default)]
struct Registry {
    ordinal: u64,
    groups: [usize; 2],
}

/// The game engine. Cheap to share behind an `Arc`; each session is
/// mutated under its own lock so different sessions proceed in parallel.
pub struct GameService {
    config: GameConfig,
    classifier: Arc<dyn AuClassifier>,
    dictionary: AuDictionary,
    catalog: RwLock<TargetCatalog>,
    store: Store,
    registry: Mutex<Registry>,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionState>>>>,
    rounds: RwLock<HashMap<String, String>>,
}

fn group_slot(group: Group) -> usize {
    match group {
        Group::Control => 0,
        Group::Treatment => 1,
    }
}

/// Deterministic per-session seed: stream `ordinal` of the service seed.
fn session_seed(root: u64, ordinal: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(ordinal);
    rng.random()
}

/// The experiment's emotion order for a session seed.
pub fn emotion_order(seed: u64) -> Vec<Emotion> {
    let mut order = Emotion::ALL.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

fn frame_extension(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(&[0xFF, 0xD8]) {
        "jpg"
    } else {
        "png"
    }
}

impl GameService {
    /// Builds the service and replays any sessions already in the store.
    pub fn new(
        config: GameConfig,
        classifier: Arc<dyn AuClassifier>,
        dictionary: AuDictionary,
        catalog: TargetCatalog,
        store: Store,
    ) -> Result<GameService, GameError> {
        if config.attempts_per_round == 0 {
            return Err(GameError::InvalidRequest(
                "attempts per round must be positive".into(),
            ));
        }
        let service = GameService {
            config,
            classifier,
            dictionary,
            catalog: RwLock::new(catalog),
            store,
            registry: Mutex::new(Registry::default()),
            sessions: RwLock::new(HashMap::new()),
            rounds: RwLock::new(HashMap::new()),
        };
        service.replay()?;
        Ok(service)
    }

    fn replay(&self) -> Result<(), GameError> {
        let mut registry = self.registry.lock().expect("registry lock");
        let mut sessions = self.sessions.write().expect("sessions lock");
        let mut rounds = self.rounds.write().expect("rounds lock");
        let catalog = self.catalog.read().expect("catalog lock");
        let mut states: HashMap<String, SessionState> = HashMap::new();
        for event in self.store.session_events().iter() {
            match event.clone() {
                SessionEvent::Created {
                    session_id,
                    group,
                    seed,
                    emotion_order,
                    created_at,
                    player_meta,
                } => {
                    registry.ordinal += 1;
                    registry.groups[group_slot(group)] += 1;
                    let info = SessionInfo {
                        session_id: session_id.clone(),
                        group,
                        seed,
                        emotion_order,
                        created_at,
                        player_meta,
                    };
                    states.insert(
                        session_id,
                        SessionState {
                            info,
                            rounds: Vec::new(),
                        },
                    );
                }
                SessionEvent::RoundStarted {
                    session_id,
                    round_id,
                    round_index,
                    target_id,
                    ..
                } => {
                    let state = states.get_mut(&session_id).ok_or_else(|| {
                        GameError::Storage(format!("round {round_id} of unknown session"))
                    })?;
                    let target = catalog
                        .get(&target_id)
                        .ok_or_else(|| {
                            GameError::Storage(format!(
                                "round {round_id} uses unknown target {target_id}"
                            ))
                        })?
                        .clone();
                    if let Some(prev) = state.rounds.last_mut() {
                        if prev.status == RoundStatus::Open {
                            prev.status = RoundStatus::Closed;
                        }
                    }
                    rounds.insert(round_id.clone(), session_id);
                    state.rounds.push(RoundState {
                        round_id,
                        round_index,
                        target,
                        records: Vec::new(),
                        status: RoundStatus::Open,
                    });
                }
            }
        }
        for record in self.store.records().iter() {
            let round = states
                .get_mut(&record.session_id)
                .and_then(|s| s.rounds.iter_mut().find(|r| r.round_id == record.round_id))
                .ok_or_else(|| {
                    GameError::Storage(format!("record {} of unknown round", record.record_id))
                })?;
            round.records.push(record.clone());
            if round.records.len() as u32 >= self.config.attempts_per_round
                && round.status == RoundStatus::Open
            {
                round.status = RoundStatus::Exhausted;
            }
        }
        for (id, state) in states {
            sessions.insert(id, Arc::new(Mutex::new(state)));
        }
        Ok(())
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn dictionary(&self) -> &AuDictionary {
        &self.dictionary
    }

    pub fn create_session(
        &self,
        policy: GroupPolicy,
        seed: Option<u64>,
        player_meta: Option<serde_json::Value>,
    ) -> Result<SessionInfo, GameError> {
        let mut registry = self.registry.lock().expect("registry lock");
        let ordinal = registry.ordinal;
        let group = match policy {
            GroupPolicy::Explicit(g) => g,
            GroupPolicy::Alternating => {
                if registry.groups[0] <= registry.groups[1] {
                    Group::Control
                } else {
                    Group::Treatment
                }
            }
            GroupPolicy::SeededRandom(s) => {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                rng.set_stream(ordinal);
                if rng.random_bool(0.5) {
                    Group::Treatment
                } else {
                    Group::Control
                }
            }
        };
        let seed = seed.unwrap_or_else(|| session_seed(self.config.seed, ordinal));
        let info = SessionInfo {
            session_id: format!("S{:06}", ordinal + 1),
            group,
            seed,
            emotion_order: emotion_order(seed),
            created_at: Utc::now(),
            player_meta,
        };
        self.store.append_event(SessionEvent::Created {
            session_id: info.session_id.clone(),
            group,
            seed,
            emotion_order: info.emotion_order.clone(),
            created_at: info.created_at,
            player_meta: info.player_meta.clone(),
        })?;
        registry.ordinal += 1;
        registry.groups[group_slot(group)] += 1;
        self.sessions.write().expect("sessions lock").insert(
            info.session_id.clone(),
            Arc::new(Mutex::new(SessionState {
                info: info.clone(),
                rounds: Vec::new(),
            })),
        );
        Ok(info)
    }

    fn session(&self, session_id: &str) -> Result<Arc<Mutex<SessionState>>, GameError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(session_id)
            .cloned()
            .ok_or_else(|| GameError::UnknownSession(session_id.to_string()))
    }

    pub fn session_info(&self, session_id: &str) -> Result<SessionInfo, GameError> {
        Ok(self
            .session(session_id)?
            .lock()
            .expect("session lock")
            .info
            .clone())
    }

    /// Number of sessions in each group, control first.
    pub fn group_counts(&self) -> [usize; 2] {
        self.registry.lock().expect("registry lock").groups
    }

    /// Opens the session's next round, closing the previous one.
    pub fn start_round(&self, session_id: &str) -> Result<RoundView, GameError> {
        let session = self.session(session_id)?;
        let mut state = session.lock().expect("session lock");
        let round_index = state.rounds.len() as u32 + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(state.info.seed);
        rng.set_stream(u64::from(round_index));

        let target = {
            let catalog = self.catalog.read().expect("catalog lock");
            match self.config.mode {
                Mode::Experiment => {
                    if state.rounds.len() >= EMOTION_COUNT {
                        return Err(GameError::SessionComplete(session_id.to_string()));
                    }
                    let emotion = state.info.emotion_order[state.rounds.len()];
                    let candidates = catalog.for_emotion(emotion);
                    (*candidates
                        .get(rng.random_range(0..candidates.len().max(1)))
                        .ok_or(GameError::NoTargetForEmotion(emotion))?)
                    .clone()
                }
                Mode::Free => {
                    let all = catalog.targets();
                    all.get(rng.random_range(0..all.len().max(1)))
                        .ok_or(GameError::NoTargets)?
                        .clone()
                }
            }
        };

        let round_id = format!("{session_id}-R{round_index}");
        self.store.append_event(SessionEvent::RoundStarted {
            session_id: session_id.to_string(),
            round_id: round_id.clone(),
            round_index,
            target_id: target.target_id.clone(),
            started_at: Utc::now(),
        })?;
        if let Some(prev) = state.rounds.last_mut() {
            if prev.status == RoundStatus::Open {
                prev.status = RoundStatus::Closed;
            }
        }
        self.rounds
            .write()
            .expect("rounds lock")
            .insert(round_id.clone(), session_id.to_string());
        let view = RoundView {
            round_id: round_id.clone(),
            round_index,
            target_id: target.target_id.clone(),
            target_image: base64::engine::general_purpose::STANDARD.encode(target.image.to_png()),
            emotion: self.config.reveal_emotion.then_some(target.emotion),
            attempts_remaining: self.config.attempts_per_round,
        };
        state.rounds.push(RoundState {
            round_id,
            round_index,
            target,
            records: Vec::new(),
            status: RoundStatus::Open,
        });
        Ok(view)
    }

    /// Scores one attempt. Pipeline failures are logged separately and do
    /// not use up an attempt. Capture timing is recorded, never enforced.
    pub fn submit_attempt(
        &self,
        round_id: &str,
        attempt: AttemptSubmission,
    ) -> Result<AttemptResult, GameError> {
        let received_at = Utc::now();
        let session_id = self
            .rounds
            .read()
            .expect("rounds lock")
            .get(round_id)
            .cloned()
            .ok_or_else(|| GameError::UnknownRound(round_id.to_string()))?;
        let session = self.session(&session_id)?;
        let mut state = session.lock().expect("session lock");
        let group = state.info.group;
        let limit = self.config.attempts_per_round;
        let round = state
            .rounds
            .iter_mut()
            .find(|r| r.round_id == round_id)
            .ok_or_else(|| GameError::UnknownRound(round_id.to_string()))?;
        match round.status {
            RoundStatus::Open => {}
            RoundStatus::Exhausted => return Err(GameError::RoundExhausted(round_id.to_string())),
            RoundStatus::Closed => return Err(GameError::RoundClosed(round_id.to_string())),
        }

        let player = match self.detect(&attempt) {
            Ok(set) => set,
            Err(msg) => {
                self.store.append_failure(&PipelineFailure {
                    session_id: session_id.clone(),
                    round_id: round_id.to_string(),
                    error: msg.clone(),
                    captured_at: attempt.captured_at,
                    received_at,
                })?;
                return Err(GameError::Pipeline(msg));
            }
        };
        let target = round.target.au_set;
        let score =
            explain::score(player, target).map_err(|e| GameError::Pipeline(e.to_string()))?;
        let diff = explain::diff(player, target);
        let prescriptions = match group {
            Group::Treatment => explain::prescribe(player, target, &self.dictionary),
            Group::Control => Vec::new(),
        };
        let attempt_index = round.records.len() as u32 + 1;
        let record = self.store.append_attempt(
            Some((&attempt.frame, frame_extension(&attempt.frame))),
            |record_id, frame_ref| RoundRecord {
                record_id,
                session_id: session_id.clone(),
                round_id: round_id.to_string(),
                target_id: round.target.target_id.clone(),
                emotion: round.target.emotion,
                group,
                attempt_index,
                player_aus: player,
                target_aus: target,
                score,
                prescriptions_shown: !prescriptions.is_empty(),
                frame_ref,
                captured_at: attempt.captured_at,
                received_at,
            },
        )?;
        round.records.push(record.clone());
        if attempt_index >= limit {
            round.status = RoundStatus::Exhausted;
        }
        Ok(AttemptResult {
            record_id: record.record_id,
            round_id: round_id.to_string(),
            attempt_index,
            score,
            correct: diff.correct,
            spurious: diff.spurious,
            missing: diff.missing,
            prescriptions,
            retry_allowed: round.status == RoundStatus::Open,
            attempts_remaining: limit - attempt_index,
            status: round.status,
        })
    }

    fn detect(&self, attempt: &AttemptSubmission) -> Result<AuSet, String> {
        let image = GrayImage::decode(&attempt.frame).map_err(|e| e.to_string())?;
        let features = extract_features_with(&image, &attempt.landmarks, &self.config.features)
            .map_err(|e| e.to_string())?;
        self.classifier.detect(&features).map_err(|e| e.to_string())
    }

    /// Every round of the session in play order, with its records.
    pub fn session_history(&self, session_id: &str) -> Result<Vec<RoundSummary>, GameError> {
        let session = self.session(session_id)?;
        let state = session.lock().expect("session lock");
        Ok(state
            .rounds
            .iter()
            .map(|r| RoundSummary {
                round_id: r.round_id.clone(),
                round_index: r.round_index,
                target_id: r.target.target_id.clone(),
                emotion: r.target.emotion,
                target_aus: r.target.au_set,
                status: r.status,
                records: r.records.clone(),
            })
            .collect())
    }

    pub fn targets(&self) -> Vec<Arc<TargetEntry>> {
        self.catalog
            .read()
            .expect("catalog lock")
            .targets()
            .to_vec()
    }

    /// Labels a new target with the detector and adds it to the catalog.
    pub fn ingest_target(
        &self,
        target_id: Option<String>,
        image: GrayImage,
        landmarks: LandmarkSet,
        emotion: Emotion,
    ) -> Result<Arc<TargetEntry>, GameError> {
        let mut catalog = self.catalog.write().expect("catalog lock");
        let target_id = target_id.unwrap_or_else(|| {
            (1..)
                .map(|n| format!("{emotion}-{n:03}"))
                .find(|id| catalog.get(id).is_none())
                .expect("unbounded id space")
        });
        let entry = ingest_target(
            target_id,
            image,
            landmarks,
            emotion,
            self.classifier.as_ref(),
            &self.config.features,
        )?;
        catalog.add(entry)
    }
}
