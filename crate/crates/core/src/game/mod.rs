//! The playable system: sessions, rounds, scored attempts and the HTTP API.
//!
//! A session belongs to one experiment group for its whole life. In
//! experiment mode it plays six rounds, one per emotion in a per-session
//! shuffled order; each round allows at most `attempts_per_round` scored
//! attempts. Every scored attempt is appended to the record log.

mod catalog;
mod http;
mod service;
mod store;

pub use catalog::{append_catalog_line, ingest_target, CatalogLine, TargetCatalog, CATALOG_FILE};
pub use http::{router, serve};
pub use service::{
    AttemptResult, AttemptSubmission, GameConfig, GameService, GroupPolicy, Mode, RoundStatus,
    RoundSummary, RoundView, SessionInfo, DEFAULT_ATTEMPTS,
};
pub use store::{
    read_records, read_session_events, PipelineFailure, SessionEvent, Store, ERRORS_FILE,
    FRAMES_DIR, RECORDS_FILE, SESSIONS_FILE,
};

use crate::model::Emotion;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GameError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown round {0}")]
    UnknownRound(String),
    #[error("session {0} has completed all rounds")]
    SessionComplete(String),
    #[error("round {0} has no attempts left")]
    RoundExhausted(String),
    #[error("round {0} is closed")]
    RoundClosed(String),
    #[error("no target available for {0}")]
    NoTargetForEmotion(Emotion),
    #[error("target catalog is empty")]
    NoTargets,
    #[error("target {0} has an empty action unit set")]
    EmptyTargetAuSet(String),
    #[error("feature pipeline failed: {0}")]
    Pipeline(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("storage error: {0}")]
    Storage(String),
}
