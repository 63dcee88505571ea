//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance runner. Nothing here calls the library routine it checks.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::sync::{Arc, Mutex};

use chrono::DateTime;
use facegame::detector::{AuClassifier, DetectorError};
use facegame::explain::AuDictionary;
use facegame::features::FeatureVector;
use facegame::game::{
    AttemptSubmission, GameConfig, GameService, GroupPolicy, Store, TargetCatalog,
};
use facegame::model::{ActionUnit, AuSet, Emotion, GrayImage, Group, RoundRecord, TargetEntry};
use facegame::synth::{emotion_signature, render_face, FaceParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Scoring

/// `(|P ∩ T|, |P ∪ T|)` by walking explicit code lists.
pub fn count_overlap(player: &[u8], target: &[u8]) -> (usize, usize) {
    let inter = player.iter().filter(|c| target.contains(c)).count();
    let only_target = target.iter().filter(|c| !player.contains(c)).count();
    (inter, player.len() + only_target)
}

/// The codes selected by the bits of `mask` from `universe`.
pub fn subset_codes(universe: &[u8], mask: u32) -> Vec<u8> {
    universe
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, &c)| c)
        .collect()
}

pub fn au_set(codes: &[u8]) -> AuSet {
    AuSet::from_codes(codes.iter().map(|&c| u32::from(c))).unwrap()
}

// ---------------------------------------------------------------------------
// HOG

/// Straight-from-the-definition HOG: every block re-reads its four cells
/// pixel by pixel, each pixel votes into every bin with a triangular kernel
/// on the 180-degree orientation circle. Default parameters only.
pub fn naive_hog(img: &GrayImage) -> Vec<f64> {
    const CELL: usize = 8;
    const BINS: usize = 8;
    const BIN_DEG: f64 = 180.0 / BINS as f64;
    let (w, h) = (img.width(), img.height());
    let pixel = |x: isize, y: isize| -> Option<f64> {
        (x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h)
            .then(|| img.get(x as usize, y as usize))
    };
    let gradient = |x: usize, y: usize| -> (f64, f64) {
        let (xi, yi) = (x as isize, y as isize);
        let gx = match (pixel(xi - 1, yi), pixel(xi + 1, yi)) {
            (Some(l), Some(r)) => r - l,
            _ => 0.0,
        };
        let gy = match (pixel(xi, yi - 1), pixel(xi, yi + 1)) {
            (Some(u), Some(d)) => d - u,
            _ => 0.0,
        };
        (gx, gy)
    };
    let cell_hist = |cx: usize, cy: usize| -> [f64; BINS] {
        let mut hist = [0.0; BINS];
        for y in cy * CELL..(cy + 1) * CELL {
            for x in cx * CELL..(cx + 1) * CELL {
                let (gx, gy) = gradient(x, y);
                let mag = (gx * gx + gy * gy).sqrt();
                if mag == 0.0 {
                    continue;
                }
                let deg = gy.atan2(gx).to_degrees().rem_euclid(180.0);
                for (b, slot) in hist.iter_mut().enumerate() {
                    let center = b as f64 * BIN_DEG;
                    let d = (deg - center).abs();
                    let d = d.min(180.0 - d);
                    *slot += mag * (1.0 - d / BIN_DEG).max(0.0);
                }
            }
        }
        hist
    };
    let normalize = |v: &mut Vec<f64>| {
        let norm = (v.iter().map(|a| a * a).sum::<f64>() + 1e-24).sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
    };
    let (cells_x, cells_y) = (w / CELL, h / CELL);
    let mut out = Vec::new();
    for by in 0..cells_y - 1 {
        for bx in 0..cells_x - 1 {
            let mut block = Vec::with_capacity(4 * BINS);
            for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                block.extend(cell_hist(bx + dx, by + dy));
            }
            normalize(&mut block);
            block.iter_mut().for_each(|a| *a = a.min(0.2));
            normalize(&mut block);
            out.extend(block);
        }
    }
    out
}

pub fn random_image(rng: &mut impl Rng, size: usize) -> GrayImage {
    let pixels = (0..size * size).map(|_| rng.random::<f64>()).collect();
    GrayImage::new(size, size, pixels).unwrap()
}

// ---------------------------------------------------------------------------
// Statistics

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Two-sided Student-t p-value by quadrature. Substituting
/// `t = sqrt(df) tan θ` turns the t density into `cos^(df-1) θ`, so
/// `p = ∫_{θt}^{π/2} cos^(df-1) / ∫_0^{π/2} cos^(df-1)`.
pub fn t_p_value_by_quadrature(t: f64, df: f64) -> f64 {
    let f = move |theta: f64| theta.cos().max(0.0).powf(df - 1.0);
    let theta_t = (t.abs() / df.sqrt()).atan();
    let total = integrate(&f, 0.0, FRAC_PI_2, 1e-13);
    integrate(&f, theta_t, FRAC_PI_2, 1e-13) / total
}

/// Paired t statistic with two-pass moments.
pub fn paired_t_by_definition(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    mean / (var / n).sqrt()
}

/// Standard normal draw by Box–Muller.
pub fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

// ---------------------------------------------------------------------------
// Game replay

/// A classifier that reports pre-queued sets, one per call.
#[derive(Default)]
pub struct Scripted(Mutex<VecDeque<AuSet>>);

impl Scripted {
    pub fn push(&self, sets: impl IntoIterator<Item = AuSet>) {
        self.0.lock().unwrap().extend(sets);
    }
}

impl AuClassifier for Scripted {
    fn detect(&self, _: &FeatureVector) -> Result<AuSet, DetectorError> {
        Ok(self
            .0
            .lock()
            .unwrap()
            .pop_front()
            .expect("scripted classifier ran dry"))
    }
}

/// Five player sets that close in on `target`: the correct units grow from
/// none to all while the spurious ones shrink from two to none.
pub fn converging_attempts(target: AuSet) -> [AuSet; 5] {
    let wanted: Vec<ActionUnit> = target.iter().collect();
    let wrong: Vec<ActionUnit> = ActionUnit::ALL
        .into_iter()
        .filter(|a| !target.contains(*a))
        .take(2)
        .collect();
    let spurious_counts = [2, 1, 1, 0, 0];
    std::array::from_fn(|k| {
        let correct = (wanted.len() * k).div_ceil(4);
        wanted[..correct]
            .iter()
            .chain(&wrong[..spurious_counts[k]])
            .copied()
            .collect()
    })
}

pub fn signature_catalog() -> TargetCatalog {
    let face = render_face(&FaceParams::default());
    TargetCatalog::from_entries(Emotion::ALL.into_iter().map(|e| {
        TargetEntry::new(
            format!("{e}-01"),
            face.image.clone(),
            e,
            emotion_signature(e),
            face.landmarks.clone(),
        )
        .unwrap()
    }))
}

/// Plays `sessions` complete six-round sessions (alternating groups) with
/// a converging player through the game service; returns the record log
/// and every round's score sequence.
pub fn replay_sessions(store: &Path, sessions: usize) -> (Vec<RoundRecord>, Vec<Vec<f64>>) {
    let classifier = Arc::new(Scripted::default());
    let svc = GameService::new(
        GameConfig::default(),
        classifier.clone(),
        AuDictionary::builtin(),
        signature_catalog(),
        Store::open(store).unwrap(),
    )
    .unwrap();
    let face = render_face(&FaceParams::default());
    let mut sequences = Vec::new();
    for _ in 0..sessions {
        let session = svc
            .create_session(GroupPolicy::Alternating, None, None)
            .unwrap();
        for _ in 0..6 {
            let round = svc.start_round(&session.session_id).unwrap();
            let target = emotion_signature(round.emotion.expect("emotion is revealed"));
            classifier.push(converging_attempts(target));
            let scores = (0..5)
                .map(|i| {
                    svc.submit_attempt(
                        &round.round_id,
                        AttemptSubmission {
                            frame: face.image.to_png(),
                            landmarks: face.landmarks.clone(),
                            captured_at: DateTime::from_timestamp_millis(1_700_000_000_000 + i)
                                .unwrap(),
                        },
                    )
                    .unwrap()
                    .score
                })
                .collect();
            sequences.push(scores);
        }
    }
    (svc.store().records().to_vec(), sequences)
}

pub fn groups_present(records: &[RoundRecord]) -> (bool, bool) {
    (
        records.iter().any(|r| r.group == Group::Control),
        records.iter().any(|r| r.group == Group::Treatment),
    )
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// HTTP

/// A JSON client that reports non-2xx answers instead of failing on them.
pub struct Api {
    agent: ureq::Agent,
    base: String,
}

impl Api {
    pub fn new(base: impl Into<String>) -> Api {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Api {
            agent,
            base: base.into(),
        }
    }

    fn finish(
        resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> (u16, serde_json::Value) {
        let mut resp = resp.expect("transport error");
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        (
            status,
            serde_json::from_str(&text).unwrap_or(serde_json::Value::String(text)),
        )
    }

    pub fn get(&self, path: &str) -> (u16, serde_json::Value) {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).call())
    }

    pub fn post(&self, path: &str, body: &serde_json::Value) -> (u16, serde_json::Value) {
        Self::finish(
            self.agent
                .post(format!("{}{path}", self.base))
                .send_json(body),
        )
    }

    pub fn post_empty(&self, path: &str) -> (u16, serde_json::Value) {
        Self::finish(self.agent.post(format!("{}{path}", self.base)).send_empty())
    }
}

/// An in-process server on an ephemeral port, stopped on drop.
pub struct LocalServer {
    pub base: String,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl LocalServer {
    pub fn start(service: Arc<GameService>) -> LocalServer {
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                facegame::game::serve(listener, service, async {
                    let _ = stopped.await;
                })
                .await
                .unwrap();
            });
        });
        let addr = addr_rx.recv().unwrap();
        LocalServer {
            base: format!("http://{addr}"),
            stop: Some(stop),
            thread: Some(thread),
        }
    }

    pub fn api(&self) -> Api {
        Api::new(self.base.clone())
    }
}

impl Drop for LocalServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn b64(bytes: &[u8]) -> String {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.encode(bytes)
}
