//! Serve the game over HTTP on a free port and drive one round with plain
//! JSON requests, as the browser client would.
//!
//! ```bash
//! cargo run --release --example http_server
//! ```

use std::sync::Arc;

use base64::Engine;
use facegame::explain::AuDictionary;
use facegame::game::{serve, GameConfig, GameService, Store, TargetCatalog};
use facegame::model::{Emotion, TargetEntry};
use facegame::synth::{emotion_signature, reference_model, render_face, FaceParams};
use serde_json::{json, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = TargetCatalog::from_entries(Emotion::ALL.map(|e| {
        let face = render_face(&FaceParams::default().with_aus(emotion_signature(e)));
        TargetEntry::new(format!("{e}-01"), face.image, e, face.aus, face.landmarks)
            .expect("non-empty")
    }));
    let store_dir = tempfile::tempdir()?;
    let service = Arc::new(GameService::new(
        GameConfig::default(),
        Arc::new(reference_model(400, 1)?),
        AuDictionary::builtin(),
        catalog,
        Store::open(store_dir.path())?,
    )?);

    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = runtime.spawn(serve(listener, service, async {
        let _ = stopped.await;
    }));
    println!("serving on {base}");

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    let post = |path: &str, body: Value| -> Result<(u16, Value), ureq::Error> {
        let mut res = agent.post(&format!("{base}{path}")).send_json(body)?;
        Ok((res.status().as_u16(), res.body_mut().read_json()?))
    };

    let (_, session) = post("/api/sessions", json!({ "group_policy": "treatment" }))?;
    let sid = session["session_id"].as_str().unwrap_or_default();
    println!("POST /api/sessions -> {session}");
    let (_, round) = post(&format!("/api/sessions/{sid}/rounds"), json!(null))?;
    let emotion: Emotion = serde_json::from_value(round["emotion"].clone())?;
    println!("round {} asks for {emotion}", round["round_id"]);

    let face = render_face(&FaceParams::default().with_aus(emotion_signature(emotion)));
    let frame = base64::engine::general_purpose::STANDARD.encode(face.image.to_png());
    let path = format!(
        "/api/rounds/{}/attempts",
        round["round_id"].as_str().unwrap_or_default()
    );
    let body =
        json!({ "frame": frame, "landmarks": face.landmarks, "captured_at": chrono::Utc::now() });
    let (status, result) = post(&path, body)?;
    println!(
        "POST {path} -> {status} score {} retry_allowed {}",
        result["score"], result["retry_allowed"]
    );

    let mut res = agent
        .get(&format!("{base}/api/sessions/{sid}/history"))
        .call()?;
    let history: Value = res.body_mut().read_json()?;
    println!(
        "history: {} round(s), scores {}",
        history["rounds"].as_array().map_or(0, Vec::len),
        history["rounds"][0]["scores"]
    );

    let _ = stop.send(());
    runtime.block_on(server)??;
    Ok(())
}
