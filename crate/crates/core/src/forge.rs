//! Research data from the record log: threshold filtering, auto-labeled
//! export and the emotion × Action Unit co-occurrence matrix.
//!
//! A record survives a threshold `τ` when `score >= τ`; only attempts
//! strictly below it are dropped.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::{ActionUnit, AuSet, Emotion, GrayImage, RoundRecord, AU_COUNT, EMOTION_COUNT};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

/// Human-readable statement of the filtering rule, written into every
/// export summary.
pub const THRESHOLD_RULE: &str = "score >= threshold";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForgeError {
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("bad export manifest: {0}")]
    BadManifest(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ForgeError + '_ {
    move |e| ForgeError::Io(format!("{}: {e}", path.display()))
}

fn check_threshold(threshold: f64) -> Result<(), ForgeError> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(ForgeError::InvalidThreshold(threshold))
    }
}

/// Keeps the records whose score reaches `threshold`.
pub fn filter_records(
    records: &[RoundRecord],
    threshold: f64,
) -> Result<Vec<RoundRecord>, ForgeError> {
    check_threshold(threshold)?;
    Ok(records
        .iter()
        .filter(|r| r.score >= threshold)
        .cloned()
        .collect())
}

/// Per-emotion counts, serialized as a map in emotion encoding order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Histogram(pub [usize; EMOTION_COUNT]);

impl Histogram {
    pub fn get(&self, emotion: Emotion) -> usize {
        self.0[emotion.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl Serialize for Histogram {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(EMOTION_COUNT))?;
        for e in Emotion::ALL {
            map.serialize_entry(e.label(), &self.0[e.index()])?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Histogram {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Histogram;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map from emotion label to count")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Histogram, A::Error> {
                let mut h = Histogram::default();
                while let Some((e, n)) = map.next_entry::<Emotion, usize>()? {
                    h.0[e.index()] = n;
                }
                Ok(h)
            }
        }
        d.deserialize_map(V)
    }
}

/// One exported image. Field order is the manifest line layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportEntry {
    /// Path of the copied frame relative to the export directory, `None`
    /// when the source frame was missing.
    pub frame_ref: Option<String>,
    pub emotion: Emotion,
    pub au_set: AuSet,
    pub score: f64,
    pub session_id: String,
    pub attempt_index: u32,
    pub record_id: u64,
    pub target_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingFrame {
    pub record_id: u64,
    pub frame_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub threshold: f64,
    pub rule: String,
    pub histogram: Histogram,
    pub missing_frames: Vec<MissingFrame>,
    #[serde(skip)]
    pub entries: Vec<ExportEntry>,
}

/// Copies every kept frame into `out_dir/frames/<emotion>/` and writes
/// `manifest.jsonl` plus `summary.json`. Frames that cannot be read are
/// listed in the summary; their entries are still exported without a frame.
pub fn export_dataset(
    records: &[RoundRecord],
    threshold: f64,
    store_root: &Path,
    out_dir: &Path,
) -> Result<ExportManifest, ForgeError> {
    let kept = filter_records(records, threshold)?;
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut entries = Vec::with_capacity(kept.len());
    let mut histogram = Histogram::default();
    let mut missing_frames = Vec::new();
    for r in &kept {
        let copied = match &r.frame_ref {
            Some(src_ref) => {
                let src = store_root.join(src_ref);
                let ext = Path::new(src_ref)
                    .extension()
                    .and_then(|e| e.to_str())
                    .unwrap_or("png");
                let rel = PathBuf::from("frames")
                    .join(r.emotion.label())
                    .join(format!("{:08}.{ext}", r.record_id));
                let dst = out_dir.join(&rel);
                std::fs::create_dir_all(dst.parent().expect("has parent")).map_err(io(&dst))?;
                std::fs::copy(&src, &dst)
                    .ok()
                    .map(|_| rel.to_string_lossy().replace('\\', "/"))
            }
            None => None,
        };
        if copied.is_none() {
            missing_frames.push(MissingFrame {
                record_id: r.record_id,
                frame_ref: r.frame_ref.clone(),
            });
        }
        histogram.0[r.emotion.index()] += 1;
        entries.push(ExportEntry {
            frame_ref: copied,
            emotion: r.emotion,
            au_set: r.player_aus,
            score: r.score,
            session_id: r.session_id.clone(),
            attempt_index: r.attempt_index,
            record_id: r.record_id,
            target_id: r.target_id.clone(),
        });
    }

    let mut lines = String::new();
    for e in &entries {
        lines.push_str(&serde_json::to_string(e).expect("entry serializes"));
        lines.push('\n');
    }
    let manifest_path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, lines).map_err(io(&manifest_path))?;

    let manifest = ExportManifest {
        threshold,
        rule: THRESHOLD_RULE.to_string(),
        histogram,
        missing_frames,
        entries,
    };
    let summary_path = out_dir.join(SUMMARY_FILE);
    let summary = serde_json::to_string_pretty(&manifest).expect("summary serializes");
    std::fs::write(&summary_path, summary + "\n").map_err(io(&summary_path))?;
    Ok(manifest)
}

/// Reads an export directory back.
pub fn read_export(out_dir: &Path) -> Result<ExportManifest, ForgeError> {
    let summary_path = out_dir.join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&summary_path).map_err(io(&summary_path))?;
    let mut manifest: ExportManifest = serde_json::from_str(&text)
        .map_err(|e| ForgeError::BadManifest(format!("{SUMMARY_FILE}: {e}")))?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path).map_err(io(&manifest_path))?;
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        manifest
            .entries
            .push(serde_json::from_str(line).map_err(|e| {
                ForgeError::BadManifest(format!("{MANIFEST_FILE} line {}: {e}", i + 1))
            })?);
    }
    Ok(manifest)
}

/// Occurrence counts of each Action Unit among players imitating each
/// emotion. Rows follow the emotion encoding, columns `ActionUnit::ALL`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceMatrix {
    pub counts: [[u64; AU_COUNT]; EMOTION_COUNT],
    pub records_used: usize,
    pub threshold: f64,
}

impl CooccurrenceMatrix {
    pub fn get(&self, emotion: Emotion, au: ActionUnit) -> u64 {
        self.counts[emotion.index()][au.index()]
    }

    pub fn row(&self, emotion: Emotion) -> &[u64; AU_COUNT] {
        &self.counts[emotion.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn max(&self) -> u64 {
        self.counts.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Most frequent unit of a row; ties go to the lower AU code. `None`
    /// for an all-zero row.
    pub fn argmax(&self, emotion: Emotion) -> Option<ActionUnit> {
        let row = self.row(emotion);
        let best = *row.iter().max()?;
        (best > 0)
            .then(|| ActionUnit::ALL[row.iter().position(|&c| c == best).expect("max exists")])
    }
}

/// Counts, over the records that pass `threshold`, how often each unit
/// appears in the player's set for each target emotion.
pub fn cooccurrence(
    records: &[RoundRecord],
    threshold: f64,
) -> Result<CooccurrenceMatrix, ForgeError> {
    let kept = filter_records(records, threshold)?;
    let mut counts = [[0u64; AU_COUNT]; EMOTION_COUNT];
    for r in &kept {
        for au in r.player_aus.iter() {
            counts[r.emotion.index()][au.index()] += 1;
        }
    }
    Ok(CooccurrenceMatrix {
        counts,
        records_used: kept.len(),
        threshold,
    })
}

/// Fixed-width text table with every count written out.
pub fn heatmap_text(m: &CooccurrenceMatrix) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# AU occurrences by target emotion; threshold {}, {} records",
        m.threshold, m.records_used
    )
    .unwrap();
    write!(out, "{:<10}", "emotion").unwrap();
    for au in ActionUnit::ALL {
        write!(out, "{:>6}", format!("AU{}", au.code())).unwrap();
    }
    out.push('\n');
    for e in Emotion::ALL {
        write!(out, "{:<10}", e.label()).unwrap();
        for c in m.row(e) {
            write!(out, "{c:>6}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Pixel size of one heatmap cell, including its one-pixel grid line.
pub const HEATMAP_CELL: usize = 16;

/// Grayscale raster: one cell per count, white for zero and darker for
/// larger counts, separated by mid-gray grid lines.
pub fn heatmap_image(m: &CooccurrenceMatrix) -> GrayImage {
    let max = m.max();
    let w = AU_COUNT * HEATMAP_CELL + 1;
    let h = EMOTION_COUNT * HEATMAP_CELL + 1;
    GrayImage::from_fn(w, h, |x, y| {
        if x % HEATMAP_CELL == 0 || y % HEATMAP_CELL == 0 {
            return 0.5;
        }
        let c = m.counts[y / HEATMAP_CELL][x / HEATMAP_CELL];
        if c == 0 {
            1.0
        } else {
            // Nonzero cells span [0, 0.8] so they never match the background.
            0.8 * (1.0 - c as f64 / max as f64)
        }
    })
}

/// Writes the text table to `path` and the PNG raster next to it
/// (same name, `.png` extension). Returns the raster path.
pub fn render_heatmap(m: &CooccurrenceMatrix, path: &Path) -> Result<PathBuf, ForgeError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let png_path = path.with_extension("png");
    if png_path != path {
        std::fs::write(path, heatmap_text(m)).map_err(io(path))?;
    }
    std::fs::write(&png_path, heatmap_image(m).to_png()).map_err(io(&png_path))?;
    Ok(png_path)
}
