//! Procedural face fixtures.
//!
//! Renders a schematic grayscale face with a 68-point landmark layout and a
//! visible, localized mark for every active Action Unit. Faces are defined
//! in a canonical frame where the eye centers sit at `(-0.5, 0)` and
//! `(0.5, 0)` (unit inter-ocular distance, y down) and then posed into the
//! image with a similarity transform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detector::{train, AuModel, AuTrainingSet, DetectorError, TrainConfig};
use crate::features::{extract_features_with, FeatureConfig};
use crate::ferlab::LabeledImageSet;
use crate::model::{ActionUnit, AuSet, Emotion, GrayImage, LandmarkSet, Point};

const BACKGROUND: f64 = 0.15;
const SKIN: f64 = 0.62;
const INK: f64 = 0.08;

const FACE_CENTER_Y: f64 = 0.3;
const FACE_HALF_WIDTH: f64 = 1.05;
const FACE_HALF_HEIGHT: f64 = 1.35;

#[derive(Debug, Clone, PartialEq)]
pub struct FaceParams {
    pub width: usize,
    pub height: usize,
    /// Midpoint between the eyes, pixels.
    pub center: Point,
    /// Inter-ocular distance, pixels.
    pub iod: f64,
    /// Head roll, radians.
    pub roll: f64,
    pub aus: AuSet,
    /// Amplitude of uniform pixel noise; 0 disables it.
    pub noise: f64,
    pub noise_seed: u64,
}

impl Default for FaceParams {
    fn default() -> Self {
        FaceParams {
            width: 160,
            height: 160,
            center: Point::new(80.0, 62.0),
            iod: 44.0,
            roll: 0.0,
            aus: AuSet::empty(),
            noise: 0.0,
            noise_seed: 0,
        }
    }
}

impl FaceParams {
    pub fn with_aus(mut self, aus: AuSet) -> Self {
        self.aus = aus;
        self
    }

    /// Fits the face into a `size x size` frame.
    pub fn square(size: usize) -> Self {
        let s = size as f64;
        FaceParams {
            width: size,
            height: size,
            center: Point::new(s / 2.0, s * 0.38),
            iod: s * 0.275,
            ..FaceParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFace {
    pub image: GrayImage,
    pub landmarks: LandmarkSet,
    pub aus: AuSet,
}

/// Typical Action Units of each emotion, used to build emotion fixtures.
pub fn emotion_signature(emotion: Emotion) -> AuSet {
    let codes: &[u32] = match emotion {
        Emotion::Anger => &[4, 5, 7, 23],
        Emotion::Disgust => &[9, 10, 15, 17],
        Emotion::Fear => &[1, 2, 4, 5, 20, 26],
        Emotion::Happiness => &[6, 12],
        Emotion::Sadness => &[1, 4, 15],
        Emotion::Surprise => &[1, 2, 5, 25, 26],
    };
    AuSet::from_codes(codes.iter().copied()).expect("signature codes are in the catalog")
}

/// Center and orientation (degrees) of the mark drawn for an AU, canonical
/// frame.
fn au_mark(au: ActionUnit) -> (Point, f64) {
    const ROWS: [f64; 5] = [-0.22, 0.2, 0.55, 0.9, 1.3];
    const COLS: [f64; 4] = [-0.6, -0.2, 0.2, 0.6];
    let k = au.index();
    let angle = ((k * 45) as f64 + (k / 4).min(3) as f64 * 22.5) % 180.0;
    // The chin is narrower; pull the last row in.
    let squeeze = if k / 4 == 4 { 0.6 } else { 1.0 };
    (Point::new(COLS[k % 4] * squeeze, ROWS[k / 4]), angle)
}

const MARK_HALF_LEN: f64 = 0.11;
const MARK_HALF_THICK: f64 = 0.03;

/// The 68 landmarks in the canonical frame, deformed by the active AUs.
pub fn canonical_landmarks(aus: AuSet) -> Vec<Point> {
    use ActionUnit::*;
    let mut pts = Vec::with_capacity(68);

    let jaw_drop = if aus.contains(JawDrop) { 0.12 } else { 0.0 };
    for k in 0..17 {
        let t = std::f64::consts::PI * (1.0 - k as f64 / 16.0);
        let down = t.sin();
        pts.push(Point::new(
            FACE_HALF_WIDTH * t.cos(),
            FACE_CENTER_Y + FACE_HALF_HEIGHT * down + jaw_drop * down * down,
        ));
    }

    let inner_lift = if aus.contains(InnerBrowRaiser) {
        -0.06
    } else {
        0.0
    };
    let outer_lift = if aus.contains(OuterBrowRaiser) {
        -0.06
    } else {
        0.0
    };
    let lower = if aus.contains(BrowLowerer) { 0.05 } else { 0.0 };
    for side in [-1.0, 1.0] {
        let xs = [0.85, 0.68, 0.5, 0.32, 0.15];
        let order: Vec<f64> = if side < 0.0 {
            xs.iter().map(|x| -x).collect()
        } else {
            xs.iter().rev().copied().collect()
        };
        for x in order {
            let outer = x.abs() / 0.85;
            let arch = -0.05 * (1.0 - ((x.abs() - 0.5) / 0.35).powi(2));
            let lift = inner_lift * (1.0 - outer) + outer_lift * outer + lower;
            pts.push(Point::new(x, -0.36 + arch + lift));
        }
    }

    for k in 0..4 {
        pts.push(Point::new(0.0, -0.1 + 0.18 * k as f64));
    }
    let wrinkle = if aus.contains(NoseWrinkler) {
        -0.03
    } else {
        0.0
    };
    for (k, x) in [-0.22, -0.11, 0.0, 0.11, 0.22].iter().enumerate() {
        let dip = if k == 2 { 0.03 } else { 0.0 };
        pts.push(Point::new(*x, 0.68 + dip + wrinkle));
    }

    let eye_h = if aus.contains(EyesClosed) {
        0.01
    } else if aus.contains(UpperLidRaiser) {
        0.1
    } else if aus.contains(LidTightener) {
        0.045
    } else {
        0.07
    };
    for cx in [-0.5, 0.5] {
        // Corners at 0 and 3; upper lid 1-2, lower lid 4-5. Each eye's
        // points are symmetric about its center so the mean stays put.
        let offsets = [
            (-0.2, 0.0),
            (-0.08, -eye_h),
            (0.08, -eye_h),
            (0.2, 0.0),
            (0.08, eye_h),
            (-0.08, eye_h),
        ];
        for (dx, dy) in offsets {
            pts.push(Point::new(cx + dx, dy));
        }
    }

    let corner_dy = if aus.contains(LipCornerPuller) {
        -0.1
    } else if aus.contains(LipCornerDepressor) {
        0.08
    } else {
        0.0
    };
    let stretch = if aus.contains(LipStretcher) {
        0.08
    } else {
        0.0
    };
    let part = if aus.contains(LipsPart) { 0.05 } else { 0.0 } + jaw_drop * 0.5;
    let press = if aus.contains(LipPressor) { 0.6 } else { 1.0 };
    let mouth_y = 1.1 + jaw_drop * 0.3;
    let half_w = 0.42 + stretch;
    let upper = 0.1 * press;
    let lower_lip = 0.12 * press;
    // Outer contour 48-59, clockwise from the left corner.
    let outer: [(f64, f64); 12] = [
        (-half_w, corner_dy),
        (-0.28, -upper * 0.8),
        (-0.12, -upper),
        (0.0, -upper * 0.85),
        (0.12, -upper),
        (0.28, -upper * 0.8),
        (half_w, corner_dy),
        (0.28, lower_lip + part),
        (0.12, lower_lip * 1.1 + part),
        (0.0, lower_lip * 1.15 + part),
        (-0.12, lower_lip * 1.1 + part),
        (-0.28, lower_lip + part),
    ];
    for (x, y) in outer {
        let corner_pull = if x.abs() >= half_w - 1e-9 {
            0.0
        } else {
            corner_dy * 0.3
        };
        pts.push(Point::new(x, mouth_y + y + corner_pull));
    }
    // Inner contour 60-67.
    let inner: [(f64, f64); 8] = [
        (-half_w + 0.06, corner_dy * 0.8),
        (-0.12, -part * 0.5),
        (0.0, -part * 0.5),
        (0.12, -part * 0.5),
        (half_w - 0.06, corner_dy * 0.8),
        (0.12, part * 0.5),
        (0.0, part * 0.5),
        (-0.12, part * 0.5),
    ];
    for (x, y) in inner {
        pts.push(Point::new(x, mouth_y + y));
    }
    pts
}

struct Stroke {
    a: Point,
    b: Point,
    half_thick: f64,
}

fn polyline(points: &[Point], closed: bool, half_thick: f64, out: &mut Vec<Stroke>) {
    for w in points.windows(2) {
        out.push(Stroke {
            a: w[0],
            b: w[1],
            half_thick,
        });
    }
    if closed && points.len() > 2 {
        out.push(Stroke {
            a: points[points.len() - 1],
            b: points[0],
            half_thick,
        });
    }
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

/// Anti-aliased coverage of a shape at signed distance `d` (pixels,
/// negative inside).
fn coverage(d: f64) -> f64 {
    (0.5 - d).clamp(0.0, 1.0)
}

pub fn render_face(params: &FaceParams) -> SyntheticFace {
    let canon = canonical_landmarks(params.aus);
    let (sin, cos) = params.roll.sin_cos();
    let pose = |p: Point| {
        Point::new(
            params.center.x + params.iod * (cos * p.x - sin * p.y),
            params.center.y + params.iod * (sin * p.x + cos * p.y),
        )
    };
    let unpose = |p: Point| {
        let (dx, dy) = (
            (p.x - params.center.x) / params.iod,
            (p.y - params.center.y) / params.iod,
        );
        Point::new(cos * dx + sin * dy, -sin * dx + cos * dy)
    };
    let posed: Vec<Point> = canon.iter().map(|&p| pose(p)).collect();

    let line = 0.025 * params.iod;
    let mut strokes = Vec::new();
    polyline(&posed[17..22], false, line * 1.6, &mut strokes);
    polyline(&posed[22..27], false, line * 1.6, &mut strokes);
    polyline(&posed[27..31], false, line, &mut strokes);
    polyline(&posed[31..36], false, line, &mut strokes);
    polyline(&posed[36..42], true, line, &mut strokes);
    polyline(&posed[42..48], true, line, &mut strokes);
    polyline(&posed[48..60], true, line * 1.2, &mut strokes);
    polyline(&posed[60..68], true, line * 0.8, &mut strokes);
    for au in params.aus.iter() {
        let (c, deg) = au_mark(au);
        let (s, co) = deg.to_radians().sin_cos();
        let a = Point::new(c.x - MARK_HALF_LEN * co, c.y - MARK_HALF_LEN * s);
        let b = Point::new(c.x + MARK_HALF_LEN * co, c.y + MARK_HALF_LEN * s);
        strokes.push(Stroke {
            a: pose(a),
            b: pose(b),
            half_thick: MARK_HALF_THICK * params.iod,
        });
    }
    let pupils: Vec<Point> = if params.aus.contains(ActionUnit::EyesClosed) {
        Vec::new()
    } else {
        vec![pose(Point::new(-0.5, 0.0)), pose(Point::new(0.5, 0.0))]
    };
    let pupil_r = 0.055 * params.iod;

    let mut rng = ChaCha8Rng::seed_from_u64(params.noise_seed);
    let mut pixels = Vec::with_capacity(params.width * params.height);
    for y in 0..params.height {
        for x in 0..params.width {
            let p = Point::new(x as f64, y as f64);
            let c = unpose(p);
            // Signed distance to the face ellipse, approximated in pixels.
            let ex = c.x / FACE_HALF_WIDTH;
            let ey = (c.y - FACE_CENTER_Y) / FACE_HALF_HEIGHT;
            let r = (ex * ex + ey * ey).sqrt();
            let face_d = (r - 1.0) * params.iod * FACE_HALF_WIDTH.min(FACE_HALF_HEIGHT);
            let mut v = BACKGROUND + (SKIN - BACKGROUND) * coverage(face_d);
            for s in &strokes {
                let d = segment_distance(p, s.a, s.b) - s.half_thick;
                if d < 0.5 {
                    v += (INK - v) * coverage(d);
                }
            }
            for &pc in &pupils {
                let d = p.distance(pc) - pupil_r;
                if d < 0.5 {
                    v += (INK - v) * coverage(d);
                }
            }
            if params.noise > 0.0 {
                v += params.noise * (rng.random::<f64>() * 2.0 - 1.0);
            }
            pixels.push(v);
        }
    }
    let image = GrayImage::new(params.width, params.height, pixels).expect("sized buffer");
    let landmarks = LandmarkSet::new(posed).expect("68 finite landmarks");
    SyntheticFace {
        image,
        landmarks,
        aus: params.aus,
    }
}

/// A face with random pose jitter around `base`.
pub fn render_jittered(base: &FaceParams, aus: AuSet, rng: &mut impl Rng) -> SyntheticFace {
    let params = FaceParams {
        center: Point::new(
            base.center.x + rng.random_range(-4.0..4.0),
            base.center.y + rng.random_range(-4.0..4.0),
        ),
        iod: base.iod * rng.random_range(0.92..1.08),
        roll: base.roll + rng.random_range(-0.15..0.15),
        aus,
        noise_seed: rng.random(),
        ..base.clone()
    };
    render_face(&params)
}

/// A uniformly random AU subset where each unit is present with
/// probability `p`.
pub fn random_au_set(rng: &mut impl Rng, p: f64) -> AuSet {
    ActionUnit::ALL
        .into_iter()
        .filter(|_| rng.random_bool(p))
        .collect()
}

/// Random-AU faces with pose jitter, run through the feature pipeline.
pub fn au_training_set(
    count: usize,
    seed: u64,
    base: &FaceParams,
    config: &FeatureConfig,
) -> Result<AuTrainingSet, DetectorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = AuTrainingSet::new();
    for _ in 0..count {
        let aus = random_au_set(&mut rng, 0.35);
        let face = render_jittered(base, aus, &mut rng);
        set.push(
            extract_features_with(&face.image, &face.landmarks, config)?,
            aus,
        )?;
    }
    Ok(set)
}

/// Trains the reference detector on synthetic faces.
pub fn reference_model(count: usize, seed: u64) -> Result<AuModel, DetectorError> {
    let set = au_training_set(
        count,
        seed,
        &FaceParams::default(),
        &FeatureConfig::default(),
    )?;
    let (model, _) = train(
        &set,
        &TrainConfig {
            seed,
            ..TrainConfig::default()
        },
    )?;
    Ok(model)
}

/// Box-filters `img` down by an integer factor.
fn downsample(img: &GrayImage, factor: usize) -> GrayImage {
    let (w, h) = (img.width() / factor, img.height() / factor);
    let norm = 1.0 / (factor * factor) as f64;
    GrayImage::from_fn(w, h, |x, y| {
        let mut sum = 0.0;
        for dy in 0..factor {
            for dx in 0..factor {
                sum += img.get(x * factor + dx, y * factor + dy);
            }
        }
        sum * norm
    })
}

/// Labeled `size x size` emotion faces, `per_class` of each emotion in
/// encoding order. Each face shows its emotion's signature units; every
/// other unit is switched on with probability `confusion`, and the pose is
/// jittered.
pub fn emotion_dataset(
    name: &str,
    per_class: usize,
    size: usize,
    confusion: f64,
    seed: u64,
) -> LabeledImageSet {
    let factor = 96usize.div_ceil(size).max(1);
    let base = FaceParams::square(size * factor);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = LabeledImageSet::new(name);
    for emotion in Emotion::ALL {
        for _ in 0..per_class {
            let aus = emotion_signature(emotion).union(random_au_set(&mut rng, confusion));
            let face = render_jittered(&base, aus, &mut rng);
            set.push(downsample(&face.image, factor), emotion);
        }
    }
    set
}
