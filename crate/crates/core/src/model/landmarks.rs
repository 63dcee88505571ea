use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

pub const LANDMARK_COUNT: usize = 68;

/// A 2-D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// The 68 facial landmarks of the standard iBUG/dlib layout: jaw 0-16,
/// brows 17-26, nose 27-35, eyes 36-47, mouth 48-67.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<Point>,
}

impl LandmarkSet {
    pub fn new(points: Vec<Point>) -> Result<LandmarkSet, ModelError> {
        if points.len() != LANDMARK_COUNT {
            return Err(ModelError::LandmarkCount(points.len()));
        }
        if let Some(i) = points
            .iter()
            .position(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(ModelError::NonFiniteLandmark(i));
        }
        Ok(LandmarkSet { points })
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<LandmarkSet, ModelError> {
        Self::new(pairs.iter().map(|&[x, y]| Point::new(x, y)).collect())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Point {
        self.points[index]
    }

    /// Applies `f` to every point. The result must stay finite.
    pub fn map(&self, f: impl Fn(Point) -> Point) -> Result<LandmarkSet, ModelError> {
        LandmarkSet::new(self.points.iter().copied().map(f).collect())
    }

    /// Interleaved `x0, y0, x1, y1, ...`; always 136 values.
    pub fn flatten(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p.x, p.y]).collect()
    }
}

/// Wire form: a list of 68 `[x, y]` pairs.
impl Serialize for LandmarkSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.points.iter().map(|p| [p.x, p.y]))
    }
}

impl<'de> Deserialize<'de> for LandmarkSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(deserializer)?;
        LandmarkSet::from_pairs(&pairs).map_err(serde::de::Error::custom)
    }
}
