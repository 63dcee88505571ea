use crate::model::{GrayImage, LandmarkSet, Point};

use super::FeatureError;

/// Canonical eye row as a fraction of the output size.
pub const EYE_ROW_FRACTION: f64 = 0.4;

const LEFT_EYE: std::ops::RangeInclusive<usize> = 36..=41;
const RIGHT_EYE: std::ops::RangeInclusive<usize> = 42..=47;

/// Tolerance used when deciding whether a back-projected sample lies inside
/// the source frame; absorbs float noise on exact pixel positions.
const EDGE_TOL: f64 = 1e-9;

/// Means of landmarks 36-41 and 42-47 (image-left and image-right eye).
pub fn eye_centers(landmarks: &LandmarkSet) -> (Point, Point) {
    (mean(landmarks, LEFT_EYE), mean(landmarks, RIGHT_EYE))
}

fn mean(landmarks: &LandmarkSet, range: std::ops::RangeInclusive<usize>) -> Point {
    let n = range.clone().count() as f64;
    let (sx, sy) = range
        .map(|i| landmarks.point(i))
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point::new(sx / n, sy / n)
}

/// Rotation + uniform scale + translation, mapping source coordinates to the
/// aligned frame: `dst = scale * R(angle) * src + (tx, ty)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    /// Rotation applied to the source, radians (counter-clockwise in a
    /// y-down frame is clockwise on screen).
    pub angle: f64,
    pub scale: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Similarity {
    pub fn apply(&self, p: Point) -> Point {
        let (s, c) = self.angle.sin_cos();
        Point::new(
            self.scale * (c * p.x - s * p.y) + self.tx,
            self.scale * (s * p.x + c * p.y) + self.ty,
        )
    }

    pub fn invert(&self, p: Point) -> Point {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = ((p.x - self.tx) / self.scale, (p.y - self.ty) / self.scale);
        Point::new(c * dx + s * dy, -s * dx + c * dy)
    }
}

/// A face resampled so the eyes sit on a fixed horizontal line.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFace {
    pub image: GrayImage,
    pub landmarks: LandmarkSet,
    pub transform: Similarity,
}

impl AlignedFace {
    pub fn size(&self) -> usize {
        self.image.width()
    }
}

/// Where the two eye centers land in a `size x size` aligned frame.
pub fn canonical_eyes(size: usize, iod: f64) -> (Point, Point) {
    let mid = size as f64 / 2.0;
    let row = size as f64 * EYE_ROW_FRACTION;
    (
        Point::new(mid - iod / 2.0, row),
        Point::new(mid + iod / 2.0, row),
    )
}

/// Computes the similarity that maps the landmark eye centers onto the
/// canonical eye positions.
pub fn alignment_transform(
    landmarks: &LandmarkSet,
    size: usize,
    iod: f64,
) -> Result<Similarity, FeatureError> {
    let (left, right) = eye_centers(landmarks);
    let (dx, dy) = (right.x - left.x, right.y - left.y);
    let dist = dx.hypot(dy);
    if dist.is_nan() || dist <= 0.0 {
        return Err(FeatureError::DegenerateEyes);
    }
    let angle = -dy.atan2(dx);
    let scale = iod / dist;
    let (target_left, _) = canonical_eyes(size, iod);
    let partial = Similarity {
        angle,
        scale,
        tx: 0.0,
        ty: 0.0,
    }
    .apply(left);
    Ok(Similarity {
        angle,
        scale,
        tx: target_left.x - partial.x,
        ty: target_left.y - partial.y,
    })
}

/// Warps `img` into a `size x size` frame with bilinear sampling; samples
/// falling outside the source are 0.
pub fn align_face(
    img: &GrayImage,
    landmarks: &LandmarkSet,
    size: usize,
    iod: f64,
) -> Result<AlignedFace, FeatureError> {
    let transform = alignment_transform(landmarks, size, iod)?;
    let image = GrayImage::from_fn(size, size, |u, v| {
        let src = transform.invert(Point::new(u as f64, v as f64));
        sample_bilinear(img, src.x, src.y)
    });
    let landmarks = landmarks.map(|p| transform.apply(p))?;
    Ok(AlignedFace {
        image,
        landmarks,
        transform,
    })
}

fn sample_bilinear(img: &GrayImage, x: f64, y: f64) -> f64 {
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return 0.0;
    }
    let (max_x, max_y) = ((w - 1) as f64, (h - 1) as f64);
    if x < -EDGE_TOL || y < -EDGE_TOL || x > max_x + EDGE_TOL || y > max_y + EDGE_TOL {
        return 0.0;
    }
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    let x0 = (x.floor() as usize).min(w.saturating_sub(2));
    let y0 = (y.floor() as usize).min(h.saturating_sub(2));
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
    let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn landmarks_with_eyes(left: Point, right: Point) -> LandmarkSet {
        let mut pts = vec![Point::new(50.0, 50.0); 68];
        for i in LEFT_EYE {
            pts[i] = left;
        }
        for i in RIGHT_EYE {
            pts[i] = right;
        }
        LandmarkSet::new(pts).unwrap()
    }

    #[test]
    fn eye_center_of_identical_points() {
        let l = landmarks_with_eyes(Point::new(10.0, 20.0), Point::new(60.0, 20.0));
        assert_eq!(eye_centers(&l).0, Point::new(10.0, 20.0));
    }

    #[test]
    fn eye_center_is_arithmetic_mean() {
        let mut pts = vec![Point::default(); 68];
        for (k, i) in RIGHT_EYE.enumerate() {
            pts[i] = Point::new(60.0 + 2.0 * k as f64, 20.0);
        }
        let (_, right) = eye_centers(&LandmarkSet::new(pts).unwrap());
        assert_abs_diff_eq!(right.x, 65.0, epsilon = 1e-12);
        assert_abs_diff_eq!(right.y, 20.0, epsilon = 1e-12);
    }

    #[test]
    fn collinear_eye_points_still_average() {
        let mut pts = vec![Point::default(); 68];
        for (k, i) in LEFT_EYE.enumerate() {
            pts[i] = Point::new(k as f64, k as f64);
        }
        let (left, _) = eye_centers(&LandmarkSet::new(pts).unwrap());
        assert_abs_diff_eq!(left.x, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(left.y, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn horizontal_eyes_in_canonical_place_need_no_rotation() {
        let l = landmarks_with_eyes(Point::new(30.0, 40.0), Point::new(70.0, 40.0));
        let t = alignment_transform(&l, 100, 40.0).unwrap();
        assert_abs_diff_eq!(t.angle, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.scale, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.tx, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.ty, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_eyes_rotate_minus_45_degrees() {
        let l = landmarks_with_eyes(Point::new(30.0, 30.0), Point::new(70.0, 70.0));
        let t = alignment_transform(&l, 112, 44.8).unwrap();
        assert_abs_diff_eq!(t.angle, -(40.0f64).atan2(40.0), epsilon = 1e-15);
        assert_abs_diff_eq!(t.angle.to_degrees(), -45.0, epsilon = 1e-12);
    }

    #[test]
    fn aligned_eyes_are_horizontal_at_canonical_distance() {
        let l = landmarks_with_eyes(Point::new(31.3, 52.0), Point::new(77.9, 33.1));
        let img = GrayImage::filled(120, 120, 0.5);
        let face = align_face(&img, &l, 112, 44.8).unwrap();
        let (left, right) = eye_centers(&face.landmarks);
        assert!((left.y - right.y).abs() < 0.5);
        assert!((left.distance(right) - 44.8).abs() < 0.5);
        let (cl, cr) = canonical_eyes(112, 44.8);
        assert_abs_diff_eq!(left.x, cl.x, epsilon = 1e-9);
        assert_abs_diff_eq!(right.x, cr.x, epsilon = 1e-9);
    }

    #[test]
    fn coincident_eyes_are_rejected() {
        let l = landmarks_with_eyes(Point::new(40.0, 40.0), Point::new(40.0, 40.0));
        let img = GrayImage::filled(10, 10, 0.0);
        assert!(matches!(
            align_face(&img, &l, 112, 44.8),
            Err(FeatureError::DegenerateEyes)
        ));
    }

    #[test]
    fn constant_image_stays_constant_when_source_covers_frame() {
        let l = landmarks_with_eyes(Point::new(180.0, 190.0), Point::new(220.0, 205.0));
        let img = GrayImage::filled(400, 400, 0.37);
        let face = align_face(&img, &l, 112, 44.8).unwrap();
        assert!(face
            .image
            .pixels()
            .iter()
            .all(|&v| (v - 0.37).abs() < 1e-12));
    }

    #[test]
    fn constant_image_is_constant_or_zero_fill() {
        let l = landmarks_with_eyes(Point::new(5.0, 5.0), Point::new(25.0, 9.0));
        let img = GrayImage::filled(40, 40, 0.6);
        let face = align_face(&img, &l, 112, 44.8).unwrap();
        assert!(face
            .image
            .pixels()
            .iter()
            .all(|&v| (v - 0.6).abs() < 1e-12 || v == 0.0));
        assert!(face.image.pixels().contains(&0.0));
    }

    #[test]
    fn transform_inverse_round_trips() {
        let t = Similarity {
            angle: 0.3,
            scale: 1.7,
            tx: -4.0,
            ty: 9.5,
        };
        let p = Point::new(12.5, -3.25);
        let q = t.invert(t.apply(p));
        assert_abs_diff_eq!(p.x, q.x, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, q.y, epsilon = 1e-12);
    }
}
