use crate::model::{GrayImage, Point};

use super::AlignedFace;

const HULL_TOL: f64 = 1e-9;

/// Convex hull in counter-clockwise order (y-up orientation of the cross
/// product), collinear points dropped. Andrew's monotone chain.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Inclusive point-in-hull test; boundary points count as inside.
pub fn hull_contains(hull: &[Point], p: Point) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0].distance(p) <= HULL_TOL,
        2 => on_segment(hull[0], hull[1], p),
        n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= -HULL_TOL),
    }
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    let len = a.distance(b);
    if len == 0.0 {
        return a.distance(p) <= HULL_TOL;
    }
    let along = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / (len * len);
    (cross(a, b, p) / len).abs() <= HULL_TOL && (-HULL_TOL..=1.0 + HULL_TOL).contains(&along)
}

/// Zeroes every pixel outside the convex hull of the aligned landmarks.
pub fn mask_face(face: &AlignedFace) -> AlignedFace {
    let hull = convex_hull(face.landmarks.points());
    let src = &face.image;
    let image = GrayImage::from_fn(src.width(), src.height(), |x, y| {
        if hull_contains(&hull, Point::new(x as f64, y as f64)) {
            src.get(x, y)
        } else {
            0.0
        }
    });
    AlignedFace {
        image,
        landmarks: face.landmarks.clone(),
        transform: face.transform,
    }
}
