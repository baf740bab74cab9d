//! Planar geometry: points, angle wrapping and polyline projection.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// A point (or vector) in the plane, meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `heading`.
    pub fn from_heading(heading: f64) -> Self {
        Self::new(heading.cos(), heading.sin())
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product; positive when `other` is to the left of `self`.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Left-hand normal (rotated +90°).
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn heading(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    // rem_euclid maps -π to π already; exact 0 stays 0.
    a
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Distance along the polyline from its first vertex to the foot point.
    pub arc_length: f64,
    /// Signed distance from the polyline, positive on the left of the direction of travel.
    pub lateral_offset: f64,
    /// Heading of the segment carrying the foot point.
    pub tangent_heading: f64,
    /// The closest point on the polyline.
    pub foot: Point,
    /// Index of the segment carrying the foot point.
    pub segment: usize,
}

/// Projects `point` onto `polyline` (at least two distinct vertices).
///
/// The closest point is searched segment by segment; on ties the earlier
/// segment wins, so a point exactly abreast of a vertex takes the tangent of
/// the segment ending there. The lateral offset magnitude always equals the
/// Euclidean distance to the foot point; its sign comes from the side of the
/// carrying segment the point lies on (points on the segment's own line count
/// as left).
pub fn project_to_polyline(point: Point, polyline: &[Point]) -> Projection {
    debug_assert!(polyline.len() >= 2);
    let mut best: Option<(f64, Projection)> = None;
    let mut start_s = 0.0;
    for (i, w) in polyline.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let seg = b - a;
        let len = seg.norm();
        let u = ((point - a).dot(seg) / (len * len)).clamp(0.0, 1.0);
        let foot = a + seg * u;
        let dist = point.distance(foot);
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            let side = seg.cross(point - foot);
            let sign = if side < 0.0 { -1.0 } else { 1.0 };
            best = Some((
                dist,
                Projection {
                    arc_length: start_s + u * len,
                    lateral_offset: sign * dist,
                    tangent_heading: seg.heading(),
                    foot,
                    segment: i,
                },
            ));
        }
        start_s += len;
    }
    best.map(|(_, p)| p).expect("polyline has at least one segment")
}

/// Total length of a polyline.
pub fn polyline_length(polyline: &[Point]) -> f64 {
    polyline.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Point and tangent heading at arc length `s`, clamped to `[0, length]`.
pub fn point_at_arc_length(polyline: &[Point], s: f64) -> (Point, f64) {
    let mut remaining = s.max(0.0);
    let segments = polyline.len() - 1;
    for (i, w) in polyline.windows(2).enumerate() {
        let seg = w[1] - w[0];
        let len = seg.norm();
        if remaining <= len || i + 1 == segments {
            let u = (remaining / len).min(1.0);
            return (w[0] + seg * u, seg.heading());
        }
        remaining -= len;
    }
    unreachable!("polyline has at least one segment")
}
