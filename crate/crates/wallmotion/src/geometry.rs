//! Planar points and polyline arc-length utilities.

use serde::{Deserialize, Serialize};

/// A point in image coordinates: `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn manhattan(&self, other: &Point) -> f64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }
}

/// Cumulative chord lengths along a polyline; first entry is always zero.
pub fn cumulative_arcs(points: &[Point]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(points.len());
    let mut total = 0.0;
    cum.push(0.0);
    for pair in points.windows(2) {
        total += pair[0].distance(&pair[1]);
        cum.push(total);
    }
    cum
}

/// Point at arc position `s` along the polyline, linearly interpolated.
/// `s` is clamped to the polyline extent.
pub fn point_at_arc(points: &[Point], cum: &[f64], s: f64) -> Point {
    debug_assert_eq!(points.len(), cum.len());
    let total = *cum.last().unwrap();
    let s = s.clamp(0.0, total);
    // Binary search for the segment containing s.
    let idx = match cum.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
        Ok(i) => return points[i],
        Err(i) => i,
    };
    let (i0, i1) = (idx - 1, idx.min(points.len() - 1));
    let seg = cum[i1] - cum[i0];
    if seg <= f64::EPSILON {
        return points[i0];
    }
    let t = (s - cum[i0]) / seg;
    Point::new(
        points[i0].x + t * (points[i1].x - points[i0].x),
        points[i0].y + t * (points[i1].y - points[i0].y),
    )
}

/// `n` points spaced at equal arc length along the polyline, endpoints included.
/// Returns `None` when the polyline has zero total length.
pub fn equal_arc_samples(points: &[Point], n: usize) -> Option<Vec<Point>> {
    assert!(n >= 2);
    if points.len() < 2 {
        return None;
    }
    let cum = cumulative_arcs(points);
    let total = *cum.last().unwrap();
    if total <= f64::EPSILON {
        return None;
    }
    Some(
        (0..n)
            .map(|i| point_at_arc(points, &cum, total * i as f64 / (n - 1) as f64))
            .collect(),
    )
}
