//! Smooth polynomial boundaries and myocardial segment partitioning.
//!
//! The converged region is traced into an ordered open polyline, split at
//! the apex, and each half is re-parameterized as a quartic fitted to nine
//! equally spaced arc samples. Segment spans are measured on the fitted
//! polylines: per side from the base, two sevenths basal, two sevenths mid,
//! one seventh apical, with the remaining two sevenths next to the apex
//! excluded as the apical cap.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::View;
use crate::geometry::{self, Point};
use crate::poly::{self, PolyError, Quartic};
use crate::raster::Mask;

/// Tracking points sampled per segment.
pub const POINTS_PER_SEGMENT: usize = 5;
/// Arc samples used for each quartic fit.
const FIT_SAMPLES: usize = 9;

#[derive(Debug, Error)]
pub enum ApolyError {
    #[error("region is empty")]
    EmptyRegion,
    #[error("region touches the image border")]
    BorderTouch,
    #[error("polyline of {0} points is too short to split")]
    PolylineTooShort(usize),
    #[error("{side} part has {got} points, need at least {need}")]
    SideTooSmall {
        side: &'static str,
        got: usize,
        need: usize,
    },
    #[error("{side} part: {source}")]
    FitFailed {
        side: &'static str,
        #[source]
        source: PolyError,
    },
    #[error("{side} part has fewer than 5 distinct rows, fit is ill-posed")]
    IllPosed { side: &'static str },
    #[error("{side} part has zero arc length")]
    DegenerateArc { side: &'static str },
    #[error("fitted sides miss the apex by {0:.2} px")]
    ApexMismatch(f64),
    #[error("{side} side of {len:.1} px is too short to partition")]
    SideTooShort { side: &'static str, len: f64 },
}

/// Ordered open boundary polyline with trace diagnostics.
#[derive(Debug, Clone)]
pub struct ContourTrace {
    pub polyline: Vec<Point>,
    /// Set when the region had several components and only the largest was traced.
    pub multiple_components: bool,
}

/// Traces the outer boundary of the region clockwise from the bottom-left
/// boundary pixel, removes the horizontal base chord at the lowest row, and
/// returns the open polyline running left base, over the apex, right base.
pub fn extract_ordered_contour(region: &Mask) -> Result<ContourTrace, ApolyError> {
    let (w, h) = (region.width(), region.height());
    let largest = largest_component(region).ok_or(ApolyError::EmptyRegion)?;
    let multiple_components = largest.count() != region.count();

    for (x, y) in largest.iter_true() {
        if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
            return Err(ApolyError::BorderTouch);
        }
    }

    let closed = moore_trace(&largest);
    let polyline = remove_base_chord(closed);
    Ok(ContourTrace {
        polyline,
        multiple_components,
    })
}

fn largest_component(region: &Mask) -> Option<Mask> {
    let (w, h) = (region.width(), region.height());
    let mut labels = vec![0u32; w * h];
    let mut best: Option<(usize, u32)> = None;
    let mut next = 1u32;
    for (sx, sy) in region.iter_true() {
        if labels[sy * w + sx] != 0 {
            continue;
        }
        let label = next;
        next += 1;
        let mut queue = vec![(sx, sy)];
        labels[sy * w + sx] = label;
        let mut size = 0usize;
        while let Some((x, y)) = queue.pop() {
            size += 1;
            let neighbors = [
                (x.wrapping_sub(1), y),
                (x + 1, y),
                (x, y.wrapping_sub(1)),
                (x, y + 1),
            ];
            for (nx, ny) in neighbors {
                if nx < w && ny < h && region.get(nx, ny) && labels[ny * w + nx] == 0 {
                    labels[ny * w + nx] = label;
                    queue.push((nx, ny));
                }
            }
        }
        if best.map_or(true, |(s, _)| size > s) {
            best = Some((size, label));
        }
    }
    let (_, label) = best?;
    Some(Mask::from_fn(w, h, |x, y| labels[y * w + x] == label))
}

/// Moore-neighbor boundary trace, clockwise in image coordinates, starting
/// at the bottom-left pixel of the component.
fn moore_trace(comp: &Mask) -> Vec<(usize, usize)> {
    // Clockwise neighbor ring starting north.
    const DIRS: [(i64, i64); 8] = [
        (0, -1),
        (1, -1),
        (1, 0),
        (1, 1),
        (0, 1),
        (-1, 1),
        (-1, 0),
        (-1, -1),
    ];
    let (w, h) = (comp.width(), comp.height());
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && comp.get(x as usize, y as usize);

    let start = comp
        .iter_true()
        .max_by_key(|&(x, y)| (y, std::cmp::Reverse(x)))
        .expect("component is nonempty");

    // Single-pixel component.
    if DIRS
        .iter()
        .all(|&(dx, dy)| !inside(start.0 as i64 + dx, start.1 as i64 + dy))
    {
        return vec![start];
    }

    let mut path = vec![start];
    let mut current = start;
    // We conceptually arrived from the south (outside, since start is on the
    // bottom row of the component), so the backtrack direction index is 4.
    let mut backtrack = 4usize;
    loop {
        let mut found = None;
        for step in 1..=8 {
            let dir = (backtrack + step) % 8;
            let nx = current.0 as i64 + DIRS[dir].0;
            let ny = current.1 as i64 + DIRS[dir].1;
            if inside(nx, ny) {
                found = Some((dir, (nx as usize, ny as usize)));
                break;
            }
        }
        let (dir, next) = found.expect("component has more than one pixel");
        // New backtrack: the direction pointing back at the previous pixel,
        // rotated so scanning resumes just past the last empty neighbor.
        backtrack = (dir + 5) % 8;
        if next == start && path.len() > 1 {
            break;
        }
        path.push(next);
        current = next;
        if path.len() > 4 * w * h {
            break; // defensive bound, unreachable for valid masks
        }
    }
    path
}

/// Drops the interior of the trailing bottom-row chord, keeping its entry
/// pixel as the right base tip.
fn remove_base_chord(closed: Vec<(usize, usize)>) -> Vec<Point> {
    let r_max = closed.iter().map(|&(_, y)| y).max().unwrap_or(0);
    let mut cut = closed.len();
    while cut > 1 && closed[cut - 1].1 == r_max {
        cut -= 1;
    }
    // `cut` now indexes the first point of the trailing bottom run; keep it.
    let keep = (cut + 1).min(closed.len());
    closed
        .into_iter()
        .take(keep)
        .map(|(x, y)| Point::new(x as f64, y as f64))
        .collect()
}

/// Splits the open polyline at the apex, the topmost point; plateau ties
/// resolve to the middle of the tied run. Both returned parts include the
/// apex point.
pub fn split_at_apex(polyline: &[Point]) -> Result<(Vec<Point>, Vec<Point>, Point), ApolyError> {
    if polyline.len() < 18 {
        return Err(ApolyError::PolylineTooShort(polyline.len()));
    }
    let min_y = polyline
        .iter()
        .map(|p| p.y)
        .fold(f64::INFINITY, f64::min);
    let run_start = polyline.iter().position(|p| p.y == min_y).unwrap();
    let mut run_end = run_start;
    while run_end + 1 < polyline.len() && polyline[run_end + 1].y == min_y {
        run_end += 1;
    }
    let apex_idx = (run_start + run_end) / 2;
    let apex = polyline[apex_idx];

    let left: Vec<Point> = polyline[..=apex_idx].to_vec();
    let right: Vec<Point> = polyline[apex_idx..].to_vec();
    if left.len() < FIT_SAMPLES {
        return Err(ApolyError::SideTooSmall {
            side: "left",
            got: left.len(),
            need: FIT_SAMPLES,
        });
    }
    if right.len() < FIT_SAMPLES {
        return Err(ApolyError::SideTooSmall {
            side: "right",
            got: right.len(),
            need: FIT_SAMPLES,
        });
    }
    Ok((left, right, apex))
}

/// Final smooth endocardial boundary: per-side quartics with densely
/// resampled polylines and their arc lengths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActivePolynomialBoundary {
    pub apex: Point,
    pub left: Quartic,
    pub right: Quartic,
    /// Base-to-apex polyline on the fitted left quartic, one pixel arc steps.
    pub left_polyline: Vec<Point>,
    /// Apex-to-base polyline on the fitted right quartic.
    pub right_polyline: Vec<Point>,
    /// Arc length of the left part, pixels.
    pub arc_left: f64,
    /// Arc length of the right part, pixels.
    pub arc_right: f64,
}

fn fit_side(part: &[Point], side: &'static str) -> Result<Quartic, ApolyError> {
    if part.len() < FIT_SAMPLES {
        return Err(ApolyError::SideTooSmall {
            side,
            got: part.len(),
            need: FIT_SAMPLES,
        });
    }
    let samples = geometry::equal_arc_samples(part, FIT_SAMPLES)
        .ok_or(ApolyError::DegenerateArc { side })?;
    match poly::fit_quartic_min_points(&samples, FIT_SAMPLES) {
        Ok(fit) => Ok(fit.quartic),
        Err(PolyError::RankDeficient) => Err(ApolyError::IllPosed { side }),
        Err(source) => Err(ApolyError::FitFailed { side, source }),
    }
}

/// Fits the two boundary quartics to nine equal-arc samples per part and
/// resamples them densely. `left_part` runs base to apex, `right_part` apex
/// to base; both include the apex.
pub fn fit_active_polynomials(
    left_part: &[Point],
    right_part: &[Point],
) -> Result<ActivePolynomialBoundary, ApolyError> {
    let left = fit_side(left_part, "left")?;
    let right = fit_side(right_part, "right")?;

    // The boundary apex is where the fitted sides meet; both must agree
    // with it within two pixels. The raw contour's topmost point only
    // fixes the apex row, since noise spikes perturb its abscissa.
    let apex_row = left_part.last().expect("side has points").y;
    let (ax_left, ax_right) = (left.eval(apex_row), right.eval(apex_row));
    let apex = Point::new(0.5 * (ax_left + ax_right), apex_row);
    let apex_dx = 0.5 * (ax_left - ax_right).abs();
    if apex_dx > 2.0 {
        return Err(ApolyError::ApexMismatch(apex_dx));
    }

    let left_base_y = left_part.first().unwrap().y;
    let right_base_y = right_part.last().unwrap().y;
    let (left_polyline, arc_left) = poly::dense_arc_polyline(&left, left_base_y, apex.y);
    let (right_polyline, arc_right) = poly::dense_arc_polyline(&right, apex.y, right_base_y);
    if arc_left <= f64::EPSILON {
        return Err(ApolyError::DegenerateArc { side: "left" });
    }
    if arc_right <= f64::EPSILON {
        return Err(ApolyError::DegenerateArc { side: "right" });
    }

    Ok(ActivePolynomialBoundary {
        apex,
        left,
        right,
        left_polyline,
        right_polyline,
        arc_left,
        arc_right,
    })
}

/// Boundary side, viewed in image orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// One myocardial segment's sampled tracking points on the boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentGeometry {
    pub kappa: u8,
    pub side: Side,
    /// Tracking points ordered base to apex.
    pub points: [Point; POINTS_PER_SEGMENT],
    /// Arc-length span on this side, measured from the base.
    pub span: (f64, f64),
}

/// Segment numbers per `(view, side)`, ordered base to apex.
pub fn side_segments(view: View, side: Side) -> [u8; 3] {
    match (view, side) {
        (View::A4C, Side::Left) => [3, 9, 14],
        (View::A4C, Side::Right) => [6, 12, 16],
        (View::A2C, Side::Left) => [4, 10, 15],
        (View::A2C, Side::Right) => [1, 7, 13],
    }
}

/// Span fractions of one side, from the base: basal, mid, apical. The
/// remaining 2/7 adjacent to the apex is the excluded apical cap.
pub const SPAN_FRACTIONS: [(f64, f64); 3] = [
    (0.0, 2.0 / 7.0),
    (2.0 / 7.0, 4.0 / 7.0),
    (4.0 / 7.0, 5.0 / 7.0),
];

/// Partitions both boundary sides into the view's six segments with five
/// tracking points each, returned in feature-vector order: left side base
/// to apex, then right side apex to base.
pub fn partition_segments(
    boundary: &ActivePolynomialBoundary,
    view: View,
) -> Result<Vec<SegmentGeometry>, ApolyError> {
    let mut left = partition_side(boundary, view, Side::Left)?;
    let right = partition_side(boundary, view, Side::Right)?;
    left.extend(right.into_iter().rev());
    Ok(left)
}

fn partition_side(
    boundary: &ActivePolynomialBoundary,
    view: View,
    side: Side,
) -> Result<Vec<SegmentGeometry>, ApolyError> {
    let (polyline, total) = match side {
        Side::Left => (&boundary.left_polyline, boundary.arc_left),
        Side::Right => (&boundary.right_polyline, boundary.arc_right),
    };
    if total < 14.0 {
        return Err(ApolyError::SideTooShort {
            side: side.name(),
            len: total,
        });
    }
    let cum = geometry::cumulative_arcs(polyline);
    // Arc measured from the base end: the left polyline starts at the base,
    // the right polyline starts at the apex.
    let from_base = |s: f64| match side {
        Side::Left => s,
        Side::Right => total - s,
    };
    let kappas = side_segments(view, side);
    let mut out = Vec::with_capacity(3);
    for (slot, &(f0, f1)) in SPAN_FRACTIONS.iter().enumerate() {
        let (s0, s1) = (f0 * total, f1 * total);
        let step = (s1 - s0) / POINTS_PER_SEGMENT as f64;
        let mut points = [Point::new(0.0, 0.0); POINTS_PER_SEGMENT];
        for (j, slot_point) in points.iter_mut().enumerate() {
            let s = s0 + (j as f64 + 0.5) * step;
            *slot_point = geometry::point_at_arc(polyline, &cum, from_base(s));
        }
        out.push(SegmentGeometry {
            kappa: kappas[slot],
            side,
            points,
            span: (s0, s1),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Mask;

    /// Filled dome: flat base at the bottom row, circular arch above.
    fn dome(w: usize, h: usize, cx: f64, base_y: usize, r: f64) -> Mask {
        Mask::from_fn(w, h, |x, y| {
            let dx = x as f64 - cx;
            let dy = base_y as f64 - y as f64;
            y <= base_y && dy >= 0.0 && dx * dx + dy * dy <= r * r
        })
    }

    #[test]
    fn traces_dome_base_to_base_over_the_arch() {
        let region = dome(100, 80, 50.0, 60, 30.0);
        let trace = extract_ordered_contour(&region).unwrap();
        assert!(!trace.multiple_components);
        let first = trace.polyline.first().unwrap();
        let last = trace.polyline.last().unwrap();
        assert_eq!(first.y, 60.0);
        assert_eq!(last.y, 60.0);
        assert!(first.x < 25.0, "left tip at {}", first.x);
        assert!(last.x > 75.0, "right tip at {}", last.x);
        // Interior of the base chord is removed.
        let bottom = trace.polyline.iter().filter(|p| p.y == 60.0).count();
        assert_eq!(bottom, 2);
        // The arch is traversed: the trace reaches the top of the dome.
        let top = trace.polyline.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        assert!(top <= 31.0);
    }

    #[test]
    fn largest_component_wins_with_warning() {
        let mut region = dome(100, 80, 50.0, 60, 25.0);
        region.set(5, 5, true);
        region.set(5, 6, true);
        let trace = extract_ordered_contour(&region).unwrap();
        assert!(trace.multiple_components);
        assert!(trace.polyline.iter().all(|p| p.x > 10.0));
    }

    #[test]
    fn border_touch_is_rejected() {
        let region = Mask::filled(40, 40, true);
        assert!(matches!(
            extract_ordered_contour(&region),
            Err(ApolyError::BorderTouch)
        ));
    }

    #[test]
    fn empty_region_is_rejected() {
        let region = Mask::new(10, 10);
        assert!(matches!(
            extract_ordered_contour(&region),
            Err(ApolyError::EmptyRegion)
        ));
    }

    #[test]
    fn apex_of_symmetric_arch_is_the_vertex() {
        let polyline: Vec<Point> = (-12..=12)
            .map(|i| Point::new(i as f64 + 12.0, (i * i) as f64 / 4.0))
            .collect();
        let (left, right, apex) = split_at_apex(&polyline).unwrap();
        assert_eq!(apex.x, 12.0);
        assert_eq!(apex.y, 0.0);
        assert!((left.len() as i64 - right.len() as i64).abs() <= 1);
    }

    #[test]
    fn plateau_apex_resolves_to_run_midpoint() {
        let mut polyline: Vec<Point> = (0..10)
            .map(|i| Point::new(i as f64, (11 - i) as f64))
            .collect();
        for i in 0..7 {
            polyline.push(Point::new(10.0 + i as f64, 1.0));
        }
        polyline.extend((0..10).map(|i| Point::new(17.0 + i as f64, 2.0 + i as f64)));
        let (_, _, apex) = split_at_apex(&polyline).unwrap();
        assert_eq!(apex.x, 13.0); // middle of the 7-point plateau
    }

    #[test]
    fn monotone_polyline_fails_side_size() {
        let polyline: Vec<Point> = (0..30)
            .map(|i| Point::new(i as f64, 30.0 - i as f64))
            .collect();
        assert!(matches!(
            split_at_apex(&polyline),
            Err(ApolyError::SideTooSmall { .. })
        ));
    }

    fn quartic_part(q: &Quartic, y_from: f64, y_to: f64, n: usize) -> Vec<Point> {
        (0..n)
            .map(|i| {
                let y = y_from + (y_to - y_from) * i as f64 / (n - 1) as f64;
                Point::new(q.eval(y), y)
            })
            .collect()
    }

    /// U-shaped pair of parts meeting at the apex: the left part follows
    /// `ql`, the right part is its mirror about the apex abscissa, which is
    /// again a quartic.
    fn mirrored_u_parts(
        ql: &Quartic,
        base_y: f64,
        apex_y: f64,
        n: usize,
    ) -> (Vec<Point>, Vec<Point>, Quartic) {
        let left = quartic_part(ql, base_y, apex_y, n);
        let apex = *left.last().unwrap();
        let mut qr = *ql;
        for c in &mut qr.coeffs {
            *c = -*c;
        }
        qr.coeffs[0] += 2.0 * apex.x;
        let right = quartic_part(&qr, apex_y, base_y, n);
        (left, right, qr)
    }

    fn simpson_arc(q: &Quartic, y0: f64, y1: f64) -> f64 {
        let n = 2000;
        let hstep = (y1 - y0) / n as f64;
        let f = |y: f64| (1.0 + q.eval_deriv(y).powi(2)).sqrt();
        let mut acc = f(y0) + f(y1);
        for i in 1..n {
            let y = y0 + hstep * i as f64;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(y);
        }
        (acc * hstep / 3.0).abs()
    }

    #[test]
    fn exact_quartic_parts_recover_coefficients_and_arcs() {
        // Dense parts keep the arc-sample interpolation on the curve.
        let ql = Quartic::new([30.0, -0.9, 0.012, 1e-4, -1e-6]);
        let (left, right, qr) = mirrored_u_parts(&ql, 70.0, 10.0, 6001);
        let b = fit_active_polynomials(&left, &right).unwrap();

        for (a, t) in b.left.coeffs.iter().zip(ql.coeffs.iter()) {
            assert!((a - t).abs() <= 1e-6 * t.abs().max(1e-6), "{a} vs {t}");
        }
        for (a, t) in b.right.coeffs.iter().zip(qr.coeffs.iter()) {
            assert!((a - t).abs() <= 1e-6 * t.abs().max(1e-6), "{a} vs {t}");
        }
        // Oracle: Simpson quadrature of the known quartics.
        let l_true = simpson_arc(&ql, 70.0, 10.0);
        let r_true = simpson_arc(&qr, 10.0, 70.0);
        assert!((b.arc_left - l_true).abs() / l_true < 0.005);
        assert!((b.arc_right - r_true).abs() / r_true < 0.005);
    }

    #[test]
    fn jagged_part_is_smoothed_within_one_pixel() {
        let q = Quartic::new([40.0, -0.5, 0.008, 0.0, 0.0]);
        let (clean_left, clean_right, _) = mirrored_u_parts(&q, 70.0, 10.0, 61);
        let jag = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
        let left: Vec<Point> = clean_left
            .iter()
            .enumerate()
            .map(|(i, p)| Point::new(p.x + jag(i), p.y))
            .collect();
        let right: Vec<Point> = clean_right
            .iter()
            .enumerate()
            .map(|(i, p)| Point::new(p.x + jag(i), p.y))
            .collect();
        let b = fit_active_polynomials(&left, &right).unwrap();
        for y in 11..70 {
            let d = (b.left.eval(y as f64) - q.eval(y as f64)).abs();
            assert!(d <= 1.0, "deviation {d} at y={y}");
        }
    }

    #[test]
    fn horizontal_part_is_ill_posed() {
        let left: Vec<Point> = (0..20).map(|i| Point::new(i as f64, 50.0)).collect();
        let right: Vec<Point> = (0..20)
            .map(|i| Point::new(20.0 + i as f64, 50.0 + i as f64))
            .collect();
        assert!(matches!(
            fit_active_polynomials(&left, &right),
            Err(ApolyError::IllPosed { side: "left" })
        ));
    }

    #[test]
    fn refitting_the_fitted_polyline_is_idempotent() {
        let ql = Quartic::new([35.0, -0.7, 0.01, 5e-5, -8e-7]);
        let (left, right, _) = mirrored_u_parts(&ql, 75.0, 12.0, 6001);
        let b = fit_active_polynomials(&left, &right).unwrap();
        // Re-fit the boundary's own curves, sampled densely so the nine
        // arc samples stay on them; least squares on its own output must
        // return the same polynomials.
        let left2 = quartic_part(&b.left, 75.0, 12.0, 200001);
        let right2 = quartic_part(&b.right, 12.0, 75.0, 200001);
        let b2 = fit_active_polynomials(&left2, &right2).unwrap();
        for (a, c) in b.left.coeffs.iter().zip(b2.left.coeffs.iter()) {
            assert!((a - c).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {c}");
        }
        for y in [20.0, 40.0, 60.0] {
            assert!((b.left.eval(y) - b2.left.eval(y)).abs() < 1e-9);
        }
        // The one-pixel polyline refit agrees to interpolation accuracy.
        let b3 = fit_active_polynomials(&b.left_polyline, &b.right_polyline).unwrap();
        for y in [20.0, 40.0, 60.0] {
            assert!((b.left.eval(y) - b3.left.eval(y)).abs() < 0.05);
        }
    }

    fn arch_boundary(side_len: f64) -> ActivePolynomialBoundary {
        // Two straight vertical sides of equal length for span arithmetic.
        let ql = Quartic::new([20.0, 0.0, 0.0, 0.0, 0.0]);
        let qr = Quartic::new([80.0, 0.0, 0.0, 0.0, 0.0]);
        let (lp, ll) = poly::dense_arc_polyline(&ql, side_len + 10.0, 10.0);
        let (rp, rl) = poly::dense_arc_polyline(&qr, 10.0, side_len + 10.0);
        ActivePolynomialBoundary {
            apex: Point::new(20.0, 10.0),
            left: ql,
            right: qr,
            left_polyline: lp,
            right_polyline: rp,
            arc_left: ll,
            arc_right: rl,
        }
    }

    #[test]
    fn spans_follow_the_sevenths_rule() {
        let b = arch_boundary(70.0);
        let segs = partition_segments(&b, View::A4C).unwrap();
        assert_eq!(segs.len(), 6);
        let left: Vec<&SegmentGeometry> = segs.iter().filter(|s| s.side == Side::Left).collect();
        let widths: Vec<f64> = left.iter().map(|s| s.span.1 - s.span.0).collect();
        assert!((widths[0] - 20.0).abs() < 1e-9);
        assert!((widths[1] - 20.0).abs() < 1e-9);
        assert!((widths[2] - 10.0).abs() < 1e-9);
        // Cap: spans end at 5/7 of the side, the rest is excluded.
        assert!((left.last().unwrap().span.1 - 50.0).abs() < 1e-9);
        let covered: f64 = widths.iter().sum();
        assert!((covered + 20.0 - 70.0).abs() < 1.0);
    }

    #[test]
    fn segment_numbering_matches_view_ordering() {
        let b = arch_boundary(70.0);
        let a4c: Vec<u8> = partition_segments(&b, View::A4C)
            .unwrap()
            .iter()
            .map(|s| s.kappa)
            .collect();
        assert_eq!(a4c, vec![3, 9, 14, 16, 12, 6]);
        let a2c: Vec<u8> = partition_segments(&b, View::A2C)
            .unwrap()
            .iter()
            .map(|s| s.kappa)
            .collect();
        assert_eq!(a2c, vec![4, 10, 15, 13, 7, 1]);
    }

    #[test]
    fn short_side_is_rejected() {
        let b = arch_boundary(12.0);
        assert!(matches!(
            partition_segments(&b, View::A4C),
            Err(ApolyError::SideTooShort { .. })
        ));
    }

    #[test]
    fn segment_points_are_translation_equivariant() {
        let ql = Quartic::new([30.0, -0.4, 0.006, 2e-5, -3e-7]);
        let (left, right, _) = mirrored_u_parts(&ql, 80.0, 15.0, 45);
        let b = fit_active_polynomials(&left, &right).unwrap();
        let segs = partition_segments(&b, View::A4C).unwrap();

        let (dx, dy) = (7.0, -3.0);
        let shift = |pts: &[Point]| -> Vec<Point> {
            pts.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect()
        };
        let b2 = fit_active_polynomials(&shift(&left), &shift(&right)).unwrap();
        let segs2 = partition_segments(&b2, View::A4C).unwrap();
        for (a, c) in segs.iter().zip(segs2.iter()) {
            assert_eq!(a.kappa, c.kappa);
            for (p, q) in a.points.iter().zip(c.points.iter()) {
                assert!((q.x - p.x - dx).abs() < 1e-6);
                assert!((q.y - p.y - dy).abs() < 1e-6);
            }
        }
    }
}
