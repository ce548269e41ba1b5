//! Quartic polynomials `x = p(y)` and their least-squares fitting.
//!
//! Near-vertical ventricle walls make the horizontal coordinate a
//! single-valued function of the row, so each wall side is modeled as a
//! degree-4 polynomial in `y`. Fits are solved by SVD on a Vandermonde
//! system built in a centered, scaled ordinate to keep the conditioning
//! independent of image size.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;

pub const DEGREE: usize = 4;
const COEFFS: usize = DEGREE + 1;

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("need at least {min} points for a degree-{DEGREE} fit, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("fit is rank deficient: fewer than {COEFFS} distinct ordinates")]
    RankDeficient,
}

/// Quartic with coefficients in ascending powers of `y`:
/// `x = c[0] + c[1] y + c[2] y^2 + c[3] y^3 + c[4] y^4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartic {
    pub coeffs: [f64; COEFFS],
}

impl Quartic {
    pub fn new(coeffs: [f64; COEFFS]) -> Self {
        Self { coeffs }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let c = &self.coeffs;
        ((c[4] * y + c[3]) * y + c[2]) * y * y + c[1] * y + c[0]
    }

    pub fn eval_deriv(&self, y: f64) -> f64 {
        let c = &self.coeffs;
        ((4.0 * c[4] * y + 3.0 * c[3]) * y + 2.0 * c[2]) * y + c[1]
    }
}

/// Least-squares quartic fit together with its root-mean-square residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticFit {
    pub quartic: Quartic,
    pub rms_residual: f64,
}

/// Fits `x = p(y)` to the points by linear least squares.
///
/// Errors when fewer than 9 points are supplied or when the points span
/// fewer than 5 distinct `y` values.
pub fn fit_quartic(points: &[Point]) -> Result<QuarticFit, PolyError> {
    fit_quartic_min_points(points, 9)
}

/// Same as [`fit_quartic`] with an explicit minimum point count.
pub fn fit_quartic_min_points(points: &[Point], min: usize) -> Result<QuarticFit, PolyError> {
    let min = min.max(COEFFS);
    if points.len() < min {
        return Err(PolyError::TooFewPoints {
            min,
            got: points.len(),
        });
    }
    if distinct_ordinates(points) < COEFFS {
        return Err(PolyError::RankDeficient);
    }

    let (y_min, y_max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.y), hi.max(p.y))
        });
    let mid = 0.5 * (y_min + y_max);
    let half = 0.5 * (y_max - y_min);

    let n = points.len();
    let a = DMatrix::from_fn(n, COEFFS, |r, c| {
        let u = (points[r].y - mid) / half;
        u.powi(c as i32)
    });
    let b = DVector::from_fn(n, |r, _| points[r].x);

    let svd = a.clone().svd(true, true);
    let tol = 1e-10 * svd.singular_values.max();
    if svd.rank(tol) < COEFFS {
        return Err(PolyError::RankDeficient);
    }
    let scaled = svd.solve(&b, tol).expect("svd factors requested");

    let residual = (&a * &scaled - &b).norm() / (n as f64).sqrt();
    let quartic = Quartic::new(unscale_coefficients(scaled.as_slice(), mid, half));
    Ok(QuarticFit {
        quartic,
        rms_residual: residual,
    })
}

/// Converts coefficients of `p(u)` with `u = (y - mid)/half` into
/// coefficients in raw `y` by expanding the affine substitution.
fn unscale_coefficients(scaled: &[f64], mid: f64, half: f64) -> [f64; COEFFS] {
    let alpha = 1.0 / half;
    let beta = -mid / half;
    let mut out = [0.0; COEFFS];
    // u^k as a polynomial in y, built by repeated multiplication by (beta + alpha*y).
    let mut upow = [0.0; COEFFS];
    upow[0] = 1.0;
    let mut upow_len = 1;
    for (k, &c) in scaled.iter().enumerate() {
        for i in 0..upow_len {
            out[i] += c * upow[i];
        }
        if k + 1 < COEFFS {
            let mut next = [0.0; COEFFS];
            for i in 0..upow_len {
                next[i] += beta * upow[i];
                next[i + 1] += alpha * upow[i];
            }
            upow = next;
            upow_len += 1;
        }
    }
    out
}

fn distinct_ordinates(points: &[Point]) -> usize {
    let mut ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut count = 1;
    for w in ys.windows(2) {
        if (w[1] - w[0]).abs() > 1e-9 {
            count += 1;
        }
    }
    count
}

/// Samples the curve `(p(y), y)` densely and re-emits points spaced one
/// pixel apart in arc length, walking from `y_from` to `y_to`.
/// Returns the polyline and its total arc length.
pub fn dense_arc_polyline(q: &Quartic, y_from: f64, y_to: f64) -> (Vec<Point>, f64) {
    const SUBSTEPS_PER_PX: f64 = 8.0;
    const EMIT_SPACING: f64 = 1.0;

    let span = (y_to - y_from).abs();
    let steps = ((span * SUBSTEPS_PER_PX).ceil() as usize).max(1);
    let dy = (y_to - y_from) / steps as f64;

    let mut out = Vec::with_capacity(steps / 8 + 2);
    let mut prev = Point::new(q.eval(y_from), y_from);
    out.push(prev);
    let mut total = 0.0;
    let mut next_emit = EMIT_SPACING;
    for i in 1..=steps {
        let y = y_from + dy * i as f64;
        let cur = Point::new(q.eval(y), y);
        let seg = prev.distance(&cur);
        let seg_start = total;
        total += seg;
        while next_emit <= total && seg > f64::EPSILON {
            let t = (next_emit - seg_start) / seg;
            out.push(Point::new(
                prev.x + t * (cur.x - prev.x),
                prev.y + t * (cur.y - prev.y),
            ));
            next_emit += EMIT_SPACING;
        }
        prev = cur;
    }
    if out.last() != Some(&prev) {
        out.push(prev);
    }
    (out, total)
}
