//! Segment displacement curves, opposite-wall intervals, and the
//! normalized maximum-displacement features.
//!
//! Displacement of a segment at frame `t` is the mean Euclidean distance of
//! its five tracking points from their positions in the reference frame
//! `t = 0`. The normalizing interval between opposite segments is the mean
//! Manhattan distance of index-aligned points, and a segment's feature is
//! its peak displacement divided by the minimum interval over the cycle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apoly::POINTS_PER_SEGMENT;
use crate::dataio::View;
use crate::geometry::Point;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("segment {0} has no frames")]
    EmptyTrack(u8),
    #[error("segments {0} and {1} span {2} and {3} frames")]
    FrameCountMismatch(u8, u8, usize, usize),
    #[error("displacement and interval span {0} and {1} frames")]
    CycleMismatch(usize, usize),
    #[error("opposite segments {0} and {1} touch: minimum interval is zero")]
    DegenerateInterval(u8, u8),
    #[error("view {view} is missing segment {kappa}")]
    MissingSegment { view: View, kappa: u8 },
    #[error("expected a {expected} feature vector, got {got}")]
    ViewMismatch { expected: View, got: View },
}

/// Tracking-point positions of one segment across the cardiac cycle.
/// Point `i` corresponds positionally across frames: it is always the
/// `i`-th equal-arc sample of the segment span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentTrack {
    pub kappa: u8,
    pub frames: Vec<[Point; POINTS_PER_SEGMENT]>,
}

/// Displacement curve of one segment, pixels, zero at the reference frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentTrace {
    pub kappa: u8,
    pub displacement: Vec<f64>,
}

/// Interval curve between two opposite segments, pixels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalTrace {
    pub pair: (u8, u8),
    pub interval: Vec<f64>,
}

/// Mean point displacement from the reference frame, per frame.
pub fn displacement_curve(track: &SegmentTrack) -> Result<SegmentTrace, KinematicsError> {
    if track.frames.is_empty() {
        return Err(KinematicsError::EmptyTrack(track.kappa));
    }
    let reference = &track.frames[0];
    let displacement = track
        .frames
        .iter()
        .map(|pts| {
            pts.iter()
                .zip(reference.iter())
                .map(|(p, r)| p.distance(r))
                .sum::<f64>()
                / POINTS_PER_SEGMENT as f64
        })
        .collect();
    Ok(SegmentTrace {
        kappa: track.kappa,
        displacement,
    })
}

/// Mean Manhattan distance between index-aligned points of two opposite
/// segments, per frame.
pub fn interval_curve(
    a: &SegmentTrack,
    b: &SegmentTrack,
) -> Result<IntervalTrace, KinematicsError> {
    if a.frames.is_empty() {
        return Err(KinematicsError::EmptyTrack(a.kappa));
    }
    if a.frames.len() != b.frames.len() {
        return Err(KinematicsError::FrameCountMismatch(
            a.kappa,
            b.kappa,
            a.frames.len(),
            b.frames.len(),
        ));
    }
    let interval = a
        .frames
        .iter()
        .zip(b.frames.iter())
        .map(|(pa, pb)| {
            pa.iter()
                .zip(pb.iter())
                .map(|(p, q)| p.manhattan(q))
                .sum::<f64>()
                / POINTS_PER_SEGMENT as f64
        })
        .collect();
    Ok(IntervalTrace {
        pair: (a.kappa, b.kappa),
        interval,
    })
}

/// A segment feature value; `out_of_range` flags values above one, which
/// the normalization aims to avoid but cannot strictly rule out.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FeatureValue {
    pub value: f64,
    pub out_of_range: bool,
}

/// Peak displacement normalized by the smallest opposite-wall interval,
/// both taken over every cycle frame including the reference.
pub fn segment_feature(
    trace: &SegmentTrace,
    interval: &IntervalTrace,
) -> Result<FeatureValue, KinematicsError> {
    if trace.displacement.len() != interval.interval.len() {
        return Err(KinematicsError::CycleMismatch(
            trace.displacement.len(),
            interval.interval.len(),
        ));
    }
    let max_d = trace.displacement.iter().copied().fold(0.0f64, f64::max);
    let min_i = interval
        .interval
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(min_i > 0.0) {
        return Err(KinematicsError::DegenerateInterval(
            interval.pair.0,
            interval.pair.1,
        ));
    }
    let value = max_d / min_i;
    Ok(FeatureValue {
        value,
        out_of_range: value > 1.0,
    })
}

/// The opposite segment paired with `kappa` for interval normalization.
/// Pairs mirror the view's base-to-apex ordering: first with last, second
/// with fifth, third with fourth.
pub fn opposite_segment(view: View, kappa: u8) -> Option<u8> {
    let order = view.segments();
    let pos = order.iter().position(|&k| k == kappa)?;
    Some(order[order.len() - 1 - pos])
}

/// Ordered per-view feature vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewFeatures {
    pub view: View,
    /// Features in the view's segment ordering (left base-to-apex, then
    /// right apex-to-base).
    pub phi: [f64; 6],
    /// Segments whose feature exceeded one.
    pub out_of_range: Vec<u8>,
}

/// Concatenated two-view feature vector, four-chamber first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FusedFeatures {
    pub features: [f64; 12],
}

/// Computes the six features of one view from its segment tracks.
/// All six view segments must be present and equally long.
pub fn view_feature_vector(
    view: View,
    tracks: &[SegmentTrack],
) -> Result<ViewFeatures, KinematicsError> {
    let order = view.segments();
    let find = |kappa: u8| {
        tracks
            .iter()
            .find(|t| t.kappa == kappa)
            .ok_or(KinematicsError::MissingSegment { view, kappa })
    };
    let mut phi = [0.0; 6];
    let mut out_of_range = Vec::new();
    for (i, &kappa) in order.iter().enumerate() {
        let track = find(kappa)?;
        let opposite = find(opposite_segment(view, kappa).expect("kappa is in the view"))?;
        let trace = displacement_curve(track)?;
        let interval = interval_curve(track, opposite)?;
        let f = segment_feature(&trace, &interval)?;
        phi[i] = f.value;
        if f.out_of_range {
            out_of_range.push(kappa);
        }
    }
    Ok(ViewFeatures {
        view,
        phi,
        out_of_range,
    })
}

/// Concatenates the four-chamber and two-chamber feature vectors.
pub fn concat_features(
    phi1: &ViewFeatures,
    phi2: &ViewFeatures,
) -> Result<FusedFeatures, KinematicsError> {
    if phi1.view != View::A4C {
        return Err(KinematicsError::ViewMismatch {
            expected: View::A4C,
            got: phi1.view,
        });
    }
    if phi2.view != View::A2C {
        return Err(KinematicsError::ViewMismatch {
            expected: View::A2C,
            got: phi2.view,
        });
    }
    let mut features = [0.0; 12];
    features[..6].copy_from_slice(&phi1.phi);
    features[6..].copy_from_slice(&phi2.phi);
    Ok(FusedFeatures { features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn track(kappa: u8, frames: Vec<[Point; 5]>) -> SegmentTrack {
        SegmentTrack { kappa, frames }
    }

    fn five(f: impl Fn(usize) -> Point) -> [Point; 5] {
        [f(0), f(1), f(2), f(3), f(4)]
    }

    #[test]
    fn zero_motion_gives_zero_curve() {
        let pts = five(|i| Point::new(i as f64, 0.0));
        let t = track(3, vec![pts, pts, pts]);
        let d = displacement_curve(&t).unwrap();
        assert_eq!(d.displacement, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn rigid_translation_345() {
        let base = five(|i| Point::new(i as f64, 0.0));
        let moved = five(|i| Point::new(i as f64 + 3.0, 4.0));
        let t = track(3, vec![base, moved]);
        let d = displacement_curve(&t).unwrap();
        assert_eq!(d.displacement[0], 0.0);
        assert!((d.displacement[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_turn_on_unit_circle_moves_sqrt_two() {
        use std::f64::consts::FRAC_PI_2;
        let base = five(|i| {
            let a = i as f64 * 0.3;
            Point::new(a.cos(), a.sin())
        });
        let turned = five(|i| {
            let a = i as f64 * 0.3 + FRAC_PI_2;
            Point::new(a.cos(), a.sin())
        });
        let t = track(9, vec![base, turned]);
        let d = displacement_curve(&t).unwrap();
        // Oracle: direct pairwise distances.
        let direct: f64 = base
            .iter()
            .zip(turned.iter())
            .map(|(p, q)| p.distance(q))
            .sum::<f64>()
            / 5.0;
        assert!((d.displacement[1] - direct).abs() < 1e-12);
        assert!((d.displacement[1] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn interval_of_identical_segments_is_zero() {
        let pts = five(|i| Point::new(i as f64, 2.0));
        let a = track(3, vec![pts, pts]);
        let b = track(6, vec![pts, pts]);
        let i = interval_curve(&a, &b).unwrap();
        assert_eq!(i.interval, vec![0.0, 0.0]);
    }

    #[test]
    fn interval_manhattan_sums_offsets() {
        let pts = five(|i| Point::new(i as f64, 2.0));
        let shifted10 = five(|i| Point::new(i as f64 + 10.0, 2.0));
        let a = track(3, vec![pts, pts]);
        let b = track(6, vec![shifted10, shifted10]);
        assert_eq!(interval_curve(&a, &b).unwrap().interval, vec![10.0, 10.0]);

        let shifted34 = five(|i| Point::new(i as f64 + 3.0, -2.0));
        let c = track(6, vec![shifted34, shifted34]);
        assert_eq!(interval_curve(&a, &c).unwrap().interval, vec![7.0, 7.0]);
    }

    #[test]
    fn feature_is_peak_over_minimum() {
        let trace = SegmentTrace {
            kappa: 3,
            displacement: vec![0.0, 1.0, 2.0, 0.5],
        };
        let interval = IntervalTrace {
            pair: (3, 6),
            interval: vec![12.0, 10.0, 11.0, 13.0],
        };
        let f = segment_feature(&trace, &interval).unwrap();
        assert!((f.value - 0.2).abs() < 1e-15);
        assert!(!f.out_of_range);
    }

    #[test]
    fn zero_motion_feature_is_zero() {
        let trace = SegmentTrace {
            kappa: 3,
            displacement: vec![0.0, 0.0],
        };
        let interval = IntervalTrace {
            pair: (3, 6),
            interval: vec![5.0, 5.0],
        };
        assert_eq!(segment_feature(&trace, &interval).unwrap().value, 0.0);
    }

    #[test]
    fn rigid_translation_feature_case() {
        let base = five(|i| Point::new(i as f64, 0.0));
        let moved = five(|i| Point::new(i as f64 + 3.0, 4.0));
        let a = track(3, vec![base, moved]);
        let opp_pts = five(|i| Point::new(i as f64 + 20.0, 0.0));
        let opp_moved = five(|i| Point::new(i as f64 + 23.0, 4.0));
        let b = track(6, vec![opp_pts, opp_moved]);
        let trace = displacement_curve(&a).unwrap();
        let interval = interval_curve(&a, &b).unwrap();
        // Oracle: brute-force scan of the curves.
        let max_d = trace.displacement.iter().cloned().fold(0.0f64, f64::max);
        let min_i = interval.interval.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((max_d - 5.0).abs() < 1e-12);
        assert!((min_i - 20.0).abs() < 1e-12);
        let f = segment_feature(&trace, &interval).unwrap();
        assert!((f.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn touching_walls_are_degenerate() {
        let trace = SegmentTrace {
            kappa: 3,
            displacement: vec![0.0, 1.0],
        };
        let interval = IntervalTrace {
            pair: (3, 6),
            interval: vec![4.0, 0.0],
        };
        assert!(matches!(
            segment_feature(&trace, &interval),
            Err(KinematicsError::DegenerateInterval(3, 6))
        ));
    }

    #[test]
    fn opposite_pairs_mirror_the_view_ordering() {
        // Oracle: reverse-zip of the ordered segment list.
        for view in [View::A4C, View::A2C] {
            let order = view.segments();
            for (i, &k) in order.iter().enumerate() {
                assert_eq!(opposite_segment(view, k), Some(order[5 - i]));
            }
        }
        assert_eq!(opposite_segment(View::A4C, 3), Some(6));
        assert_eq!(opposite_segment(View::A4C, 9), Some(12));
        assert_eq!(opposite_segment(View::A4C, 14), Some(16));
        assert_eq!(opposite_segment(View::A2C, 4), Some(1));
        assert_eq!(opposite_segment(View::A2C, 10), Some(7));
        assert_eq!(opposite_segment(View::A2C, 15), Some(13));
        assert_eq!(opposite_segment(View::A4C, 4), None);
    }

    /// Two-frame synthetic tracks for all six segments of a view, with
    /// per-segment displacement magnitudes chosen by the caller.
    fn view_tracks(view: View, motion: impl Fn(u8) -> f64) -> Vec<SegmentTrack> {
        view.segments()
            .iter()
            .enumerate()
            .map(|(s, &kappa)| {
                let x0 = if s < 3 { 0.0 } else { 40.0 };
                let base = five(|i| Point::new(x0, 10.0 * s as f64 + i as f64));
                let m = motion(kappa);
                let moved = five(|i| Point::new(x0 + m, 10.0 * s as f64 + i as f64));
                track(kappa, vec![base, moved])
            })
            .collect()
    }

    #[test]
    fn feature_vector_is_ordered_like_the_view() {
        let tracks = view_tracks(View::A4C, |k| k as f64);
        let vf = view_feature_vector(View::A4C, &tracks).unwrap();
        // Distinct displacement per segment makes the ordering observable.
        let expect_order = [3u8, 9, 14, 16, 12, 6];
        for (i, &k) in expect_order.iter().enumerate() {
            let opp = opposite_segment(View::A4C, k).unwrap();
            let tr = tracks.iter().find(|t| t.kappa == k).unwrap();
            let op = tracks.iter().find(|t| t.kappa == opp).unwrap();
            let f = segment_feature(
                &displacement_curve(tr).unwrap(),
                &interval_curve(tr, op).unwrap(),
            )
            .unwrap();
            assert_eq!(vf.phi[i], f.value);
        }
    }

    #[test]
    fn a2c_vector_uses_mirrored_pairs() {
        let tracks = view_tracks(View::A2C, |k| k as f64 / 2.0);
        let vf = view_feature_vector(View::A2C, &tracks).unwrap();
        let order = [4u8, 10, 15, 13, 7, 1];
        for (i, &k) in order.iter().enumerate() {
            let tr = tracks.iter().find(|t| t.kappa == k).unwrap();
            let opp = tracks
                .iter()
                .find(|t| t.kappa == opposite_segment(View::A2C, k).unwrap())
                .unwrap();
            let f = segment_feature(
                &displacement_curve(tr).unwrap(),
                &interval_curve(tr, opp).unwrap(),
            )
            .unwrap();
            assert_eq!(vf.phi[i], f.value);
        }
    }

    #[test]
    fn missing_segment_is_reported() {
        let mut tracks = view_tracks(View::A4C, |_| 1.0);
        tracks.retain(|t| t.kappa != 12);
        assert!(matches!(
            view_feature_vector(View::A4C, &tracks),
            Err(KinematicsError::MissingSegment { kappa: 12, .. })
        ));
    }

    #[test]
    fn concatenation_orders_views() {
        let a4c = ViewFeatures {
            view: View::A4C,
            phi: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            out_of_range: vec![],
        };
        let a2c = ViewFeatures {
            view: View::A2C,
            phi: [0.7, 0.8, 0.9, 1.0, 1.1, 1.2],
            out_of_range: vec![],
        };
        let fused = concat_features(&a4c, &a2c).unwrap();
        for i in 0..12 {
            assert!((fused.features[i] - 0.1 * (i + 1) as f64).abs() < 1e-12);
        }
        assert!(matches!(
            concat_features(&a2c, &a4c),
            Err(KinematicsError::ViewMismatch { .. })
        ));
        let zero = ViewFeatures {
            view: View::A4C,
            phi: [0.0; 6],
            out_of_range: vec![],
        };
        let zero2 = ViewFeatures {
            view: View::A2C,
            phi: [0.0; 6],
            out_of_range: vec![],
        };
        assert_eq!(concat_features(&zero, &zero2).unwrap().features, [0.0; 12]);
    }

    proptest! {
        #[test]
        fn rigid_translation_leaves_everything_unchanged(
            dx in -50.0f64..50.0,
            dy in -50.0f64..50.0,
        ) {
            let tracks = view_tracks(View::A4C, |k| k as f64 / 3.0);
            let shifted: Vec<SegmentTrack> = tracks
                .iter()
                .map(|t| SegmentTrack {
                    kappa: t.kappa,
                    frames: t
                        .frames
                        .iter()
                        .map(|pts| {
                            let mut out = *pts;
                            for p in &mut out {
                                p.x += dx;
                                p.y += dy;
                            }
                            out
                        })
                        .collect(),
                })
                .collect();
            let a = view_feature_vector(View::A4C, &tracks).unwrap();
            let b = view_feature_vector(View::A4C, &shifted).unwrap();
            for (x, y) in a.phi.iter().zip(b.phi.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn uniform_scaling_leaves_features_unchanged(
            scale in 0.1f64..10.0,
            cx in -20.0f64..20.0,
            cy in -20.0f64..20.0,
        ) {
            let tracks = view_tracks(View::A4C, |k| k as f64 / 3.0);
            let scaled: Vec<SegmentTrack> = tracks
                .iter()
                .map(|t| SegmentTrack {
                    kappa: t.kappa,
                    frames: t
                        .frames
                        .iter()
                        .map(|pts| {
                            let mut out = *pts;
                            for p in &mut out {
                                p.x = cx + scale * (p.x - cx);
                                p.y = cy + scale * (p.y - cy);
                            }
                            out
                        })
                        .collect(),
                })
                .collect();
            let a = view_feature_vector(View::A4C, &tracks).unwrap();
            let b = view_feature_vector(View::A4C, &scaled).unwrap();
            for (x, y) in a.phi.iter().zip(b.phi.iter()) {
                prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
            }
        }
    }
}
