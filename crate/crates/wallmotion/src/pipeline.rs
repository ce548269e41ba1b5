//! End-to-end orchestration: frames to boundaries to segment tracks to
//! per-view features to an evaluation-ready cohort.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apoly::{self, ActivePolynomialBoundary, ApolyError, SegmentGeometry};
use crate::contour::{
    self, ChanVeseParams, ContourError, RegionMask, RidgeConstraint, RidgeParams, Roi,
};
use crate::dataio::{self, DataError, DatasetManifest, EchoRecording, View};
use crate::eval::{Cohort, SubjectRecord};
use crate::kinematics::{self, KinematicsError, SegmentTrack, ViewFeatures};
use crate::raster::Image;

/// Tunable stages of the boundary pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub chan_vese: ChanVeseParams,
    pub ridge: RidgeParams,
    /// Fraction of each image dimension covered by the centered region of
    /// interest for ridge detection.
    pub roi_fraction: f64,
    /// Shrink factor of the constraint interior used as the seed region.
    pub init_scale: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            chan_vese: ChanVeseParams::default(),
            ridge: RidgeParams::default(),
            roi_fraction: 0.6,
            init_scale: 0.5,
        }
    }
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error(transparent)]
    Boundary(#[from] ApolyError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{subject} {view} frame {frame}: {source}")]
    Frame {
        subject: String,
        view: View,
        frame: usize,
        #[source]
        source: FrameError,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{subject} {view}: {source}")]
    Kinematics {
        subject: String,
        view: View,
        #[source]
        source: KinematicsError,
    },
}

/// Everything extracted from a single frame.
#[derive(Debug, Clone)]
pub struct FrameAnalysis {
    pub constraint: RidgeConstraint,
    pub region: RegionMask,
    pub boundary: ActivePolynomialBoundary,
    pub segments: Vec<SegmentGeometry>,
    pub multiple_components: bool,
}

/// Runs ridge detection, constrained evolution, boundary fitting, and
/// segment partitioning on one frame.
pub fn analyze_frame(
    frame: &Image,
    view: View,
    cfg: &PipelineConfig,
) -> Result<FrameAnalysis, FrameError> {
    let roi = Roi::central(cfg.roi_fraction, frame.width(), frame.height());
    let (left_pts, right_pts) = contour::detect_wall_ridges(frame, roi, &cfg.ridge)?;
    let constraint =
        contour::fit_ridge_polynomials(&left_pts, &right_pts, frame.width(), frame.height())?;
    let seed = contour::init_mask(&constraint, cfg.init_scale)?;
    let region = contour::evolve_chan_vese(frame, &seed, Some(&constraint), &cfg.chan_vese)?;
    let trace = apoly::extract_ordered_contour(&region.mask)?;
    let (left_part, right_part, _) = apoly::split_at_apex(&trace.polyline)?;
    let boundary = apoly::fit_active_polynomials(&left_part, &right_part)?;
    let segments = apoly::partition_segments(&boundary, view)?;
    Ok(FrameAnalysis {
        constraint,
        region,
        boundary,
        segments,
        multiple_components: trace.multiple_components,
    })
}

/// Per-frame analyses over the cardiac cycle plus the assembled tracks.
#[derive(Debug, Clone)]
pub struct RecordingAnalysis {
    pub frames: Vec<FrameAnalysis>,
    pub tracks: Vec<SegmentTrack>,
}

/// Analyzes every frame of the recording's cardiac cycle and assembles
/// per-segment tracking point sequences. Correspondence is positional:
/// point `i` of a segment is its `i`-th arc sample in every frame.
pub fn analyze_recording(
    rec: &EchoRecording,
    cfg: &PipelineConfig,
) -> Result<RecordingAnalysis, PipelineError> {
    let frames: Vec<FrameAnalysis> = rec
        .cycle_frames()
        .iter()
        .enumerate()
        .map(|(t, frame)| {
            analyze_frame(frame, rec.view, cfg).map_err(|source| PipelineError::Frame {
                subject: rec.subject_id.clone(),
                view: rec.view,
                frame: rec.cycle.0 + t,
                source,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut tracks = Vec::with_capacity(6);
    for &kappa in rec.view.segments().iter() {
        let mut per_frame = Vec::with_capacity(frames.len());
        for analysis in &frames {
            let seg = analysis
                .segments
                .iter()
                .find(|s| s.kappa == kappa)
                .expect("partition returns every view segment");
            per_frame.push(seg.points);
        }
        tracks.push(SegmentTrack {
            kappa,
            frames: per_frame,
        });
    }
    Ok(RecordingAnalysis { frames, tracks })
}

/// Extracts the six-feature vector of one recording.
pub fn view_features(
    rec: &EchoRecording,
    cfg: &PipelineConfig,
) -> Result<ViewFeatures, PipelineError> {
    let analysis = analyze_recording(rec, cfg)?;
    kinematics::view_feature_vector(rec.view, &analysis.tracks).map_err(|source| {
        PipelineError::Kinematics {
            subject: rec.subject_id.clone(),
            view: rec.view,
            source,
        }
    })
}

/// Loads every manifest recording, extracts features in parallel, and
/// assembles the evaluation cohort with per-view and fused labels.
pub fn cohort_from_manifest(
    manifest: &DatasetManifest,
    cfg: &PipelineConfig,
) -> Result<Cohort, PipelineError> {
    let features: Vec<(String, View, ViewFeatures)> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let rec = dataio::load_recording(manifest, entry)?;
            let vf = view_features(&rec, cfg)?;
            Ok((entry.subject_id.clone(), entry.view, vf))
        })
        .collect::<Result<_, PipelineError>>()?;

    let truth = dataio::ground_truth(manifest);
    let mut by_subject: BTreeMap<String, SubjectRecord> = BTreeMap::new();
    for (subject_id, view, vf) in features {
        let gt = &truth[&subject_id];
        let record = by_subject
            .entry(subject_id.clone())
            .or_insert_with(|| SubjectRecord {
                subject_id,
                phi_a4c: None,
                phi_a2c: None,
                label_a4c: None,
                label_a2c: None,
                fused: gt.fused,
            });
        match view {
            View::A4C => {
                record.phi_a4c = Some(vf.phi);
                record.label_a4c = gt.labels.get(&View::A4C).copied();
            }
            View::A2C => {
                record.phi_a2c = Some(vf.phi);
                record.label_a2c = gt.labels.get(&View::A2C).copied();
            }
        }
    }
    Ok(Cohort {
        subjects: by_subject.into_values().collect(),
    })
}
