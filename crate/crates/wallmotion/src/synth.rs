//! Synthetic echo-like recordings with analytically known boundaries and
//! wall motion.
//!
//! The cavity is a pointed dome: two polynomial flanks meeting at the apex
//! over a flat open base. Wall points move toward an interior anchor by
//! `amplitude * sin(pi t / (T-1))` per frame, optionally attenuated on one
//! hypokinetic segment span, so every tracking point's trajectory and every
//! per-segment displacement curve is known in closed form.

use std::fs;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apoly::{side_segments, Side, POINTS_PER_SEGMENT, SPAN_FRACTIONS};
use crate::dataio::{
    write_recording_frames, BinaryLabel, DataError, EchoRecording, SegmentStage, View,
    ANALYZED_SEGMENTS,
};
use crate::geometry::{self, Point};
use crate::raster::{Image, Mask};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error("geometry leaves the image: {0}")]
    GeometryOutOfBounds(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("truth serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// One weakly moving wall region: a segment slot on one side whose motion
/// is scaled by `attenuation`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HypokineticArc {
    pub side: Side,
    /// Segment slot from the base: 0 basal, 1 mid, 2 apical.
    pub slot: usize,
    pub attenuation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub cavity_level: f64,
    pub background_level: f64,
    pub wall_peak: f64,
    /// Distance from the boundary to the wall intensity crest, pixels.
    pub wall_half_width: f64,
    pub noise_sigma: f64,
    /// Peak inward wall motion, pixels.
    pub amplitude: f64,
    pub hypokinetic: Option<HypokineticArc>,
    pub seed: u64,
    /// Apex row as a fraction of the image height.
    pub apex_frac: f64,
    /// Base row as a fraction of the image height.
    pub base_frac: f64,
    /// Cavity half width at the base as a fraction of the image width.
    pub half_width_frac: f64,
    /// Mid-height widening of the flanks.
    pub bulge: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            frames: 25,
            cavity_level: 0.08,
            background_level: 0.35,
            wall_peak: 0.9,
            wall_half_width: 4.0,
            noise_sigma: 0.0,
            amplitude: 4.0,
            hypokinetic: None,
            seed: 0,
            apex_frac: 0.26,
            base_frac: 0.76,
            half_width_frac: 0.22,
            bulge: 0.15,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), SynthError> {
        if self.frames < 3 {
            return Err(SynthError::InvalidConfig(format!(
                "need at least 3 frames, got {}",
                self.frames
            )));
        }
        if self.amplitude < 0.0 {
            return Err(SynthError::InvalidConfig(format!(
                "amplitude {} is negative",
                self.amplitude
            )));
        }
        if self.noise_sigma < 0.0 {
            return Err(SynthError::InvalidConfig(format!(
                "noise sigma {} is negative",
                self.noise_sigma
            )));
        }
        if let Some(arc) = &self.hypokinetic {
            if !(0.0..1.0).contains(&arc.attenuation) {
                return Err(SynthError::InvalidConfig(format!(
                    "attenuation {} outside [0, 1)",
                    arc.attenuation
                )));
            }
            if arc.slot > 2 {
                return Err(SynthError::InvalidConfig(format!(
                    "segment slot {} outside 0..=2",
                    arc.slot
                )));
            }
        }
        if !(self.apex_frac > 0.0 && self.apex_frac < self.base_frac && self.base_frac < 1.0) {
            return Err(SynthError::InvalidConfig(format!(
                "apex {} and base {} fractions are inconsistent",
                self.apex_frac, self.base_frac
            )));
        }
        let reach = self.width as f64 / 2.0
            - self.half_width_frac * (1.0 + self.bulge * 0.25) * self.width as f64
            - 2.0 * self.wall_half_width;
        if reach < 1.0 {
            return Err(SynthError::GeometryOutOfBounds(format!(
                "cavity plus wall band exceeds the frame width by {:.1} px",
                1.0 - reach
            )));
        }
        let head = self.apex_frac * self.height as f64 - 2.0 * self.wall_half_width;
        if head < 1.0 {
            return Err(SynthError::GeometryOutOfBounds(
                "apex wall band exceeds the frame top".into(),
            ));
        }
        Ok(())
    }
}

/// Exact trajectory and displacement curve of one segment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrueSegment {
    pub kappa: u8,
    pub side: Side,
    /// Motion scale applied to each of the five tracking points.
    pub attenuations: [f64; POINTS_PER_SEGMENT],
    /// Tracking point positions per frame.
    pub points: Vec<[Point; POINTS_PER_SEGMENT]>,
    /// Closed-form displacement curve.
    pub displacement: Vec<f64>,
}

/// Closed-form ground truth of one synthetic recording.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthTruth {
    pub view: View,
    pub label: BinaryLabel,
    pub arc_left: f64,
    pub arc_right: f64,
    pub segments: Vec<TrueSegment>,
}

impl SynthTruth {
    /// Truth trajectories as tracks consumable by the kinematics stage.
    pub fn tracks(&self) -> Vec<crate::kinematics::SegmentTrack> {
        self.segments
            .iter()
            .map(|s| crate::kinematics::SegmentTrack {
                kappa: s.kappa,
                frames: s.points.clone(),
            })
            .collect()
    }
}

struct Geometry {
    cx: f64,
    y_base: f64,
    y_apex: f64,
    anchor: Point,
}

impl Geometry {
    fn new(cfg: &SynthConfig) -> Self {
        let y_base = cfg.base_frac * cfg.height as f64;
        let y_apex = cfg.apex_frac * cfg.height as f64;
        Self {
            cx: cfg.width as f64 / 2.0,
            y_base,
            y_apex,
            anchor: Point::new(cfg.width as f64 / 2.0, y_base - 0.45 * (y_base - y_apex)),
        }
    }

    fn half_width(&self, cfg: &SynthConfig, y: f64) -> f64 {
        let u = (self.y_base - y) / (self.y_base - self.y_apex);
        cfg.half_width_frac * cfg.width as f64 * (1.0 - u * u) * (1.0 + cfg.bulge * u * u)
    }

    /// Dense boundary polyline of one side at the reference frame,
    /// ordered base to apex.
    fn side_polyline(&self, cfg: &SynthConfig, side: Side) -> Vec<Point> {
        let steps = ((self.y_base - self.y_apex) * 4.0).ceil() as usize;
        (0..=steps)
            .map(|i| {
                let y = self.y_base - (self.y_base - self.y_apex) * i as f64 / steps as f64;
                let w = self.half_width(cfg, y);
                let x = match side {
                    Side::Left => self.cx - w,
                    Side::Right => self.cx + w,
                };
                Point::new(x, y)
            })
            .collect()
    }

    fn move_toward_anchor(&self, p: Point, step: f64) -> Point {
        let dx = self.anchor.x - p.x;
        let dy = self.anchor.y - p.y;
        let d = (dx * dx + dy * dy).sqrt().max(1e-9);
        Point::new(p.x + step * dx / d, p.y + step * dy / d)
    }
}

fn motion_phase(t: usize, frames: usize) -> f64 {
    (std::f64::consts::PI * t as f64 / (frames - 1) as f64).sin()
}

/// Motion scale at one arc position. The attenuation is flat over the
/// affected slot span and blends back to full motion with a half-span
/// cosine taper on each side, like a real wall-motion abnormality fading
/// into healthy tissue.
fn side_attenuation(cfg: &SynthConfig, side: Side, arc_from_base: f64, side_arc: f64) -> f64 {
    let arc = match &cfg.hypokinetic {
        Some(arc) if arc.side == side => arc,
        _ => return 1.0,
    };
    let (f0, f1) = SPAN_FRACTIONS[arc.slot];
    let span = (f1 - f0) * side_arc;
    // Flat floor slightly wider than the graded slot, then a cosine taper.
    let (s0, s1) = (f0 * side_arc - 0.3 * span, f1 * side_arc + 0.3 * span);
    let blend = 0.5 * span;
    let s = arc_from_base;
    let ramp = if s >= s0 && s <= s1 {
        0.0
    } else if s >= s0 - blend && s < s0 {
        let t = (s0 - s) / blend;
        0.5 * (1.0 - (std::f64::consts::PI * t).cos())
    } else if s > s1 && s <= s1 + blend {
        let t = (s - s1) / blend;
        0.5 * (1.0 - (std::f64::consts::PI * t).cos())
    } else {
        return 1.0;
    };
    arc.attenuation + (1.0 - arc.attenuation) * ramp
}

/// Exact squared Euclidean distance transform (two-pass lower envelope).
fn squared_edt(occupied: &Mask) -> Vec<f64> {
    const INF: f64 = 1e18;
    let (w, h) = (occupied.width(), occupied.height());
    let mut grid = vec![INF; w * h];
    for (x, y) in occupied.iter_true() {
        grid[y * w + x] = 0.0;
    }

    fn transform_1d(f: &[f64], out: &mut [f64]) {
        let n = f.len();
        let mut v = vec![0usize; n];
        let mut z = vec![0.0f64; n + 1];
        let mut k = 0usize;
        v[0] = 0;
        z[0] = -1e20;
        z[1] = 1e20;
        for q in 1..n {
            let mut s;
            loop {
                let p = v[k];
                s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
                if s <= z[k] {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = 1e20;
        }
        k = 0;
        for q in 0..n {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let p = v[k];
            let d = q as f64 - p as f64;
            out[q] = d * d + f[p];
        }
    }

    let mut column = vec![0.0; h];
    let mut column_out = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            column[y] = grid[y * w + x];
        }
        transform_1d(&column, &mut column_out);
        for y in 0..h {
            grid[y * w + x] = column_out[y];
        }
    }
    let mut row_out = vec![0.0; w];
    for y in 0..h {
        transform_1d(&grid[y * w..(y + 1) * w].to_vec(), &mut row_out);
        grid[y * w..(y + 1) * w].copy_from_slice(&row_out);
    }
    grid
}

/// Angular radius table about the anchor for star-shaped inside tests;
/// angles are measured from the upward direction so the dome spans one
/// contiguous interval.
struct RadiusTable {
    entries: Vec<(f64, f64)>,
    psi_min: f64,
    psi_max: f64,
}

impl RadiusTable {
    fn new(anchor: Point, boundary: &[Point]) -> Self {
        let mut entries: Vec<(f64, f64)> = boundary
            .iter()
            .map(|p| {
                let dx = p.x - anchor.x;
                let dy = p.y - anchor.y;
                let theta = dy.atan2(dx);
                let mut psi = theta + std::f64::consts::FRAC_PI_2;
                if psi > std::f64::consts::PI {
                    psi -= 2.0 * std::f64::consts::PI;
                }
                (psi, (dx * dx + dy * dy).sqrt())
            })
            .collect();
        entries.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let psi_min = entries.first().map(|e| e.0).unwrap_or(0.0);
        let psi_max = entries.last().map(|e| e.0).unwrap_or(0.0);
        Self {
            entries,
            psi_min,
            psi_max,
        }
    }

    fn radius(&self, psi: f64) -> f64 {
        let idx = self
            .entries
            .binary_search_by(|e| e.0.partial_cmp(&psi).unwrap())
            .unwrap_or_else(|i| i);
        if idx == 0 {
            return self.entries[0].1;
        }
        if idx >= self.entries.len() {
            return self.entries[self.entries.len() - 1].1;
        }
        let (p0, r0) = self.entries[idx - 1];
        let (p1, r1) = self.entries[idx];
        if p1 - p0 <= f64::EPSILON {
            return r0;
        }
        r0 + (r1 - r0) * (psi - p0) / (p1 - p0)
    }

    fn inside(&self, anchor: Point, y_base: f64, q: Point) -> bool {
        if q.y > y_base {
            return false;
        }
        let dx = q.x - anchor.x;
        let dy = q.y - anchor.y;
        let r = (dx * dx + dy * dy).sqrt();
        if r < 1e-9 {
            return true;
        }
        let mut psi = dy.atan2(dx) + std::f64::consts::FRAC_PI_2;
        if psi > std::f64::consts::PI {
            psi -= 2.0 * std::f64::consts::PI;
        }
        if psi < self.psi_min || psi > self.psi_max {
            // Downward wedge between the base tips: bounded by the chord.
            return true;
        }
        r < self.radius(psi)
    }
}

/// Renders one recording and its exact truth.
pub fn generate_recording(
    cfg: &SynthConfig,
    view: View,
    subject_id: &str,
) -> Result<(EchoRecording, SynthTruth), SynthError> {
    cfg.validate()?;
    let geo = Geometry::new(cfg);

    // Reference boundary and per-side arc lengths.
    let base_left = geo.side_polyline(cfg, Side::Left);
    let base_right = geo.side_polyline(cfg, Side::Right);
    let cum_left = geometry::cumulative_arcs(&base_left);
    let cum_right = geometry::cumulative_arcs(&base_right);
    let arc_left = *cum_left.last().unwrap();
    let arc_right = *cum_right.last().unwrap();

    // Reference tracking points with their attenuation factors.
    let mut segments = Vec::new();
    for side in [Side::Left, Side::Right] {
        let (polyline, cum, total) = match side {
            Side::Left => (&base_left, &cum_left, arc_left),
            Side::Right => (&base_right, &cum_right, arc_right),
        };
        let kappas = side_segments(view, side);
        for (slot, &(f0, f1)) in SPAN_FRACTIONS.iter().enumerate() {
            let (s0, s1) = (f0 * total, f1 * total);
            let step = (s1 - s0) / POINTS_PER_SEGMENT as f64;
            let mut points = [Point::new(0.0, 0.0); POINTS_PER_SEGMENT];
            let mut attenuations = [1.0; POINTS_PER_SEGMENT];
            for j in 0..POINTS_PER_SEGMENT {
                let s = s0 + (j as f64 + 0.5) * step;
                points[j] = geometry::point_at_arc(polyline, cum, s);
                attenuations[j] = side_attenuation(cfg, side, s, total);
            }
            segments.push((kappas[slot], side, points, attenuations));
        }
    }

    // Per-side attenuation of each dense boundary sample.
    let dense_attn = |side: Side, cum: &[f64], total: f64| -> Vec<f64> {
        cum.iter()
            .map(|&s| side_attenuation(cfg, side, s, total))
            .collect()
    };
    let attn_left = dense_attn(Side::Left, &cum_left, arc_left);
    let attn_right = dense_attn(Side::Right, &cum_right, arc_right);

    let mut frames = Vec::with_capacity(cfg.frames);
    let mut segment_frames: Vec<Vec<[Point; POINTS_PER_SEGMENT]>> =
        vec![Vec::with_capacity(cfg.frames); segments.len()];
    let mut segment_curves: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.frames); segments.len()];

    for t in 0..cfg.frames {
        let step = cfg.amplitude * motion_phase(t, cfg.frames);

        // Morphed boundary samples.
        let mut boundary = Vec::with_capacity(base_left.len() + base_right.len());
        for (p, a) in base_left.iter().zip(attn_left.iter()) {
            boundary.push(geo.move_toward_anchor(*p, step * a));
        }
        for (p, a) in base_right.iter().zip(attn_right.iter()) {
            boundary.push(geo.move_toward_anchor(*p, step * a));
        }

        frames.push(render_frame(cfg, &geo, &boundary, t));

        for (idx, (_, _, points, attenuations)) in segments.iter().enumerate() {
            let mut moved = [Point::new(0.0, 0.0); POINTS_PER_SEGMENT];
            let mut disp = 0.0;
            for j in 0..POINTS_PER_SEGMENT {
                moved[j] = geo.move_toward_anchor(points[j], step * attenuations[j]);
                disp += step * attenuations[j];
            }
            segment_frames[idx].push(moved);
            segment_curves[idx].push(disp / POINTS_PER_SEGMENT as f64);
        }
    }

    let truth = SynthTruth {
        view,
        label: if cfg.hypokinetic.is_some() {
            BinaryLabel::Mi
        } else {
            BinaryLabel::NonMi
        },
        arc_left,
        arc_right,
        segments: segments
            .iter()
            .enumerate()
            .map(|(idx, (kappa, side, _, attenuations))| TrueSegment {
                kappa: *kappa,
                side: *side,
                attenuations: *attenuations,
                points: segment_frames[idx].clone(),
                displacement: segment_curves[idx].clone(),
            })
            .collect(),
    };

    let recording = EchoRecording::new(
        subject_id.to_string(),
        view,
        frames,
        25.0,
        (0, cfg.frames - 1),
    )?;
    Ok((recording, truth))
}

fn render_frame(cfg: &SynthConfig, geo: &Geometry, boundary: &[Point], frame_index: usize) -> Image {
    let (w, h) = (cfg.width, cfg.height);

    let mut occupied = Mask::new(w, h);
    for p in boundary {
        let (x, y) = (p.x.round() as i64, p.y.round() as i64);
        if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
            occupied.set(x as usize, y as usize, true);
        }
    }
    let dist_sq = squared_edt(&occupied);
    let table = RadiusTable::new(geo.anchor, boundary);

    let mut img = Image::new(w, h);
    let band = 2.0 * cfg.wall_half_width;
    for y in 0..h {
        for x in 0..w {
            let q = Point::new(x as f64, y as f64);
            let v = if table.inside(geo.anchor, geo.y_base, q) {
                cfg.cavity_level
            } else {
                let d = dist_sq[y * w + x].sqrt();
                if d <= band {
                    let t = 1.0 - (d - cfg.wall_half_width).abs() / cfg.wall_half_width;
                    cfg.background_level + (cfg.wall_peak - cfg.background_level) * t.max(0.0)
                } else {
                    cfg.background_level
                }
            };
            img.set(x, y, v);
        }
    }

    if cfg.noise_sigma > 0.0 {
        let mut rng = crate::rng::stream(cfg.seed, "noise", frame_index as u64);
        let normal = Normal::new(0.0, cfg.noise_sigma).unwrap();
        for v in img.pixels_mut() {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    img
}

/// Which views of an MI subject carry the hypokinetic arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffectedViews {
    /// The abnormality is visible in both views.
    Both,
    /// Seeded per subject: one view or both, a third each.
    SeededMix,
}

/// Cohort generation settings. Every MI subject receives the configured
/// hypokinetic arc in at least one view; geometry and amplitude are
/// jittered per recording.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub n_healthy: usize,
    pub n_mi: usize,
    pub base: SynthConfig,
    pub attenuation: f64,
    pub affected_side: Side,
    pub affected_slot: usize,
    pub affected_views: AffectedViews,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_healthy: 20,
            n_mi: 20,
            base: SynthConfig::default(),
            attenuation: 0.3,
            affected_side: Side::Left,
            affected_slot: 1,
            affected_views: AffectedViews::Both,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortSummary {
    pub manifest_path: PathBuf,
    pub subjects: usize,
    pub recordings: usize,
    pub mi_subjects: Vec<String>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Generates a two-view cohort on disk: frame directories, per-recording
/// truth JSON, and a manifest in the ingestion format (each line carries
/// all twelve segment grades of the subject).
pub fn generate_cohort(out_dir: &Path, cfg: &CohortConfig) -> Result<CohortSummary, SynthError> {
    use rand::Rng;

    if cfg.n_healthy + cfg.n_mi < 10 {
        return Err(SynthError::InvalidConfig(format!(
            "cohort of {} subjects is below the minimum of 10",
            cfg.n_healthy + cfg.n_mi
        )));
    }
    if !(0.0..1.0).contains(&cfg.attenuation) {
        return Err(SynthError::InvalidConfig(format!(
            "attenuation {} outside [0, 1)",
            cfg.attenuation
        )));
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    fs::create_dir_all(out_dir.join("truth")).map_err(io_err(out_dir))?;

    let total = cfg.n_healthy + cfg.n_mi;
    let mut manifest_lines = vec![
        "# subject\tview\tframe_dir\tfps\tcycle_start\tcycle_end\tsegment:stage ...".to_string(),
    ];
    let mut mi_subjects = Vec::new();
    let mut recordings = 0usize;

    for i in 0..total {
        let subject_id = format!("s{i:03}");
        let is_mi = i >= cfg.n_healthy;
        let affected_views: Vec<View> = if is_mi {
            match cfg.affected_views {
                AffectedViews::Both => vec![View::A4C, View::A2C],
                AffectedViews::SeededMix => {
                    let mut rng = crate::rng::stream(cfg.seed, "affected-views", i as u64);
                    match rng.random_range(0..3u8) {
                        0 => vec![View::A4C],
                        1 => vec![View::A2C],
                        _ => vec![View::A4C, View::A2C],
                    }
                }
            }
        } else {
            Vec::new()
        };
        if is_mi {
            mi_subjects.push(subject_id.clone());
        }

        // Subject-level stage map: the affected view's segment is graded
        // hypokinetic, everything else normal.
        let mut stages: Vec<SegmentStage> = ANALYZED_SEGMENTS
            .iter()
            .map(|&kappa| SegmentStage { kappa, stage: 1 })
            .collect();
        for &view in &affected_views {
            let kappa = side_segments(view, cfg.affected_side)[cfg.affected_slot];
            stages
                .iter_mut()
                .find(|s| s.kappa == kappa)
                .expect("affected segment is analyzed")
                .stage = 2;
        }

        // One heart, one contractility: both views share the subject's
        // size and amplitude scales.
        let mut rng = crate::rng::stream(cfg.seed, "jitter", i as u64);
        let size_scale: f64 = rng.random_range(0.9..1.1);
        let amp_scale: f64 = rng.random_range(0.8..1.2);

        for (v, view) in [View::A4C, View::A2C].into_iter().enumerate() {

            let mut rec_cfg = cfg.base.clone();
            rec_cfg.seed = crate::rng::derive(cfg.seed, "recording", (2 * i + v) as u64);
            rec_cfg.amplitude = cfg.base.amplitude * amp_scale;
            rec_cfg.half_width_frac = cfg.base.half_width_frac * size_scale;
            let mid = 0.5 * (cfg.base.apex_frac + cfg.base.base_frac);
            rec_cfg.apex_frac = mid - size_scale * (mid - cfg.base.apex_frac);
            rec_cfg.base_frac = mid + size_scale * (cfg.base.base_frac - mid);
            rec_cfg.hypokinetic = affected_views.contains(&view).then_some(HypokineticArc {
                side: cfg.affected_side,
                slot: cfg.affected_slot,
                attenuation: cfg.attenuation,
            });

            let (recording, truth) = generate_recording(&rec_cfg, view, &subject_id)?;
            let dir_name = format!("frames/{subject_id}_{}", view.to_string().to_lowercase());
            write_recording_frames(&out_dir.join(&dir_name), &recording.frames)?;
            let truth_path = out_dir.join(format!(
                "truth/{subject_id}_{}.json",
                view.to_string().to_lowercase()
            ));
            fs::write(&truth_path, serde_json::to_string_pretty(&truth)?)
                .map_err(io_err(&truth_path))?;

            let pairs: Vec<String> = stages
                .iter()
                .map(|s| format!("{}:{}", s.kappa, s.stage))
                .collect();
            manifest_lines.push(format!(
                "{subject_id}\t{view}\t{dir_name}\t25\t0\t{}\t{}",
                cfg.base.frames - 1,
                pairs.join("\t")
            ));
            recordings += 1;
        }
    }

    let manifest_path = out_dir.join("manifest.tsv");
    fs::write(&manifest_path, manifest_lines.join("\n") + "\n").map_err(io_err(&manifest_path))?;
    Ok(CohortSummary {
        manifest_path,
        subjects: total,
        recordings,
        mi_subjects,
    })
}
