//! Dataset ingestion: manifests, frame directories, and label semantics.
//!
//! A dataset is described by a UTF-8 manifest with one tab-separated record
//! per recording:
//!
//! ```text
//! subject_id  view  frame_dir  fps  cycle_start  cycle_end  k:stage ...
//! ```
//!
//! `view` is `A4C` or `A2C`, `frame_dir` is resolved relative to the
//! manifest location, and each `k:stage` pair grades one myocardial segment
//! on the 1..5 wall-motion scale. Lines starting with `#` are comments.
//! Frames are 8-bit grayscale PGM (P5) or PNG files whose lexicographic
//! order is the temporal order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Image;

/// Apical echocardiography view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum View {
    A4C,
    A2C,
}

impl View {
    /// The six myocardial segments visible in this view, listed left side
    /// base-to-apex followed by right side apex-to-base. This ordering is
    /// also the feature-vector ordering used downstream.
    pub fn segments(self) -> [u8; 6] {
        match self {
            View::A4C => [3, 9, 14, 16, 12, 6],
            View::A2C => [4, 10, 15, 13, 7, 1],
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            View::A4C => write!(f, "A4C"),
            View::A2C => write!(f, "A2C"),
        }
    }
}

impl FromStr for View {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "A4C" => Ok(View::A4C),
            "A2C" => Ok(View::A2C),
            other => Err(format!("unknown view {other:?}, expected A4C or A2C")),
        }
    }
}

/// Binary diagnosis; infarction is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryLabel {
    NonMi,
    Mi,
}

impl BinaryLabel {
    pub fn is_mi(self) -> bool {
        matches!(self, BinaryLabel::Mi)
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinaryLabel::NonMi => write!(f, "non-MI"),
            BinaryLabel::Mi => write!(f, "MI"),
        }
    }
}

/// The twelve segments analyzed across the two views; the apical cap is
/// excluded from motion analysis.
pub const ANALYZED_SEGMENTS: [u8; 12] = [1, 3, 4, 6, 7, 9, 10, 12, 13, 14, 15, 16];

/// Wall-motion grade of one myocardial segment, 1 = normal through
/// 5 = aneurysm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentStage {
    pub kappa: u8,
    pub stage: u8,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {msg}")]
    ManifestParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: duplicate entry for subject {subject} view {view}")]
    DuplicateEntry {
        path: PathBuf,
        line: usize,
        subject: String,
        view: View,
    },
    #[error("{path}:{line}: frame directory {dir} does not exist")]
    MissingFrameDir {
        path: PathBuf,
        line: usize,
        dir: PathBuf,
    },
    #[error("frame directory {0} contains no frames")]
    EmptyFrameDir(PathBuf),
    #[error("cannot read frame {path}: {msg}")]
    UnreadableImage { path: PathBuf, msg: String },
    #[error("frame {path} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    MixedDimensions {
        path: PathBuf,
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("cycle ({start}, {end}) is invalid for {frames} frames")]
    InvalidCycle {
        start: usize,
        end: usize,
        frames: usize,
    },
    #[error("stage {0} is outside 1..=5")]
    InvalidStage(u8),
    #[error("segment {0} is not one of the analyzed segments")]
    InvalidSegment(u8),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One manifest record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub view: View,
    pub frame_dir: PathBuf,
    pub fps: f64,
    pub cycle: (usize, usize),
    pub stages: Vec<SegmentStage>,
}

impl ManifestEntry {
    /// Binary label of this recording: infarcted when any segment visible
    /// in its view is graded 2 or worse. Stages listed for segments of the
    /// other view are carried but do not influence this view's label.
    pub fn label(&self) -> BinaryLabel {
        let visible = self.view.segments();
        if self
            .stages
            .iter()
            .any(|s| visible.contains(&s.kappa) && s.stage >= 2)
        {
            BinaryLabel::Mi
        } else {
            BinaryLabel::NonMi
        }
    }
}

/// A validated manifest plus the directory paths resolve against.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn frame_dir(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.frame_dir.is_absolute() {
            entry.frame_dir.clone()
        } else {
            self.base_dir.join(&entry.frame_dir)
        }
    }
}

/// Per-subject ground truth assembled from the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub stages: BTreeMap<View, Vec<SegmentStage>>,
    pub labels: BTreeMap<View, BinaryLabel>,
    pub fused: BinaryLabel,
}

/// One view's frame sequence over a single cardiac cycle.
#[derive(Debug, Clone)]
pub struct EchoRecording {
    pub subject_id: String,
    pub view: View,
    pub frames: Vec<Image>,
    pub fps: f64,
    /// Inclusive frame-index bounds of the cardiac cycle.
    pub cycle: (usize, usize),
}

impl EchoRecording {
    pub fn new(
        subject_id: String,
        view: View,
        frames: Vec<Image>,
        fps: f64,
        cycle: (usize, usize),
    ) -> Result<Self, DataError> {
        if cycle.0 >= cycle.1 || cycle.1 >= frames.len() {
            return Err(DataError::InvalidCycle {
                start: cycle.0,
                end: cycle.1,
                frames: frames.len(),
            });
        }
        if let Some(first) = frames.first() {
            for f in &frames[1..] {
                assert_eq!(
                    (f.width(), f.height()),
                    (first.width(), first.height()),
                    "caller must supply equally sized frames"
                );
            }
        }
        Ok(Self {
            subject_id,
            view,
            frames,
            fps,
            cycle,
        })
    }

    /// Frames of the cardiac cycle, end-diastole to end-diastole.
    pub fn cycle_frames(&self) -> &[Image] {
        &self.frames[self.cycle.0..=self.cycle.1]
    }
}

/// Maps a raw 1..5 wall-motion stage to the binary diagnosis: stage 1 is
/// normal, everything else counts as infarcted.
pub fn binarize_stage(stage: u8) -> Result<BinaryLabel, DataError> {
    match stage {
        1 => Ok(BinaryLabel::NonMi),
        2..=5 => Ok(BinaryLabel::Mi),
        other => Err(DataError::InvalidStage(other)),
    }
}

/// Combines the two per-view diagnoses: infarcted when either view shows a
/// wall-motion abnormality.
pub fn fuse_view_labels(a4c: BinaryLabel, a2c: BinaryLabel) -> BinaryLabel {
    if a4c.is_mi() || a2c.is_mi() {
        BinaryLabel::Mi
    } else {
        BinaryLabel::NonMi
    }
}

/// Parses and validates a manifest file.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let parse_err = |line: usize, msg: String| DataError::ManifestParse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut entries: Vec<ManifestEntry> = Vec::new();
    let mut seen: Vec<(String, View)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 7 {
            return Err(parse_err(
                line_no,
                format!("expected at least 7 tab-separated fields, got {}", fields.len()),
            ));
        }
        let subject_id = fields[0].to_string();
        let view: View = fields[1].parse().map_err(|e| parse_err(line_no, e))?;
        let frame_dir = PathBuf::from(fields[2]);
        let fps: f64 = fields[3]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad fps {:?}", fields[3])))?;
        if !(fps > 0.0) {
            return Err(parse_err(line_no, format!("fps must be positive, got {fps}")));
        }
        let cycle_start: usize = fields[4]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad cycle_start {:?}", fields[4])))?;
        let cycle_end: usize = fields[5]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad cycle_end {:?}", fields[5])))?;
        if cycle_start >= cycle_end {
            return Err(parse_err(
                line_no,
                format!("cycle ({cycle_start}, {cycle_end}) must satisfy start < end"),
            ));
        }

        let mut stages = Vec::new();
        for pair in &fields[6..] {
            if pair.is_empty() {
                continue;
            }
            let (k, s) = pair
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, format!("bad segment pair {pair:?}")))?;
            let kappa: u8 = k
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad segment number {k:?}")))?;
            let stage: u8 = s
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad stage {s:?}")))?;
            if !ANALYZED_SEGMENTS.contains(&kappa) {
                return Err(parse_err(line_no, format!("segment {kappa} is not analyzed")));
            }
            if !(1..=5).contains(&stage) {
                return Err(parse_err(line_no, format!("stage {stage} outside 1..=5")));
            }
            if stages.iter().any(|p: &SegmentStage| p.kappa == kappa) {
                return Err(parse_err(line_no, format!("segment {kappa} listed twice")));
            }
            stages.push(SegmentStage { kappa, stage });
        }
        if stages.is_empty() {
            return Err(parse_err(line_no, "no segment stages listed".to_string()));
        }

        if seen.contains(&(subject_id.clone(), view)) {
            return Err(DataError::DuplicateEntry {
                path: path.to_path_buf(),
                line: line_no,
                subject: subject_id,
                view,
            });
        }
        let resolved = if frame_dir.is_absolute() {
            frame_dir.clone()
        } else {
            base_dir.join(&frame_dir)
        };
        if !resolved.is_dir() {
            return Err(DataError::MissingFrameDir {
                path: path.to_path_buf(),
                line: line_no,
                dir: resolved,
            });
        }
        seen.push((subject_id.clone(), view));
        entries.push(ManifestEntry {
            subject_id,
            view,
            frame_dir,
            fps,
            cycle: (cycle_start, cycle_end),
            stages,
        });
    }
    Ok(DatasetManifest { entries, base_dir })
}

/// Loads the frame sequence behind one manifest entry. Frames are sorted by
/// file name, decoded as 8-bit grayscale, and normalized to `[0, 1]`.
pub fn load_recording(
    manifest: &DatasetManifest,
    entry: &ManifestEntry,
) -> Result<EchoRecording, DataError> {
    let dir = manifest.frame_dir(entry);
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|source| DataError::Io {
            path: dir.clone(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()),
                Some(ref ext) if ext == "pgm" || ext == "png"
            )
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(DataError::EmptyFrameDir(dir));
    }

    let mut frames = Vec::with_capacity(files.len());
    let mut dims: Option<(usize, usize)> = None;
    for file in &files {
        let img = image::open(file)
            .map_err(|e| DataError::UnreadableImage {
                path: file.clone(),
                msg: e.to_string(),
            })?
            .into_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        match dims {
            None => dims = Some((w, h)),
            Some((want_w, want_h)) if (w, h) != (want_w, want_h) => {
                return Err(DataError::MixedDimensions {
                    path: file.clone(),
                    want_w,
                    want_h,
                    got_w: w,
                    got_h: h,
                });
            }
            _ => {}
        }
        let data: Vec<f64> = img.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
        frames.push(Image::from_vec(w, h, data));
    }

    EchoRecording::new(
        entry.subject_id.clone(),
        entry.view,
        frames,
        entry.fps,
        entry.cycle,
    )
}

/// Writes a recording's frames as binary 8-bit PGM files, one per frame.
/// The inverse of [`load_recording`] up to 8-bit quantization.
pub fn write_recording_frames(dir: &Path, frames: &[Image]) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (i, frame) in frames.iter().enumerate() {
        let path = dir.join(format!("frame_{i:04}.pgm"));
        write_pgm(&path, frame)?;
    }
    Ok(())
}

/// Writes one grayscale image as binary PGM (P5, maxval 255).
pub fn write_pgm(path: &Path, img: &Image) -> Result<(), DataError> {
    let mut bytes = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    bytes.extend(
        img.pixels()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, bytes).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Groups manifest entries by subject and derives per-view and fused labels.
pub fn ground_truth(manifest: &DatasetManifest) -> BTreeMap<String, GroundTruth> {
    let mut out: BTreeMap<String, GroundTruth> = BTreeMap::new();
    for entry in &manifest.entries {
        let visible = entry.view.segments();
        let view_stages: Vec<SegmentStage> = entry
            .stages
            .iter()
            .copied()
            .filter(|s| visible.contains(&s.kappa))
            .collect();
        let label = entry.label();
        let gt = out.entry(entry.subject_id.clone()).or_insert(GroundTruth {
            stages: BTreeMap::new(),
            labels: BTreeMap::new(),
            fused: BinaryLabel::NonMi,
        });
        gt.stages.insert(entry.view, view_stages);
        gt.labels.insert(entry.view, label);
    }
    for gt in out.values_mut() {
        gt.fused = if gt.labels.values().any(|l| l.is_mi()) {
            BinaryLabel::Mi
        } else {
            BinaryLabel::NonMi
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use tempfile::TempDir;

    fn write_frames(dir: &Path, n: usize, w: usize, h: usize) {
        fs::create_dir_all(dir).unwrap();
        for i in 0..n {
            let img = Image::from_fn(w, h, |x, y| ((x + y + i) % 256) as f64 / 255.0);
            write_pgm(&dir.join(format!("frame_{i:03}.pgm")), &img).unwrap();
        }
    }

    fn manifest_with(lines: &[&str]) -> (TempDir, PathBuf) {
        let tmp = TempDir::new().unwrap();
        write_frames(&tmp.path().join("s01_a4c"), 25, 32, 32);
        write_frames(&tmp.path().join("s01_a2c"), 25, 32, 32);
        let path = tmp.path().join("manifest.tsv");
        fs::write(&path, lines.join("\n")).unwrap();
        (tmp, path)
    }

    #[test]
    fn parses_well_formed_manifest() {
        let (_tmp, path) = manifest_with(&[
            "# comment",
            "s01\tA4C\ts01_a4c\t25\t0\t24\t3:1\t9:2\t14:1\t16:1\t12:1\t6:1",
            "s01\tA2C\ts01_a2c\t25\t0\t24\t4:1\t10:1\t15:1\t13:1\t7:1\t1:1",
        ]);
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].label(), BinaryLabel::Mi);
        assert_eq!(m.entries[1].label(), BinaryLabel::NonMi);
    }

    #[test]
    fn rejects_duplicate_subject_view() {
        let (_tmp, path) = manifest_with(&[
            "s01\tA4C\ts01_a4c\t25\t0\t24\t3:1",
            "s01\tA4C\ts01_a4c\t25\t0\t24\t3:1",
        ]);
        assert!(matches!(
            load_manifest(&path),
            Err(DataError::DuplicateEntry { line: 2, .. })
        ));
    }

    #[test]
    fn rejects_reversed_cycle() {
        let (_tmp, path) = manifest_with(&["s01\tA4C\ts01_a4c\t25\t10\t5\t3:1"]);
        assert!(matches!(
            load_manifest(&path),
            Err(DataError::ManifestParse { line: 1, .. })
        ));
    }

    #[test]
    fn rejects_missing_frame_dir() {
        let (_tmp, path) = manifest_with(&["s01\tA4C\tnowhere\t25\t0\t24\t3:1"]);
        assert!(matches!(
            load_manifest(&path),
            Err(DataError::MissingFrameDir { .. })
        ));
    }

    #[test]
    fn invisible_segments_do_not_flip_the_view_label() {
        // Segment 4 belongs to the two-chamber view; a four-chamber entry
        // carrying its grade stays normal if its own six segments are normal.
        let (_tmp, path) = manifest_with(&[
            "s01\tA4C\ts01_a4c\t25\t0\t24\t3:1\t9:1\t14:1\t16:1\t12:1\t6:1\t4:3",
        ]);
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.entries[0].label(), BinaryLabel::NonMi);
    }

    #[test]
    fn loads_recording_and_normalizes() {
        let tmp = TempDir::new().unwrap();
        let dir = tmp.path().join("frames");
        fs::create_dir_all(&dir).unwrap();
        for i in 0..25 {
            let img = Image::from_fn(100, 100, |_, _| 1.0);
            write_pgm(&dir.join(format!("f_{i:03}.pgm")), &img).unwrap();
        }
        let manifest = DatasetManifest {
            entries: vec![],
            base_dir: tmp.path().to_path_buf(),
        };
        let entry = ManifestEntry {
            subject_id: "s".into(),
            view: View::A4C,
            frame_dir: PathBuf::from("frames"),
            fps: 25.0,
            cycle: (0, 24),
            stages: vec![SegmentStage { kappa: 3, stage: 1 }],
        };
        let rec = load_recording(&manifest, &entry).unwrap();
        assert_eq!(rec.frames.len(), 25);
        // 8-bit 255 maps to exactly 1.0.
        assert_eq!(rec.frames[0].get(50, 50), 1.0);
        assert_eq!(rec.cycle_frames().len(), 25);
    }

    #[test]
    fn rejects_mixed_dimensions() {
        let tmp = TempDir::new().unwrap();
        let dir = tmp.path().join("frames");
        fs::create_dir_all(&dir).unwrap();
        write_pgm(&dir.join("a.pgm"), &Image::new(100, 100)).unwrap();
        write_pgm(&dir.join("b.pgm"), &Image::new(99, 100)).unwrap();
        let manifest = DatasetManifest {
            entries: vec![],
            base_dir: tmp.path().to_path_buf(),
        };
        let entry = ManifestEntry {
            subject_id: "s".into(),
            view: View::A4C,
            frame_dir: PathBuf::from("frames"),
            fps: 25.0,
            cycle: (0, 1),
            stages: vec![SegmentStage { kappa: 3, stage: 1 }],
        };
        assert!(matches!(
            load_recording(&manifest, &entry),
            Err(DataError::MixedDimensions { .. })
        ));
    }

    #[test]
    fn empty_dir_is_an_error() {
        let tmp = TempDir::new().unwrap();
        let dir = tmp.path().join("frames");
        fs::create_dir_all(&dir).unwrap();
        let manifest = DatasetManifest {
            entries: vec![],
            base_dir: tmp.path().to_path_buf(),
        };
        let entry = ManifestEntry {
            subject_id: "s".into(),
            view: View::A4C,
            frame_dir: PathBuf::from("frames"),
            fps: 25.0,
            cycle: (0, 1),
            stages: vec![SegmentStage { kappa: 3, stage: 1 }],
        };
        assert!(matches!(
            load_recording(&manifest, &entry),
            Err(DataError::EmptyFrameDir(_))
        ));
    }

    #[test]
    fn stage_binarization() {
        assert_eq!(binarize_stage(1).unwrap(), BinaryLabel::NonMi);
        assert_eq!(binarize_stage(2).unwrap(), BinaryLabel::Mi);
        assert_eq!(binarize_stage(3).unwrap(), BinaryLabel::Mi);
        assert_eq!(binarize_stage(5).unwrap(), BinaryLabel::Mi);
        assert!(binarize_stage(0).is_err());
        assert!(binarize_stage(6).is_err());
    }

    #[test]
    fn label_fusion_truth_table() {
        use BinaryLabel::*;
        assert_eq!(fuse_view_labels(Mi, NonMi), Mi);
        assert_eq!(fuse_view_labels(NonMi, Mi), Mi);
        assert_eq!(fuse_view_labels(Mi, Mi), Mi);
        assert_eq!(fuse_view_labels(NonMi, NonMi), NonMi);
    }

    #[test]
    fn roundtrip_is_identity_up_to_quantization() {
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("img.pgm");
        let img = Image::from_fn(17, 9, |x, y| ((x * 31 + y * 7) % 256) as f64 / 255.0);
        write_pgm(&path, &img).unwrap();
        let back = image::open(&path).unwrap().into_luma8();
        for y in 0..9 {
            for x in 0..17 {
                let v = back.get_pixel(x as u32, y as u32).0[0] as f64 / 255.0;
                assert!((v - img.get(x, y)).abs() <= 0.5 / 255.0);
            }
        }
    }
}
