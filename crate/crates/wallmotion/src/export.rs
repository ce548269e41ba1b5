//! File exports: CSV tables, SVG charts, debug masks, and segment overlay
//! renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};

use crate::contour::RegionMask;
use crate::dataio::View;
use crate::eval::{EvalMode, ExperimentReport};
use crate::kinematics::{IntervalTrace, SegmentTrace, ViewFeatures};
use crate::pipeline::FrameAnalysis;
use crate::raster::{Image as GrayImage, Mask};

/// Fixed per-segment colors, indexed by segment number.
pub fn segment_color(kappa: u8) -> [u8; 3] {
    const PALETTE: [[u8; 3]; 17] = [
        [230, 25, 75],
        [60, 180, 75],
        [255, 225, 25],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
        [210, 245, 60],
        [250, 190, 212],
        [0, 128, 128],
        [220, 190, 255],
        [170, 110, 40],
        [255, 250, 200],
        [128, 0, 0],
        [170, 255, 195],
        [128, 128, 0],
    ];
    PALETTE[(kappa as usize - 1) % PALETTE.len()]
}

fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)
}

/// Boundary polylines of every analyzed frame as CSV.
pub fn boundaries_csv(frames: &[FrameAnalysis], path: &Path) -> std::io::Result<()> {
    let mut out = String::from("frame,side,index,x,y\n");
    for (t, f) in frames.iter().enumerate() {
        for (side, polyline) in [
            ("left", &f.boundary.left_polyline),
            ("right", &f.boundary.right_polyline),
        ] {
            for (i, p) in polyline.iter().enumerate() {
                let _ = writeln!(out, "{t},{side},{i},{},{}", p.x, p.y);
            }
        }
    }
    write_text(path, &out)
}

/// Segment tracking points of every analyzed frame as CSV.
pub fn segments_csv(frames: &[FrameAnalysis], path: &Path) -> std::io::Result<()> {
    let mut out = String::from("frame,kappa,side,point,x,y\n");
    for (t, f) in frames.iter().enumerate() {
        for seg in &f.segments {
            for (i, p) in seg.points.iter().enumerate() {
                let _ = writeln!(out, "{t},{},{},{i},{},{}", seg.kappa, seg.side.name(), p.x, p.y);
            }
        }
    }
    write_text(path, &out)
}

/// Per-frame boundary polynomial coefficients as JSON.
pub fn coefficients_json(frames: &[FrameAnalysis], path: &Path) -> std::io::Result<()> {
    #[derive(serde::Serialize)]
    struct Entry<'a> {
        frame: usize,
        apex: &'a crate::geometry::Point,
        left_coeffs: &'a [f64; 5],
        right_coeffs: &'a [f64; 5],
        arc_left: f64,
        arc_right: f64,
    }
    let entries: Vec<Entry> = frames
        .iter()
        .enumerate()
        .map(|(frame, f)| Entry {
            frame,
            apex: &f.boundary.apex,
            left_coeffs: &f.boundary.left.coeffs,
            right_coeffs: &f.boundary.right.coeffs,
            arc_left: f.boundary.arc_left,
            arc_right: f.boundary.arc_right,
        })
        .collect();
    write_text(path, &serde_json::to_string_pretty(&entries).unwrap())
}

/// Displacement curves as CSV rows `frame,kappa,displacement`.
pub fn displacement_csv(traces: &[SegmentTrace], path: &Path) -> std::io::Result<()> {
    let mut out = String::from("frame,kappa,displacement\n");
    for trace in traces {
        for (t, d) in trace.displacement.iter().enumerate() {
            let _ = writeln!(out, "{t},{},{d}", trace.kappa);
        }
    }
    write_text(path, &out)
}

/// Interval curves as CSV rows `frame,kappa,epsilon,interval`.
pub fn intervals_csv(intervals: &[IntervalTrace], path: &Path) -> std::io::Result<()> {
    let mut out = String::from("frame,kappa,epsilon,interval\n");
    for iv in intervals {
        for (t, v) in iv.interval.iter().enumerate() {
            let _ = writeln!(out, "{t},{},{},{v}", iv.pair.0, iv.pair.1);
        }
    }
    write_text(path, &out)
}

/// Per-view feature rows: `subject,view,f1..f6`.
pub fn phi_csv(rows: &[(String, ViewFeatures)], path: &Path) -> std::io::Result<()> {
    let mut out = String::from("subject,view,f1,f2,f3,f4,f5,f6\n");
    for (subject, vf) in rows {
        let values: Vec<String> = vf.phi.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{subject},{},{}", vf.view, values.join(","));
    }
    write_text(path, &out)
}

/// Concatenated feature rows: `subject,f1..f12`.
pub fn fused_csv(rows: &[(String, [f64; 12])], path: &Path) -> std::io::Result<()> {
    let mut out = String::from(
        "subject,f1,f2,f3,f4,f5,f6,f7,f8,f9,f10,f11,f12\n",
    );
    for (subject, f) in rows {
        let values: Vec<String> = f.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{subject},{}", values.join(","));
    }
    write_text(path, &out)
}

/// Reads a per-view feature CSV back.
pub fn read_phi_csv(path: &Path) -> std::io::Result<Vec<(String, View, [f64; 6])>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("expected 8 columns, got {}", fields.len()),
            ));
        }
        let view: View = fields[1]
            .parse()
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        let mut phi = [0.0; 6];
        for (i, v) in phi.iter_mut().enumerate() {
            *v = fields[2 + i]
                .parse()
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{e}")))?;
        }
        rows.push((fields[0].to_string(), view, phi));
    }
    Ok(rows)
}

/// Sweep-wise energy trace of one evolution as CSV.
pub fn energy_csv(region: &RegionMask, path: &Path) -> std::io::Result<()> {
    let mut out = String::from("iteration,energy\n");
    for (i, e) in region.energy_trace.iter().enumerate() {
        let _ = writeln!(out, "{i},{e}");
    }
    write_text(path, &out)
}

/// Binary mask as a PGM image (255 inside).
pub fn mask_pgm(mask: &Mask, path: &Path) -> Result<(), crate::dataio::DataError> {
    let img = GrayImage::from_fn(mask.width(), mask.height(), |x, y| {
        if mask.get(x, y) {
            1.0
        } else {
            0.0
        }
    });
    crate::dataio::write_pgm(path, &img)
}

/// Frame with the fitted boundary (white) and color-coded segment points.
pub fn overlay_png(
    frame: &GrayImage,
    analysis: &FrameAnalysis,
    path: &Path,
) -> Result<(), image::ImageError> {
    if let Some(parent) = path.parent() {
        let _ = fs::create_dir_all(parent);
    }
    let (w, h) = (frame.width() as u32, frame.height() as u32);
    let mut img = RgbImage::from_fn(w, h, |x, y| {
        let v = (frame.get(x as usize, y as usize).clamp(0.0, 1.0) * 255.0) as u8;
        Rgb([v, v, v])
    });
    let mut put = |x: f64, y: f64, color: [u8; 3]| {
        let (xi, yi) = (x.round() as i64, y.round() as i64);
        if xi >= 0 && yi >= 0 && (xi as u32) < w && (yi as u32) < h {
            img.put_pixel(xi as u32, yi as u32, Rgb(color));
        }
    };
    for p in analysis
        .boundary
        .left_polyline
        .iter()
        .chain(analysis.boundary.right_polyline.iter())
    {
        put(p.x, p.y, [255, 255, 255]);
    }
    for seg in &analysis.segments {
        let color = segment_color(seg.kappa);
        for p in &seg.points {
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    put(p.x + dx as f64, p.y + dy as f64, color);
                }
            }
        }
    }
    img.save(path)
}

/// Displacement curves of one view as a simple SVG line chart, one series
/// per segment.
pub fn displacement_chart_svg(
    view: View,
    traces: &[SegmentTrace],
    path: &Path,
) -> std::io::Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 48.0;
    let frames = traces.iter().map(|t| t.displacement.len()).max().unwrap_or(2);
    let peak = traces
        .iter()
        .flat_map(|t| t.displacement.iter())
        .cloned()
        .fold(1e-9f64, f64::max);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{} segment displacement</text>\n",
        W / 2.0,
        view
    );
    let _ = write!(
        svg,
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - M,
        W - M,
        H - M,
        H - M
    );
    for (i, trace) in traces.iter().enumerate() {
        let c = segment_color(trace.kappa);
        let color = format!("rgb({},{},{})", c[0], c[1], c[2]);
        let points: Vec<String> = trace
            .displacement
            .iter()
            .enumerate()
            .map(|(t, d)| {
                let x = M + (W - 2.0 * M) * t as f64 / (frames - 1).max(1) as f64;
                let y = H - M - (H - 2.0 * M) * d / peak;
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">seg {}</text>\n",
            points.join(" "),
            W - M + 4.0,
            M + 16.0 * i as f64,
            trace.kappa
        );
    }
    svg.push_str("</svg>\n");
    write_text(path, &svg)
}

/// F1 bar chart across model families for one evaluation mode.
pub fn f1_bar_chart_svg(
    mode: EvalMode,
    results: &[(String, Option<f64>)],
    path: &Path,
) -> std::io::Result<()> {
    const W: f64 = 560.0;
    const H: f64 = 360.0;
    const M: f64 = 48.0;
    let n = results.len().max(1);
    let slot = (W - 2.0 * M) / n as f64;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">F1 by model ({mode})</text>\n\
         <line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        W / 2.0,
        H - M,
        W - M,
        H - M
    );
    for (i, (name, f1)) in results.iter().enumerate() {
        let x = M + slot * i as f64 + slot * 0.15;
        let bw = slot * 0.7;
        match f1 {
            Some(v) => {
                let bh = (H - 2.0 * M) * v / 100.0;
                let _ = write!(
                    svg,
                    "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{bw:.1}\" height=\"{bh:.1}\" fill=\"steelblue\"/>\n\
                     <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{v:.1}</text>\n",
                    H - M - bh,
                    x + bw / 2.0,
                    H - M - bh - 6.0
                );
            }
            None => {
                let _ = write!(
                    svg,
                    "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">n/a</text>\n",
                    x + bw / 2.0,
                    H - M - 10.0
                );
            }
        }
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">{name}</text>\n",
            x + bw / 2.0,
            H - M + 18.0
        );
    }
    svg.push_str("</svg>\n");
    write_text(path, &svg)
}

fn metric_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{:.2}", (x * 100.0).round() / 100.0))
        .unwrap_or_default()
}

/// Metrics CSV: one pooled row plus one row per fold; undefined metrics
/// stay empty.
pub fn metrics_csv(report: &ExperimentReport, path: &Path) -> std::io::Result<()> {
    let mut out =
        String::from("scope,sensitivity,specificity,precision,f1,f2,accuracy,tp,tn,fp,fn\n");
    let row = |scope: &str, m: &crate::eval::MetricsReport, cm: &crate::eval::ConfusionMatrix| {
        format!(
            "{scope},{},{},{},{},{},{},{},{},{},{}\n",
            metric_cell(m.sensitivity),
            metric_cell(m.specificity),
            metric_cell(m.precision),
            metric_cell(m.f1),
            metric_cell(m.f2),
            metric_cell(m.accuracy),
            cm.tp,
            cm.tn,
            cm.fp,
            cm.fn_
        )
    };
    out.push_str(&row("pooled", &report.pooled_metrics, &report.pooled));
    for fold in &report.folds {
        out.push_str(&row(&format!("fold{}", fold.fold), &fold.metrics, &fold.cm));
    }
    write_text(path, &out)
}

/// Per-subject predictions as CSV.
pub fn predictions_csv(report: &ExperimentReport, path: &Path) -> std::io::Result<()> {
    let mut out = String::from("subject,truth,predicted,score\n");
    let mut rows = report.predictions.clone();
    rows.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    for p in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6}",
            p.subject_id, p.truth, p.predicted, p.score
        );
    }
    write_text(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::SegmentTrace;
    use tempfile::TempDir;

    #[test]
    fn feature_csv_roundtrip() {
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("phi.csv");
        let rows = vec![
            (
                "s001".to_string(),
                ViewFeatures {
                    view: View::A4C,
                    phi: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
                    out_of_range: vec![],
                },
            ),
            (
                "s001".to_string(),
                ViewFeatures {
                    view: View::A2C,
                    phi: [0.7, 0.8, 0.9, 1.0, 1.1, 1.2],
                    out_of_range: vec![],
                },
            ),
        ];
        phi_csv(&rows, &path).unwrap();
        let back = read_phi_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].1, View::A4C);
        assert_eq!(back[1].2[5], 1.2);
    }

    #[test]
    fn chart_svgs_are_wellformed_enough() {
        let tmp = TempDir::new().unwrap();
        let traces = vec![SegmentTrace {
            kappa: 3,
            displacement: vec![0.0, 1.0, 2.0, 1.0, 0.0],
        }];
        let p = tmp.path().join("chart.svg");
        displacement_chart_svg(View::A4C, &traces, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains("polyline"));
        assert!(text.trim_end().ends_with("</svg>"));
    }
}
