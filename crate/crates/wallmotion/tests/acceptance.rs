//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the checked quantities. Run with
//! `cargo test -p wallmotion --test acceptance`.

use std::sync::OnceLock;

use wallmotion::apoly::{self, Side};
use wallmotion::contour::{self, ChanVeseParams, Roi};
use wallmotion::dataio::{fuse_view_labels, BinaryLabel, View};
use wallmotion::eval::{
    compute_metrics, run_experiment, ConfusionMatrix, EvalMode, ExperimentReport, GridConfig,
    GridSpec,
};
use wallmotion::geometry::Point;
use wallmotion::kinematics::{self, IntervalTrace, SegmentTrace, SegmentTrack};
use wallmotion::ml::{self, ModelKind, ModelParams, ModelSpec};
use wallmotion::pipeline::{cohort_from_manifest, PipelineConfig};
use wallmotion::poly::Quartic;
use wallmotion::raster::{Image, Mask};
use wallmotion::rng::stream;
use wallmotion::synth::{generate_cohort, CohortConfig, SynthConfig};

use rand::Rng;

#[test]
fn criterion_01_metrics_oracle() {
    let cm = ConfusionMatrix {
        tp: 77,
        fn_: 11,
        tn: 26,
        fp: 16,
    };
    let m = compute_metrics(&cm).rounded();
    assert_eq!(m.sensitivity, Some(87.50));
    assert_eq!(m.specificity, Some(61.90));
    assert_eq!(m.precision, Some(82.80));
    assert_eq!(m.f1, Some(85.08));
    assert_eq!(m.f2, Some(86.52));
    assert_eq!(m.accuracy, Some(79.23));

    let cm = ConfusionMatrix {
        tp: 76,
        fn_: 12,
        tn: 30,
        fp: 12,
    };
    let m = compute_metrics(&cm).rounded();
    assert_eq!(m.sensitivity, Some(86.36));
    assert_eq!(m.specificity, Some(71.43));
    assert_eq!(m.precision, Some(86.36));
    assert_eq!(m.f1, Some(86.36));
    assert_eq!(m.f2, Some(86.36));
    assert_eq!(m.accuracy, Some(81.54));
    println!("criterion 1: PASS - both reference confusion matrices reproduce all six metrics to 2 decimals");
}

#[test]
fn criterion_02_label_fusion_oracle() {
    use BinaryLabel::*;
    let distribution = [(Mi, Mi, 60), (NonMi, NonMi, 42), (Mi, NonMi, 20), (NonMi, Mi, 8)];
    let mut fused_mi = 0usize;
    let mut total = 0usize;
    for (a4c, a2c, n) in distribution {
        for _ in 0..n {
            total += 1;
            if fuse_view_labels(a4c, a2c).is_mi() {
                fused_mi += 1;
            }
        }
    }
    assert_eq!(fused_mi, 88);
    assert_eq!(total - fused_mi, 42);
    let ratio = 100.0 * fused_mi as f64 / total as f64;
    assert_eq!((ratio * 100.0).round() / 100.0, 67.69);
    println!("criterion 2: PASS - fused labels give 88 MI / 42 non-MI, ratio 67.69%");
}

#[test]
fn criterion_03_segmentation_suite() {
    // Disk recovery within one pixel Hausdorff.
    let img = Image::from_fn(100, 100, |x, y| {
        if ((x as f64 - 50.0).powi(2) + (y as f64 - 50.0).powi(2)).sqrt() <= 24.0 {
            0.1
        } else {
            0.9
        }
    });
    let seed_mask = Mask::from_fn(100, 100, |x, y| (42..58).contains(&x) && (42..58).contains(&y));
    let out = contour::evolve_chan_vese(&img, &seed_mask, None, &ChanVeseParams::default()).unwrap();
    for y in 0..100 {
        for x in 0..100 {
            let d = ((x as f64 - 50.0).powi(2) + (y as f64 - 50.0).powi(2)).sqrt();
            if out.mask.get(x, y) != (d <= 24.0) {
                assert!((d - 24.0).abs() <= 1.0, "disk deviation at ({x},{y})");
            }
        }
    }

    // Barrier leak: a wall with a gap, equally dark on both sides.
    let (w, h) = (90, 90);
    let leaky = Image::from_fn(w, h, |x, y| {
        let dx = x as f64 - 45.0;
        let dy = y as f64 - 45.0;
        let d = (dx * dx + dy * dy).sqrt();
        let in_gap = dx > 0.0 && dy.abs() < 5.0;
        if d < 20.0 {
            0.08
        } else if d < 26.0 && !in_gap {
            0.9
        } else {
            0.08
        }
    });
    let rows = 22..68;
    let left: Vec<Point> = rows.clone().map(|y| Point::new(21.0, y as f64)).collect();
    let right: Vec<Point> = rows.map(|y| Point::new(69.0, y as f64)).collect();
    let constraint = contour::fit_ridge_polynomials(&left, &right, w, h).unwrap();
    let seed_mask = Mask::from_fn(w, h, |x, y| (40..51).contains(&x) && (40..51).contains(&y));
    let out =
        contour::evolve_chan_vese(&leaky, &seed_mask, Some(&constraint), &ChanVeseParams::default())
            .unwrap();
    let leaked = out
        .mask
        .iter_true()
        .filter(|&(x, y)| !constraint.interior().get(x, y))
        .count();
    assert_eq!(leaked, 0, "region leaked {leaked} pixels past the barrier");

    // Energy is non-increasing on 100 random seeded images.
    for trial in 0..100u64 {
        let mut rng = stream(1000, "acceptance-energy", trial);
        let img = Image::from_fn(48, 48, |_, _| rng.random_range(0.0..1.0));
        let seed_mask = Mask::from_fn(48, 48, |x, y| (16..32).contains(&x) && (16..32).contains(&y));
        let out = contour::evolve_chan_vese(&img, &seed_mask, None, &ChanVeseParams::default())
            .unwrap();
        assert!(!out.energy_increase_abort, "energy abort on trial {trial}");
        for pair in out.energy_trace.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "energy rose on trial {trial}: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }
    println!("criterion 3: PASS - disk within 1 px, zero barrier leaks, energy monotone over 100 random images");
}

#[test]
fn criterion_04_boundary_fit_suite() {
    // Quartic coefficient recovery below 1e-6 relative error.
    let truth = Quartic::new([30.0, -0.9, 0.012, 1e-4, -1e-6]);
    let left: Vec<Point> = (0..60)
        .map(|i| {
            let y = 70.0 - i as f64;
            Point::new(truth.eval(y), y)
        })
        .collect();
    let right: Vec<Point> = left.iter().map(|p| Point::new(p.x + 60.0, p.y)).collect();
    let c = contour::fit_ridge_polynomials(&left, &right, 200, 90).unwrap();
    for (a, b) in c.left.coeffs.iter().zip(truth.coeffs.iter()) {
        assert!(
            (a - b).abs() <= 1e-6 * b.abs().max(1e-6),
            "coefficient {a} vs {b}"
        );
    }

    // Partition spans over 50 random boundaries: 2/7 + 2/7 + 1/7 covered,
    // 2/7 excluded at the apex, total within one pixel of the side length.
    let mut rng = stream(2000, "acceptance-spans", 0);
    for trial in 0..50 {
        let side_len = rng.random_range(40.0..120.0);
        let x_left = rng.random_range(15.0..30.0);
        let width = rng.random_range(40.0..60.0);
        let ql = Quartic::new([x_left, 0.0, 0.0, 0.0, 0.0]);
        let qr = Quartic::new([x_left + width, 0.0, 0.0, 0.0, 0.0]);
        let (lp, ll) = wallmotion::poly::dense_arc_polyline(&ql, side_len + 10.0, 10.0);
        let (rp, rl) = wallmotion::poly::dense_arc_polyline(&qr, 10.0, side_len + 10.0);
        let boundary = apoly::ActivePolynomialBoundary {
            apex: Point::new(x_left + width / 2.0, 10.0),
            left: ql,
            right: qr,
            left_polyline: lp,
            right_polyline: rp,
            arc_left: ll,
            arc_right: rl,
        };
        let segs = apoly::partition_segments(&boundary, View::A4C).unwrap();
        for side in [Side::Left, Side::Right] {
            let len = match side {
                Side::Left => boundary.arc_left,
                Side::Right => boundary.arc_right,
            };
            let spans: Vec<(f64, f64)> = segs
                .iter()
                .filter(|s| s.side == side)
                .map(|s| s.span)
                .collect();
            let covered: f64 = spans.iter().map(|(a, b)| b - a).sum();
            let widths: Vec<f64> = spans.iter().map(|(a, b)| b - a).collect();
            let expect = [2.0 * len / 7.0, 2.0 * len / 7.0, len / 7.0];
            for (wv, ev) in widths.iter().zip(expect.iter()) {
                let min = wv.min(*ev);
                assert!((wv - ev).abs() < 1e-6 * min.max(1.0), "trial {trial}");
            }
            let excluded = len - covered;
            assert!(
                (covered + excluded - len).abs() <= 1.0,
                "trial {trial}: spans do not sum"
            );
            assert!((excluded - 2.0 * len / 7.0).abs() <= 1.0, "trial {trial}");
        }
    }
    println!("criterion 4: PASS - quartic recovery under 1e-6 and partition spans correct over 50 boundaries");
}

#[test]
fn criterion_05_kinematics_suite() {
    let five = |f: &dyn Fn(usize) -> Point| [f(&0), f(&1), f(&2), f(&3), f(&4)];

    // Reference-frame displacement is exactly zero.
    let base = five(&|i| Point::new(i as f64, 0.0));
    let track = SegmentTrack {
        kappa: 3,
        frames: vec![base, five(&|i| Point::new(i as f64 + 3.0, 4.0))],
    };
    let d = kinematics::displacement_curve(&track).unwrap();
    assert_eq!(d.displacement[0], 0.0);
    assert!((d.displacement[1] - 5.0).abs() < 1e-9, "3-4-5 displacement");

    // Manhattan interval of a (+3, -4) offset is exactly 7.
    let shifted = five(&|i| Point::new(i as f64 + 3.0, -4.0));
    let other = SegmentTrack {
        kappa: 6,
        frames: vec![shifted, shifted],
    };
    let self_track = SegmentTrack {
        kappa: 3,
        frames: vec![base, base],
    };
    let interval = kinematics::interval_curve(&self_track, &other).unwrap();
    assert!((interval.interval[0] - 7.0).abs() < 1e-9);

    // Peak-over-minimum arithmetic.
    let f = kinematics::segment_feature(
        &SegmentTrace {
            kappa: 3,
            displacement: vec![0.0, 5.0, 2.0],
        },
        &IntervalTrace {
            pair: (3, 6),
            interval: vec![20.0, 22.0, 21.0],
        },
    )
    .unwrap();
    assert!((f.value - 0.25).abs() < 1e-9);

    // Translation and uniform-scale invariance of the feature vector.
    let tracks: Vec<SegmentTrack> = View::A4C
        .segments()
        .iter()
        .enumerate()
        .map(|(s, &kappa)| {
            let x0 = if s < 3 { 0.0 } else { 40.0 };
            let b = five(&|i| Point::new(x0, 10.0 * s as f64 + i as f64));
            let m = five(&|i| Point::new(x0 + kappa as f64 / 4.0, 10.0 * s as f64 + i as f64));
            SegmentTrack {
                kappa,
                frames: vec![b, m],
            }
        })
        .collect();
    let reference = kinematics::view_feature_vector(View::A4C, &tracks).unwrap();
    let transform = |tracks: &[SegmentTrack], f: &dyn Fn(Point) -> Point| -> Vec<SegmentTrack> {
        tracks
            .iter()
            .map(|t| SegmentTrack {
                kappa: t.kappa,
                frames: t
                    .frames
                    .iter()
                    .map(|pts| {
                        let mut out = *pts;
                        for p in &mut out {
                            *p = f(*p);
                        }
                        out
                    })
                    .collect(),
            })
            .collect()
    };
    let translated = transform(&tracks, &|p| Point::new(p.x + 17.0, p.y - 9.0));
    let scaled = transform(&tracks, &|p| Point::new(3.0 * (p.x - 5.0), 3.0 * (p.y - 5.0)));
    let vt = kinematics::view_feature_vector(View::A4C, &translated).unwrap();
    let vs = kinematics::view_feature_vector(View::A4C, &scaled).unwrap();
    for i in 0..6 {
        assert!((reference.phi[i] - vt.phi[i]).abs() < 1e-9, "translation");
        assert!((reference.phi[i] - vs.phi[i]).abs() < 1e-9, "scaling");
    }
    println!("criterion 5: PASS - reference zero, 3-4-5 and Manhattan-7 cases, feature arithmetic, and invariances at 1e-9");
}

#[test]
fn criterion_06_ml_suite() {
    // Gradient check over 20 random configurations.
    ml::gradient_check_harness(20, 1e-4);

    // Nearest-neighbor self-consistency with k = 1.
    let mut rng = stream(3000, "acceptance-ml", 0);
    let x: Vec<Vec<f64>> = (0..30)
        .map(|i| {
            let c = if i % 2 == 0 { -2.0 } else { 2.0 };
            (0..6).map(|_| c + rng.random_range(-0.5..0.5)).collect()
        })
        .collect();
    let y: Vec<BinaryLabel> = (0..30)
        .map(|i| if i % 2 == 0 { BinaryLabel::NonMi } else { BinaryLabel::Mi })
        .collect();
    let knn = ml::train(
        &ModelSpec::new(
            ModelParams::Knn(ml::KnnParams {
                k: 1,
                ..ml::KnnParams::default()
            }),
            0,
        ),
        &x,
        &y,
    )
    .unwrap();
    for (xi, yi) in x.iter().zip(y.iter()) {
        assert_eq!(ml::predict(&knn, xi).unwrap().label, *yi);
    }

    // A one-tree forest without bootstrap reproduces the tree.
    let dt_spec = ModelSpec::new(
        ModelParams::Dt(ml::DtParams {
            criterion: ml::Criterion::Gini,
            max_features: ml::MaxFeatures::All,
            splitter: ml::Splitter::Best,
        }),
        5,
    );
    let rf_spec = ModelSpec::new(
        ModelParams::Rf(ml::RfParams {
            bootstrap: false,
            class_weight: ml::ClassWeight::None,
            criterion: ml::Criterion::Gini,
            max_features: ml::MaxFeatures::All,
            warm_start: false,
            n_trees: 1,
        }),
        5,
    );
    let dt = ml::train(&dt_spec, &x, &y).unwrap();
    let rf = ml::train(&rf_spec, &x, &y).unwrap();
    for _ in 0..100 {
        let probe: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        assert_eq!(
            ml::predict(&dt, &probe).unwrap().label,
            ml::predict(&rf, &probe).unwrap().label
        );
    }

    // SVM optimality on separable data.
    let sep_x: Vec<Vec<f64>> = (0..24)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            vec![
                s * 2.0 + rng.random_range(-0.6..0.6),
                s * 1.5 + rng.random_range(-0.6..0.6),
            ]
        })
        .collect();
    let sep_y: Vec<BinaryLabel> = (0..24)
        .map(|i| if i % 2 == 0 { BinaryLabel::Mi } else { BinaryLabel::NonMi })
        .collect();
    let params = ml::SvmParams {
        kernel: ml::SvmKernel::Linear,
        c: 1000.0,
        gamma: 0.1,
    };
    let fit = ml::svm_fit(&sep_x, &sep_y, &params);
    for (xi, yi) in sep_x.iter().zip(sep_y.iter()) {
        assert_eq!(fit.model.decision(xi) >= 0.0, yi.is_mi(), "training error");
    }
    for r in ml::kkt_residuals(&fit, params.c) {
        assert!(r <= 1e-3 + 1e-9, "KKT residual {r}");
    }

    // Softmax normalization within 1e-9 on random networks.
    for trial in 0..20u64 {
        let spec = ModelSpec::new(
            ModelParams::Cnn(ml::CnnParams {
                epochs: 1,
                ..ml::CnnParams::default()
            }),
            trial,
        );
        let cx: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..12).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let cy: Vec<BinaryLabel> = (0..10)
            .map(|i| if i % 2 == 0 { BinaryLabel::Mi } else { BinaryLabel::NonMi })
            .collect();
        let model = ml::train(&spec, &cx, &cy).unwrap();
        if let ml::TrainedModel::Cnn(m) = &model {
            let probs = ml::cnn_forward(m, &cx[0]).unwrap();
            assert!((probs[0] + probs[1] - 1.0).abs() < 1e-9);
            assert!(probs[0] >= 0.0 && probs[1] >= 0.0);
        } else {
            unreachable!();
        }
    }
    println!("criterion 6: PASS - gradients, k-NN self-accuracy, forest/tree parity, KKT residuals, softmax normalization");
}

struct EndToEndRun {
    manifest_bytes: Vec<u8>,
    reports: Vec<(ModelKind, EvalMode, ExperimentReport)>,
    reports_json: String,
}

fn end_to_end(seed: u64) -> EndToEndRun {
    let dir = tempfile::TempDir::new().unwrap();
    let cfg = CohortConfig {
        n_healthy: 20,
        n_mi: 20,
        base: SynthConfig {
            noise_sigma: 0.03,
            ..SynthConfig::default()
        },
        attenuation: 0.3,
        seed,
        ..CohortConfig::default()
    };
    let summary = generate_cohort(dir.path(), &cfg).unwrap();
    let manifest_bytes = std::fs::read(&summary.manifest_path).unwrap();
    let manifest = wallmotion::dataio::load_manifest(&summary.manifest_path).unwrap();
    let cohort = cohort_from_manifest(&manifest, &PipelineConfig::default()).unwrap();

    let grid_cfg = GridConfig::default();
    let mut reports = Vec::new();
    for kind in [ModelKind::Rf, ModelKind::Knn] {
        let grid = GridSpec::from_config(kind, &grid_cfg, None).unwrap();
        for mode in [
            EvalMode::A4c,
            EvalMode::A2c,
            EvalMode::MultiviewConcat,
            EvalMode::MultiviewOr,
        ] {
            let report = run_experiment(&cohort, mode, &grid, seed).unwrap();
            reports.push((kind, mode, report));
        }
    }
    let reports_json = serde_json::to_string_pretty(
        &reports
            .iter()
            .map(|(k, m, r)| (k.to_string(), m.to_string(), r))
            .collect::<Vec<_>>(),
    )
    .unwrap();
    EndToEndRun {
        manifest_bytes,
        reports,
        reports_json,
    }
}

fn first_run() -> &'static EndToEndRun {
    static RUN: OnceLock<EndToEndRun> = OnceLock::new();
    RUN.get_or_init(|| end_to_end(7))
}

#[test]
fn criterion_07_end_to_end_experiment() {
    let run = first_run();
    let mut summary = String::new();
    for (kind, mode, report) in &run.reports {
        let accuracy = report.pooled_metrics.accuracy.expect("accuracy defined");
        if matches!(mode, EvalMode::MultiviewConcat | EvalMode::MultiviewOr) {
            assert!(
                accuracy >= 90.0,
                "{kind} {mode}: pooled accuracy {accuracy:.2} below 90"
            );
            summary += &format!(" {kind}/{mode}={accuracy:.1}");
        }
        if *mode == EvalMode::MultiviewOr {
            let fused_sens = report.pooled_metrics.sensitivity.unwrap();
            let breakdown = report.or_breakdown.as_ref().unwrap();
            for (view, m) in [("a4c", &breakdown.metrics_a4c), ("a2c", &breakdown.metrics_a2c)] {
                let s = m.sensitivity.unwrap();
                assert!(
                    fused_sens >= s - 1e-9,
                    "{kind}: fused sensitivity {fused_sens:.2} below {view} {s:.2}"
                );
            }
        }
    }
    println!("criterion 7: PASS - pooled accuracies{summary}; OR fusion dominates single-view sensitivity");
}

#[test]
fn criterion_08_determinism() {
    let first = first_run();
    let second = end_to_end(7);
    assert_eq!(
        first.manifest_bytes, second.manifest_bytes,
        "regenerated cohort differs"
    );
    assert_eq!(
        first.reports_json, second.reports_json,
        "reports differ between identical runs"
    );
    println!("criterion 8: PASS - repeated runs are byte-identical (manifest and all reports)");
}

#[test]
fn criterion_09_reference_numbers_not_asserted() {
    // Published clinical-dataset figures are documented, not gated: the
    // upstream ridge-formation procedure and classifier seeds are not
    // recoverable, so bitwise reproduction is out of reach by design. The
    // README carries the recipe for running on that data and reporting
    // results.
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md"))
        .expect("workspace README");
    assert!(
        readme.contains("HMC-QU"),
        "README must document the clinical-data recipe"
    );
    println!(
        "criterion 9: PASS - clinical-dataset figures are documented as non-gated reference values"
    );
}

#[test]
fn criterion_10_complexity_estimator() {
    // Brute-force multiplication counter with unit loops.
    fn brute(connections: &[u64], kernels: &[u64], lengths: &[u64]) -> u64 {
        let layers = kernels.len();
        let mut count = 0u64;
        for l in 1..=layers {
            for _ in 0..connections[l - 1] * connections[l] {
                for _ in 0..lengths[l - 1] {
                    for _ in 0..kernels[l - 1] * kernels[l - 1] {
                        count += 1;
                    }
                }
            }
        }
        for l in 0..layers {
            for _ in 0..connections[l + 1] * connections[l] {
                for _ in 0..(kernels[l] + lengths[l]) * kernels[l] * kernels[l] {
                    count += 1;
                }
                for _ in 0..kernels[l] * (kernels[l] + lengths[l]) * (kernels[l] + lengths[l]) {
                    count += 1;
                }
            }
        }
        count
    }

    let unit = ml::conv_backprop_multiplications(&[1, 1], &[1], &[1]).unwrap();
    assert_eq!(unit, 7);
    assert_eq!(brute(&[1, 1], &[1], &[1]), 7);

    let connections = [1u64, 8, 8];
    let kernels = [3u64, 3];
    let lengths = [12u64, 5];
    let fast = ml::conv_backprop_multiplications(&connections, &kernels, &lengths).unwrap();
    assert_eq!(fast, brute(&connections, &kernels, &lengths));
    println!("criterion 10: PASS - estimator matches brute-force counts including the unit case C = 7");
}
