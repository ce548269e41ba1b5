//! Pipeline-versus-truth checks on synthetic recordings with closed-form
//! boundaries and motion.

use wallmotion::apoly::Side;
use wallmotion::dataio::View;
use wallmotion::kinematics;
use wallmotion::pipeline::{analyze_recording, PipelineConfig};
use wallmotion::synth::{generate_recording, HypokineticArc, SynthConfig};

#[test]
fn kinematics_on_truth_points_matches_closed_form_exactly() {
    let cfg = SynthConfig {
        hypokinetic: Some(HypokineticArc {
            side: Side::Left,
            slot: 0,
            attenuation: 0.25,
        }),
        ..SynthConfig::default()
    };
    for view in [View::A4C, View::A2C] {
        let (_, truth) = generate_recording(&cfg, view, "s").unwrap();
        for (track, seg) in truth.tracks().iter().zip(truth.segments.iter()) {
            let d = kinematics::displacement_curve(track).unwrap();
            for (a, b) in d.displacement.iter().zip(seg.displacement.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn noiseless_pipeline_recovers_true_peak_displacements() {
    let cfg = SynthConfig {
        noise_sigma: 0.0,
        ..SynthConfig::default()
    };
    let (rec, truth) = generate_recording(&cfg, View::A4C, "s").unwrap();
    let analysis = analyze_recording(&rec, &PipelineConfig::default()).unwrap();
    for track in &analysis.tracks {
        let measured = kinematics::displacement_curve(track).unwrap();
        let peak = measured.displacement.iter().cloned().fold(0.0f64, f64::max);
        let true_seg = truth.segments.iter().find(|s| s.kappa == track.kappa).unwrap();
        let true_peak = true_seg.displacement.iter().cloned().fold(0.0f64, f64::max);
        assert!(
            (peak - true_peak).abs() <= 1.5,
            "segment {}: measured peak {peak:.2}, true {true_peak:.2}",
            track.kappa
        );
    }
}

#[test]
fn attenuated_segment_feature_is_separable_across_a_small_cohort() {
    // Direct scan: with moderate attenuation and noise, the affected
    // segment's feature admits a separating threshold.
    let mut healthy = Vec::new();
    let mut weak = Vec::new();
    for i in 0..4u64 {
        let base = SynthConfig {
            noise_sigma: 0.05,
            seed: 100 + i,
            ..SynthConfig::default()
        };
        let (rec, _) = generate_recording(&base, View::A4C, "h").unwrap();
        let analysis = analyze_recording(&rec, &PipelineConfig::default()).unwrap();
        let vf = kinematics::view_feature_vector(View::A4C, &analysis.tracks).unwrap();
        healthy.push(vf.phi[1]); // segment 9, left mid slot

        let mi_cfg = SynthConfig {
            hypokinetic: Some(HypokineticArc {
                side: Side::Left,
                slot: 1,
                attenuation: 0.5,
            }),
            ..base
        };
        let (rec, _) = generate_recording(&mi_cfg, View::A4C, "m").unwrap();
        let analysis = analyze_recording(&rec, &PipelineConfig::default()).unwrap();
        let vf = kinematics::view_feature_vector(View::A4C, &analysis.tracks).unwrap();
        weak.push(vf.phi[1]);
    }
    let min_healthy = healthy.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_weak = weak.iter().cloned().fold(0.0f64, f64::max);
    assert!(
        max_weak < min_healthy,
        "no separating threshold: weak up to {max_weak:.4}, healthy from {min_healthy:.4}"
    );
}
