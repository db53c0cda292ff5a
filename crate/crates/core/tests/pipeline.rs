mod common;

use common::planted;
use shfd::matcher::{candidate_matches, extract_features};
use shfd::ransac::ransac_filter;
use shfd::synth::{synth_forgery, textured_image, ForgeryGroundTruth, Rect};
use shfd::{detect, DetectionReport, ModelKind, Plane, RunConfig, Verdict};

#[test]
fn planted_translation_is_recovered_for_every_seed() {
    let shift = [43.5, -17.25];
    for seed in 0..10 {
        let (pairs, truth) = planted(seed, shift);
        let out = ransac_filter(&pairs, ModelKind::Translation, 2000, 3.0, seed);
        let model = out.model.expect("model");
        let t = model.translation();
        assert!(
            (t[0] - shift[0]).abs() < 1e-6 && (t[1] - shift[1]).abs() < 1e-6,
            "seed {seed}: {t:?}"
        );
        assert_eq!(out.inliers, truth, "seed {seed}");
    }
}

#[test]
fn constant_image_is_genuine_without_keypoints() {
    let report = detect(&Plane::filled(128, 128, 90.0), &RunConfig::default(), 0).unwrap();
    assert_eq!(report.verdict, Verdict::Genuine);
    assert_eq!(report.keypoints, 0);
    assert_eq!(report.candidates, 0);
}

fn forgery() -> (Plane, Plane, ForgeryGroundTruth) {
    let base = textured_image(512, 512, 2024);
    let rect = Rect {
        x: 150,
        y: 200,
        width: 64,
        height: 64,
    };
    let c = rect.center();
    let truth = ForgeryGroundTruth::new(rect, [c[0] + 80.0, c[1]], 0.0, 1.0);
    let (forged, truth) = synth_forgery(&base, &truth).unwrap();
    (base, forged, truth)
}

/// Displacement of the fitted model at the centroid of the inlier sources.
fn recovered_shift(report: &DetectionReport) -> [f64; 2] {
    let model = report.model.as_ref().expect("model");
    let n = report.inliers.len() as f64;
    let c = [
        report.inliers.iter().map(|p| p.a[0]).sum::<f64>() / n,
        report.inliers.iter().map(|p| p.a[1]).sum::<f64>() / n,
    ];
    let t = model.apply(c);
    [t[0] - c[0], t[1] - c[1]]
}

#[test]
fn translated_patch_is_detected_and_located() {
    let (base, forged, truth) = forgery();
    let cfg = RunConfig::default();

    let features = extract_features(&forged, &cfg).unwrap();
    let dest = Rect {
        x: 230,
        ..truth.source_rect
    };
    let linking = candidate_matches(&features, &cfg)
        .into_iter()
        .filter(|p| {
            (truth.source_rect.contains(p.a) && dest.contains(p.b))
                || (truth.source_rect.contains(p.b) && dest.contains(p.a))
        })
        .count();
    assert!(linking >= 5, "{linking} candidates link the two regions");

    let report = detect(&forged, &cfg, 1).unwrap();
    assert_eq!(report.verdict, Verdict::Forged);
    let shift = recovered_shift(&report);
    let t = truth.translation;
    // pairs are stored source-or-copy first, whichever sorts lower
    let err = (shift[0] - t[0])
        .hypot(shift[1] - t[1])
        .min((shift[0] + t[0]).hypot(shift[1] + t[1]));
    assert!(
        err <= 2.0,
        "recovered {shift:?}, planted {:?}",
        truth.translation
    );

    let clean = detect(&base, &cfg, 1).unwrap();
    assert!(clean.inlier_count() < report.inlier_count());
}

#[test]
fn report_invariants_and_determinism() {
    let (_, forged, _) = forgery();
    let cfg = RunConfig::default();
    let a = detect(&forged, &cfg, 5).unwrap();
    let b = detect(&forged, &cfg, 5).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert!(a.inlier_count() <= a.candidates);
    let model = a.model.as_ref().unwrap();
    for pair in &a.inliers {
        assert!(model.residual(pair) <= model.inlier_tolerance);
        assert!(pair.spatial_distance() >= cfg.matcher.d_min);
    }
    for tau in 0..=a.inlier_count() + 2 {
        if a.verdict_at(tau) == Verdict::Genuine {
            assert_eq!(a.verdict_at(tau + 1), Verdict::Genuine);
        }
    }
}
