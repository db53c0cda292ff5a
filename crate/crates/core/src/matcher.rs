//! Candidate matching between keypoints of one image, RANSAC verification
//! and the image-level verdict.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::descriptor::{build_descriptor, euclidean, Descriptor};
use crate::error::Result;
use crate::harris::{extract_keypoints, Keypoint};
use crate::orient::{assign_orientation, gradient_polar};
use crate::plane::GrayImage;
use crate::ransac::{ransac_filter, TransformModel};
use crate::scalespace::{build_pyramid, Pyramid};

/// Scales a keypoint's level coordinates back to the original image:
/// `X = x * beta^(octave - 1)`.
pub fn map_to_original(kp: &Keypoint, beta: f64) -> (f64, f64) {
    let f = beta.powi(kp.octave as i32 - 1);
    (kp.x * f, kp.y * f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    /// Original-image position; lexicographically <= `b`.
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// Euclidean distance of each descriptor block.
    pub block_distances: [f64; 4],
}

impl MatchPair {
    pub fn combined_distance(&self) -> f64 {
        self.block_distances
            .iter()
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt()
    }

    pub fn spatial_distance(&self) -> f64 {
        (self.a[0] - self.b[0]).hypot(self.a[1] - self.b[1])
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        self.combined_distance()
            .total_cmp(&other.combined_distance())
            .then_with(|| cmp_point(self.a, other.a))
            .then_with(|| cmp_point(self.b, other.b))
            .then_with(|| {
                self.block_distances
                    .iter()
                    .zip(&other.block_distances)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
    }
}

fn cmp_point(p: [f64; 2], q: [f64; 2]) -> Ordering {
    p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]))
}

/// All pairs whose four block distances are each below their threshold and
/// whose original positions are at least `d_min` apart, sorted by combined
/// distance.
pub fn match_features(descs: &[Descriptor], epsilon: [f64; 4], d_min: f64) -> Vec<MatchPair> {
    let n = descs.len();
    let mut out = Vec::new();
    // Cheapest blocks first; most pairs fail early.
    let order = [3usize, 1, 2, 0];
    let eps_sq = epsilon.map(|e| e * e);
    for i in 0..n {
        let bi = descs[i].blocks();
        'inner: for j in i + 1..n {
            let bj = descs[j].blocks();
            for &b in &order {
                let mut acc = 0.0;
                for (x, y) in bi[b].iter().zip(bj[b]) {
                    acc += (x - y) * (x - y);
                }
                if acc.is_nan() || acc >= eps_sq[b] {
                    continue 'inner;
                }
            }
            let (pi, pj) = ([descs[i].x, descs[i].y], [descs[j].x, descs[j].y]);
            if (pi[0] - pj[0]).hypot(pi[1] - pj[1]) < d_min {
                continue;
            }
            let block_distances = std::array::from_fn(|b| euclidean(bi[b], bj[b]));
            let (a, b) = if cmp_point(pi, pj) == Ordering::Greater {
                (pj, pi)
            } else {
                (pi, pj)
            };
            out.push(MatchPair {
                a,
                b,
                block_distances,
            });
        }
    }
    out.sort_by(|x, y| x.cmp_key(y));
    out
}

/// Pairs whose endpoints both lie within this many pixels (per axis) of an
/// earlier pair are the same correspondence seen on another pyramid level.
pub const MERGE_RADIUS: f64 = 3.0;

/// Keeps the first pair of every group of duplicates, in input order.
pub fn merge_duplicates(pairs: &[MatchPair], radius: f64) -> Vec<MatchPair> {
    let near =
        |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).abs() <= radius && (p[1] - q[1]).abs() <= radius;
    let mut kept: Vec<MatchPair> = Vec::new();
    for pair in pairs {
        if !kept.iter().any(|k| near(k.a, pair.a) && near(k.b, pair.b)) {
            kept.push(pair.clone());
        }
    }
    kept
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Forged,
    Genuine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub verdict: Verdict,
    pub keypoints: usize,
    pub candidates: usize,
    pub inliers: Vec<MatchPair>,
    pub model: Option<TransformModel>,
    pub seed: u64,
}

impl DetectionReport {
    /// The score thresholded by the verdict: distinct inlier
    /// correspondences.
    pub fn inlier_count(&self) -> usize {
        self.inliers.len()
    }

    /// Verdict this report would carry at another threshold.
    pub fn verdict_at(&self, tau_match: usize) -> Verdict {
        if self.inliers.len() >= tau_match {
            Verdict::Forged
        } else {
            Verdict::Genuine
        }
    }
}

/// Intermediate products of the pipeline up to descriptors.
#[derive(Clone, Debug)]
pub struct Features {
    pub pyramid: Pyramid,
    /// Oriented keypoints in (octave, interval, y, x) order.
    pub keypoints: Vec<Keypoint>,
    /// One per keypoint, same order.
    pub descriptors: Vec<Descriptor>,
}

pub fn extract_features(img: &GrayImage, cfg: &RunConfig) -> Result<Features> {
    cfg.validate()?;
    let pyramid = build_pyramid(img, &cfg.pyramid)?;
    let raw = extract_keypoints(&pyramid, &cfg.harris);
    let beta = cfg.pyramid.sampling_factor;

    let mut keypoints = Vec::with_capacity(raw.len());
    let mut descriptors = Vec::with_capacity(raw.len());
    let mut current: Option<((usize, usize), crate::orient::PolarGradients)> = None;
    for kp in &raw {
        let key = (kp.octave, kp.interval);
        let level = pyramid.level(kp.octave, kp.interval);
        if current.as_ref().is_none_or(|(k, _)| *k != key) {
            current = Some((key, gradient_polar(level)));
        }
        let grads = &current.as_ref().expect("gradients computed above").1;
        let oriented = assign_orientation(kp, grads, cfg.orientation_radius);
        descriptors.push(build_descriptor(level, &oriented, &cfg.descriptor, beta));
        keypoints.push(oriented);
    }
    Ok(Features {
        pyramid,
        keypoints,
        descriptors,
    })
}

/// Candidate pairs before geometric verification.
pub fn candidate_matches(features: &Features, cfg: &RunConfig) -> Vec<MatchPair> {
    match_features(
        &features.descriptors,
        cfg.matcher.epsilon.per_block(),
        cfg.matcher.d_min,
    )
}

/// Runs the full pipeline on one image.
pub fn detect(img: &GrayImage, cfg: &RunConfig, seed: u64) -> Result<DetectionReport> {
    let features = extract_features(img, cfg)?;
    Ok(detect_from_features(&features, cfg, seed))
}

pub fn detect_from_features(features: &Features, cfg: &RunConfig, seed: u64) -> DetectionReport {
    let keypoints = features.keypoints.len();
    if keypoints < 2 {
        return DetectionReport {
            verdict: Verdict::Genuine,
            keypoints,
            candidates: 0,
            inliers: Vec::new(),
            model: None,
            seed,
        };
    }
    let candidates = candidate_matches(features, cfg);
    let m = &cfg.matcher;
    let outcome = ransac_filter(&candidates, m.model, m.iterations, m.tolerance, seed);
    let raw: Vec<MatchPair> = outcome
        .inliers
        .iter()
        .map(|&i| candidates[i].clone())
        .collect();
    let inliers = merge_duplicates(&raw, MERGE_RADIUS);
    let mut report = DetectionReport {
        verdict: Verdict::Genuine,
        keypoints,
        candidates: candidates.len(),
        inliers,
        model: outcome.model,
        seed,
    };
    report.verdict = report.verdict_at(m.tau_match);
    report
}
