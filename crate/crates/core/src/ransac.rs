//! Seeded RANSAC over match pairs with translation, similarity or affine
//! models.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matcher::MatchPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Translation,
    Similarity,
    Affine,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::Translation,
        ModelKind::Similarity,
        ModelKind::Affine,
    ];

    pub fn min_sample(self) -> usize {
        match self {
            ModelKind::Translation => 1,
            ModelKind::Similarity => 2,
            ModelKind::Affine => 3,
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            ModelKind::Translation => 2,
            ModelKind::Similarity => 4,
            ModelKind::Affine => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Translation => "translation",
            ModelKind::Similarity => "similarity",
            ModelKind::Affine => "affine",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "translation" => Ok(ModelKind::Translation),
            "similarity" => Ok(ModelKind::Similarity),
            "affine" => Ok(ModelKind::Affine),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

/// A fitted a -> b transform.
///
/// Parameter layout:
/// * translation: `[tx, ty]`
/// * similarity: `[p, q, tx, ty]` with `x' = p x - q y + tx`, `y' = q x + p y + ty`
/// * affine: `[a, b, c, d, e, f]` with `x' = a x + b y + c`, `y' = d x + e y + f`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformModel {
    pub kind: ModelKind,
    pub parameters: Vec<f64>,
    pub inlier_tolerance: f64,
}

impl TransformModel {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let m = &self.parameters;
        let [x, y] = p;
        match self.kind {
            ModelKind::Translation => [x + m[0], y + m[1]],
            ModelKind::Similarity => [m[0] * x - m[1] * y + m[2], m[1] * x + m[0] * y + m[3]],
            ModelKind::Affine => [m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5]],
        }
    }

    pub fn residual(&self, pair: &MatchPair) -> f64 {
        let [x, y] = self.apply(pair.a);
        (x - pair.b[0]).hypot(y - pair.b[1])
    }

    pub fn is_inlier(&self, pair: &MatchPair) -> bool {
        self.residual(pair) <= self.inlier_tolerance
    }

    /// Translation component (the image of the origin is not used; this is
    /// the pure shift term of the parameterization).
    pub fn translation(&self) -> [f64; 2] {
        let m = &self.parameters;
        match self.kind {
            ModelKind::Translation => [m[0], m[1]],
            ModelKind::Similarity => [m[2], m[3]],
            ModelKind::Affine => [m[2], m[5]],
        }
    }

    /// Rotation angle and scale of the linear part (least-squares
    /// similarity reading for affine models).
    pub fn rotation_scale(&self) -> (f64, f64) {
        let m = &self.parameters;
        let (p, q) = match self.kind {
            ModelKind::Translation => (1.0, 0.0),
            ModelKind::Similarity => (m[0], m[1]),
            ModelKind::Affine => ((m[0] + m[4]) / 2.0, (m[3] - m[1]) / 2.0),
        };
        (q.atan2(p), p.hypot(q))
    }
}

/// Least-squares fit of `kind` to the pairs. `None` for degenerate input.
pub fn fit_model(kind: ModelKind, pairs: &[&MatchPair], tolerance: f64) -> Option<TransformModel> {
    if pairs.len() < kind.min_sample() {
        return None;
    }
    let n = pairs.len() as f64;
    let mean = |f: fn(&MatchPair) -> f64| pairs.iter().map(|p| f(p)).sum::<f64>() / n;
    let (ax, ay) = (mean(|p| p.a[0]), mean(|p| p.a[1]));
    let (bx, by) = (mean(|p| p.b[0]), mean(|p| p.b[1]));

    let parameters = match kind {
        ModelKind::Translation => vec![bx - ax, by - ay],
        ModelKind::Similarity => {
            let (mut den, mut sp, mut sq) = (0.0, 0.0, 0.0);
            for pair in pairs {
                let (u, v) = (pair.a[0] - ax, pair.a[1] - ay);
                let (s, t) = (pair.b[0] - bx, pair.b[1] - by);
                den += u * u + v * v;
                sp += u * s + v * t;
                sq += u * t - v * s;
            }
            if den < 1e-9 {
                return None;
            }
            let (p, q) = (sp / den, sq / den);
            vec![p, q, bx - (p * ax - q * ay), by - (q * ax + p * ay)]
        }
        ModelKind::Affine => {
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            let (mut sxu, mut syu, mut sxv, mut syv) = (0.0, 0.0, 0.0, 0.0);
            for pair in pairs {
                let (x, y) = (pair.a[0] - ax, pair.a[1] - ay);
                let (u, v) = (pair.b[0] - bx, pair.b[1] - by);
                sxx += x * x;
                sxy += x * y;
                syy += y * y;
                sxu += x * u;
                syu += y * u;
                sxv += x * v;
                syv += y * v;
            }
            let det = sxx * syy - sxy * sxy;
            let scale = (sxx + syy) * (sxx + syy);
            if scale == 0.0 || det <= 1e-9 * scale {
                return None;
            }
            let a = (syy * sxu - sxy * syu) / det;
            let b = (sxx * syu - sxy * sxu) / det;
            let d = (syy * sxv - sxy * syv) / det;
            let e = (sxx * syv - sxy * sxv) / det;
            vec![a, b, bx - a * ax - b * ay, d, e, by - d * ax - e * ay]
        }
    };
    if parameters.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(TransformModel {
        kind,
        parameters,
        inlier_tolerance: tolerance,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RansacOutcome {
    pub model: Option<TransformModel>,
    /// Indices into the input pairs, ascending.
    pub inliers: Vec<usize>,
}

/// Radius, in original-image pixels, of the neighbourhood from which the
/// remaining members of a minimal sample are drawn and in which a hypothesis
/// is first scored.
pub const LOCAL_RADIUS: f64 = 96.0;
/// Minimum distance between the points of a minimal sample.
pub const MIN_SAMPLE_SPAN: f64 = 8.0;
/// Accepted scale range for similarity and affine hypotheses.
pub const SCALE_RANGE: (f64, f64) = (1.0 / 3.0, 3.0);
const SHORTLIST: usize = 16;
const SAMPLE_ATTEMPTS: usize = 8;

fn inlier_indices(model: &TransformModel, pairs: &[MatchPair]) -> Vec<usize> {
    pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| model.is_inlier(p))
        .map(|(i, _)| i)
        .collect()
}

/// Rejects hypotheses whose linear part shrinks or stretches beyond
/// [`SCALE_RANGE`].
fn plausible(model: &TransformModel) -> bool {
    let m = &model.parameters;
    let (lo, hi) = SCALE_RANGE;
    let in_range = |s: f64| (lo..=hi).contains(&s);
    match model.kind {
        ModelKind::Translation => true,
        ModelKind::Similarity => in_range(m[0].hypot(m[1])),
        ModelKind::Affine => {
            let (a, b, d, e) = (m[0], m[1], m[3], m[4]);
            let q = a * a + b * b + d * d + e * e;
            let det = a * e - b * d;
            let root = (q * q - 4.0 * det * det).max(0.0).sqrt();
            let s1 = ((q + root) / 2.0).sqrt();
            let s2 = ((q - root) / 2.0).max(0.0).sqrt();
            in_range(s1) && in_range(s2)
        }
    }
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Pairs whose `a` and `b` both lie within [`LOCAL_RADIUS`] of a given
/// pair's, computed on demand.
struct Neighbourhoods<'a> {
    pairs: &'a [MatchPair],
    grid: std::collections::HashMap<[i64; 4], Vec<u32>>,
    cache: Vec<Option<Vec<u32>>>,
}

impl<'a> Neighbourhoods<'a> {
    fn new(pairs: &'a [MatchPair]) -> Self {
        let mut grid: std::collections::HashMap<[i64; 4], Vec<u32>> =
            std::collections::HashMap::new();
        for (i, p) in pairs.iter().enumerate() {
            grid.entry(Self::cell(p)).or_default().push(i as u32);
        }
        Neighbourhoods {
            pairs,
            grid,
            cache: vec![None; pairs.len()],
        }
    }

    fn cell(p: &MatchPair) -> [i64; 4] {
        [p.a[0], p.a[1], p.b[0], p.b[1]].map(|v| (v / LOCAL_RADIUS).floor() as i64)
    }

    fn of(&mut self, i: usize) -> &[u32] {
        if self.cache[i].is_none() {
            let anchor = &self.pairs[i];
            let c = Self::cell(anchor);
            let mut out = Vec::new();
            for d in 0..81 {
                let key = [0, 1, 2, 3].map(|k| c[k] + (d / 3i64.pow(k as u32)) % 3 - 1);
                let Some(members) = self.grid.get(&key) else {
                    continue;
                };
                for &j in members {
                    let other = &self.pairs[j as usize];
                    if j as usize != i
                        && dist(other.a, anchor.a) <= LOCAL_RADIUS
                        && dist(other.b, anchor.b) <= LOCAL_RADIUS
                    {
                        out.push(j);
                    }
                }
            }
            out.sort_unstable();
            self.cache[i] = Some(out);
        }
        self.cache[i].as_deref().expect("filled above")
    }
}

/// Seeded RANSAC with locally guided sampling.
///
/// Each hypothesis starts from an anchor pair, taken in a seeded random
/// order; the rest of the minimal sample is drawn at random from the
/// anchor's neighbourhood (see [`LOCAL_RADIUS`]), rejecting samples whose
/// points are closer than [`MIN_SAMPLE_SPAN`] and models outside
/// [`SCALE_RANGE`]. Hypotheses are ranked by their consensus within the
/// neighbourhood; the best few are then scored against every pair, the
/// winner is refit by least squares on its inliers until the inlier set
/// stops changing. `iterations` bounds the number of hypotheses.
pub fn ransac_filter(
    pairs: &[MatchPair],
    kind: ModelKind,
    iterations: usize,
    tolerance: f64,
    seed: u64,
) -> RansacOutcome {
    let k = kind.min_sample();
    let n = pairs.len();
    if n < k || iterations == 0 {
        return RansacOutcome::default();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let budget = if k == 1 {
        iterations.min(n)
    } else {
        iterations
    };

    let mut neighbourhoods = Neighbourhoods::new(pairs);
    // (local count, hypothesis index, model), best first.
    let mut shortlist: Vec<(usize, usize, TransformModel)> = Vec::with_capacity(SHORTLIST + 1);
    let mut sample: Vec<usize> = Vec::with_capacity(k);
    for h in 0..budget {
        let anchor = order[h % n];
        let neighbours = neighbourhoods.of(anchor);
        sample.clear();
        sample.push(anchor);
        let mut attempts = 0;
        while sample.len() < k && !neighbours.is_empty() && attempts < SAMPLE_ATTEMPTS * k {
            attempts += 1;
            let j = neighbours[rng.random_range(0..neighbours.len())] as usize;
            let far = sample.iter().all(|&s| {
                dist(pairs[s].a, pairs[j].a) >= MIN_SAMPLE_SPAN
                    && dist(pairs[s].b, pairs[j].b) >= MIN_SAMPLE_SPAN
            });
            if far {
                sample.push(j);
            }
        }
        if sample.len() < k {
            continue;
        }
        let subset: Vec<&MatchPair> = sample.iter().map(|&i| &pairs[i]).collect();
        let Some(model) = fit_model(kind, &subset, tolerance) else {
            continue;
        };
        if !plausible(&model) {
            continue;
        }
        let local = usize::from(model.is_inlier(&pairs[anchor]))
            + neighbours
                .iter()
                .filter(|&&j| model.is_inlier(&pairs[j as usize]))
                .count();
        if shortlist.len() == SHORTLIST && shortlist.last().is_some_and(|(c, _, _)| *c >= local) {
            continue;
        }
        let at = shortlist.partition_point(|(c, _, _)| *c >= local);
        shortlist.insert(at, (local, h, model));
        shortlist.truncate(SHORTLIST);
    }

    let mut best: Option<(TransformModel, Vec<usize>)> = None;
    for (_, _, model) in shortlist {
        let inliers = inlier_indices(&model, pairs);
        if best.as_ref().is_none_or(|(_, b)| inliers.len() > b.len()) {
            best = Some((model, inliers));
        }
    }
    let Some((mut model, mut inliers)) = best else {
        return RansacOutcome::default();
    };
    for _ in 0..5 {
        let subset: Vec<&MatchPair> = inliers.iter().map(|&i| &pairs[i]).collect();
        let Some(refit) = fit_model(kind, &subset, tolerance).filter(plausible) else {
            break;
        };
        let refit_inliers = inlier_indices(&refit, pairs);
        if refit_inliers.len() < inliers.len() {
            break;
        }
        let done = refit_inliers == inliers;
        model = refit;
        inliers = refit_inliers;
        if done {
            break;
        }
    }
    RansacOutcome {
        model: Some(model),
        inliers,
    }
}
