//! Dataset manifests, TPR/FPR, ROC sweeps over the inlier-count threshold
//! and the post-processing robustness grid.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::imgio::{load_image, perturb, Perturbation};
use crate::matcher::{detect, DetectionReport, Verdict};
use crate::plane::GrayImage;
use crate::synth::{mix_seed, SuiteItem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Forged,
    Genuine,
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum TamperFactor {
    Naive,
    Rotation,
    Scaling,
    Illumination,
    Freeform,
    Combined,
    #[default]
    None,
}

impl TamperFactor {
    pub fn name(self) -> &'static str {
        match self {
            TamperFactor::Naive => "naive",
            TamperFactor::Rotation => "rotation",
            TamperFactor::Scaling => "scaling",
            TamperFactor::Illumination => "illumination",
            TamperFactor::Freeform => "freeform",
            TamperFactor::Combined => "combined",
            TamperFactor::None => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_path: PathBuf,
    pub label: Label,
    #[serde(default)]
    pub tamper_factor: TamperFactor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
}

/// A JSON array of entries. Relative image paths resolve against the
/// manifest's own directory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let entries: Vec<ManifestEntry> =
            serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        for (i, e) in entries.iter().enumerate() {
            if e.image_path.as_os_str().is_empty() {
                return Err(Error::Manifest(format!(
                    "entry {i} has an empty image_path"
                )));
            }
            if e.label == Label::Genuine && e.tamper_factor != TamperFactor::None {
                return Err(Error::Manifest(format!(
                    "entry {i} is genuine but carries tamper factor {}",
                    e.tamper_factor.name()
                )));
            }
        }
        Ok(DatasetManifest {
            entries,
            base_dir: base_dir.into(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("manifest entries serialize")
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.image_path.is_absolute() {
            entry.image_path.clone()
        } else {
            self.base_dir.join(&entry.image_path)
        }
    }
}

/// Builds a manifest for a directory laid out like COVERAGE: originals named
/// `<id>.<ext>` and tampered copies `<id>t.<ext>`, optionally inside an
/// `image/` subdirectory. `factors` maps ids to tamper factors; forged
/// entries without one get [`TamperFactor::None`].
pub fn coverage_manifest(
    root: &Path,
    factors: &BTreeMap<String, TamperFactor>,
) -> Result<DatasetManifest> {
    let dir = if root.join("image").is_dir() {
        root.join("image")
    } else {
        root.to_path_buf()
    };
    let listing = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut found: Vec<(u64, bool, PathBuf)> = Vec::new();
    for item in listing {
        let item = item.map_err(|e| Error::io(&dir, e))?;
        let path = item.path();
        let (Some(stem), Some(ext)) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().and_then(|s| s.to_str()),
        ) else {
            continue;
        };
        if !matches!(
            ext.to_ascii_lowercase().as_str(),
            "tif" | "tiff" | "png" | "jpg" | "jpeg" | "pgm"
        ) {
            continue;
        }
        let (digits, tampered) = match stem.strip_suffix('t') {
            Some(d) => (d, true),
            None => (stem, false),
        };
        if let Ok(id) = digits.parse::<u64>() {
            let rel = path.strip_prefix(root).unwrap_or(&path).to_path_buf();
            found.push((id, tampered, rel));
        }
    }
    found.sort();
    let entries = found
        .into_iter()
        .map(|(id, tampered, rel)| {
            let pair_id = id.to_string();
            ManifestEntry {
                image_path: rel,
                label: if tampered {
                    Label::Forged
                } else {
                    Label::Genuine
                },
                tamper_factor: if tampered {
                    factors.get(&pair_id).copied().unwrap_or_default()
                } else {
                    TamperFactor::None
                },
                pair_id: Some(pair_id),
            }
        })
        .collect();
    Ok(DatasetManifest {
        entries,
        base_dir: root.to_path_buf(),
    })
}

/// True/false positive rates. A rate is `None` when its denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub forged: usize,
    pub genuine: usize,
}

pub fn compute_metrics(items: impl IntoIterator<Item = (Verdict, Label)>) -> Metrics {
    let (mut tp, mut fp, mut forged, mut genuine) = (0, 0, 0, 0);
    for (verdict, label) in items {
        match label {
            Label::Forged => {
                forged += 1;
                tp += (verdict == Verdict::Forged) as usize;
            }
            Label::Genuine => {
                genuine += 1;
                fp += (verdict == Verdict::Forged) as usize;
            }
        }
    }
    let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Metrics {
        tpr: rate(tp, forged),
        fpr: rate(fp, genuine),
        true_positives: tp,
        false_positives: fp,
        forged,
        genuine,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Inlier-count threshold: an image is flagged when its count >= tau.
    pub tau: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Ordered by tau descending, so both rates are nondecreasing.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Best TPR over operating points whose FPR does not exceed `max_fpr`.
    pub fn tpr_at_fpr(&self, max_fpr: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.fpr <= max_fpr)
            .map(|p| p.tpr)
            .fold(0.0, f64::max)
    }
}

/// Sweeps tau over `0..=max + 1` and integrates with the trapezoid rule.
pub fn roc_from_scores(scores: &[(usize, Label)]) -> Result<RocCurve> {
    let forged = scores.iter().filter(|(_, l)| *l == Label::Forged).count();
    let genuine = scores.len() - forged;
    if forged == 0 || genuine == 0 {
        return Err(Error::param("ROC needs both forged and genuine samples"));
    }
    let max = scores.iter().map(|(s, _)| *s).max().unwrap_or(0);
    let points: Vec<RocPoint> = (0..=max + 1)
        .rev()
        .map(|tau| {
            let m = compute_metrics(scores.iter().map(|&(s, l)| {
                (
                    if s >= tau {
                        Verdict::Forged
                    } else {
                        Verdict::Genuine
                    },
                    l,
                )
            }));
            RocPoint {
                fpr: m.fpr.expect("genuine samples present"),
                tpr: m.tpr.expect("forged samples present"),
                tau,
            }
        })
        .collect();
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// Anything the harness can iterate: manifests on disk or in-memory suites.
pub trait ImageSource {
    fn len(&self) -> usize;
    fn label(&self, index: usize) -> Label;
    fn factor(&self, index: usize) -> TamperFactor;
    fn name(&self, index: usize) -> String;
    fn load(&self, index: usize) -> Result<GrayImage>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ImageSource for DatasetManifest {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn label(&self, index: usize) -> Label {
        self.entries[index].label
    }

    fn factor(&self, index: usize) -> TamperFactor {
        self.entries[index].tamper_factor
    }

    fn name(&self, index: usize) -> String {
        self.entries[index].image_path.display().to_string()
    }

    fn load(&self, index: usize) -> Result<GrayImage> {
        load_image(self.resolve(&self.entries[index]))
    }
}

impl ImageSource for [SuiteItem] {
    fn len(&self) -> usize {
        <[SuiteItem]>::len(self)
    }

    fn label(&self, index: usize) -> Label {
        self[index].label
    }

    fn factor(&self, index: usize) -> TamperFactor {
        self[index].factor
    }

    fn name(&self, index: usize) -> String {
        self[index].name.clone()
    }

    fn load(&self, index: usize) -> Result<GrayImage> {
        Ok(self[index].image.clone())
    }
}

/// Detection result for one image of a source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryOutcome {
    pub index: usize,
    pub name: String,
    pub label: Label,
    pub factor: TamperFactor,
    pub report: Option<DetectionReport>,
    pub error: Option<String>,
}

impl EntryOutcome {
    pub fn score(&self) -> Option<usize> {
        self.report.as_ref().map(DetectionReport::inlier_count)
    }
}

/// Seed used to detect image `index` of a run seeded with `seed`.
pub fn detection_seed(seed: u64, index: usize) -> u64 {
    mix_seed(seed, index as u64)
}

fn perturbation_seed(seed: u64, index: usize) -> u64 {
    mix_seed(seed ^ 0x05EE_D0FA_015E, index as u64)
}

/// Runs detection on every image, in index order. Failures are recorded,
/// not propagated.
pub fn evaluate<S: ImageSource + ?Sized>(
    source: &S,
    perturbation: Option<&Perturbation>,
    cfg: &RunConfig,
    seed: u64,
) -> Vec<EntryOutcome> {
    (0..source.len())
        .map(|i| {
            let result = source.load(i).and_then(|img| {
                let img = match perturbation {
                    Some(op) => perturb(&img, op, perturbation_seed(seed, i))?,
                    None => img,
                };
                detect(&img, cfg, detection_seed(seed, i))
            });
            let (report, error) = match result {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            EntryOutcome {
                index: i,
                name: source.name(i),
                label: source.label(i),
                factor: source.factor(i),
                report,
                error,
            }
        })
        .collect()
}

/// ROC of a set of outcomes, restricted by `keep`. Failed entries are
/// excluded.
pub fn roc_of(outcomes: &[EntryOutcome], keep: impl Fn(&EntryOutcome) -> bool) -> Result<RocCurve> {
    let scores: Vec<(usize, Label)> = outcomes
        .iter()
        .filter(|o| keep(o))
        .filter_map(|o| o.score().map(|s| (s, o.label)))
        .collect();
    roc_from_scores(&scores)
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub curve: RocCurve,
    pub outcomes: Vec<EntryOutcome>,
}

impl SweepResult {
    pub fn failures(&self) -> impl Iterator<Item = &EntryOutcome> {
        self.outcomes.iter().filter(|o| o.error.is_some())
    }
}

pub fn roc_sweep<S: ImageSource + ?Sized>(
    source: &S,
    cfg: &RunConfig,
    seed: u64,
) -> Result<SweepResult> {
    let outcomes = evaluate(source, None, cfg, seed);
    let curve = roc_of(&outcomes, |_| true)?;
    Ok(SweepResult { curve, outcomes })
}

#[derive(Clone, Debug)]
pub struct GridCell {
    pub perturbation: Perturbation,
    pub sweep: SweepResult,
}

/// One ROC sweep per perturbation, every image perturbed before detection.
pub fn robustness_grid<S: ImageSource + ?Sized>(
    source: &S,
    grid: &[Perturbation],
    cfg: &RunConfig,
    seed: u64,
) -> Result<Vec<GridCell>> {
    grid.iter()
        .map(|op| {
            op.validate()?;
            let outcomes = evaluate(source, Some(op), cfg, seed);
            let curve = roc_of(&outcomes, |_| true)?;
            Ok(GridCell {
                perturbation: *op,
                sweep: SweepResult { curve, outcomes },
            })
        })
        .collect()
}

/// One curve of an evaluation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    /// `all` or a tamper factor name.
    pub subset: String,
    /// `none` for the clean sweep.
    pub op: String,
    pub param: f64,
    pub images: usize,
    pub curve: RocCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub op: String,
    pub param: f64,
    pub image: String,
    pub error: String,
}

/// Everything `eval` writes: one clean sweep (overall and per tamper
/// factor) plus optional grid cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub config: RunConfig,
    pub seed: u64,
    pub curves: Vec<CurveRecord>,
    pub failures: Vec<FailureRecord>,
}

fn collect_failures(op: &str, param: f64, outcomes: &[EntryOutcome], out: &mut Vec<FailureRecord>) {
    for o in outcomes {
        if let Some(e) = &o.error {
            out.push(FailureRecord {
                op: op.to_string(),
                param,
                image: o.name.clone(),
                error: e.clone(),
            });
        }
    }
}

pub fn run_eval<S: ImageSource + ?Sized>(
    source: &S,
    grid: &[Perturbation],
    cfg: &RunConfig,
    seed: u64,
) -> Result<EvalRun> {
    if source.is_empty() {
        return Err(Error::Manifest("manifest has no entries".into()));
    }
    let mut curves = Vec::new();
    let mut failures = Vec::new();

    let clean = roc_sweep(source, cfg, seed)?;
    collect_failures("none", 0.0, &clean.outcomes, &mut failures);
    let scored = clean.outcomes.iter().filter(|o| o.report.is_some()).count();
    curves.push(CurveRecord {
        subset: "all".into(),
        op: "none".into(),
        param: 0.0,
        images: scored,
        curve: clean.curve.clone(),
    });
    let factors: BTreeSet<TamperFactor> = clean
        .outcomes
        .iter()
        .filter(|o| o.label == Label::Forged && o.factor != TamperFactor::None)
        .map(|o| o.factor)
        .collect();
    for factor in factors {
        // forged images of this factor against every genuine image
        let keep = |o: &EntryOutcome| o.label == Label::Genuine || o.factor == factor;
        if let Ok(curve) = roc_of(&clean.outcomes, keep) {
            curves.push(CurveRecord {
                subset: factor.name().into(),
                op: "none".into(),
                param: 0.0,
                images: clean
                    .outcomes
                    .iter()
                    .filter(|o| keep(o) && o.report.is_some())
                    .count(),
                curve,
            });
        }
    }

    for cell in robustness_grid(source, grid, cfg, seed)? {
        let op = cell.perturbation.op_name();
        let param = cell.perturbation.param();
        collect_failures(op, param, &cell.sweep.outcomes, &mut failures);
        curves.push(CurveRecord {
            subset: "all".into(),
            op: op.into(),
            param,
            images: cell
                .sweep
                .outcomes
                .iter()
                .filter(|o| o.report.is_some())
                .count(),
            curve: cell.sweep.curve,
        });
    }

    Ok(EvalRun {
        config: cfg.clone(),
        seed,
        curves,
        failures,
    })
}

impl EvalRun {
    /// `subset,op,param,tau,fpr,tpr` rows, one per curve point.
    pub fn roc_csv(&self) -> String {
        let mut s = String::from("subset,op,param,tau,fpr,tpr\n");
        for c in &self.curves {
            for p in &c.curve.points {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    c.subset, c.op, c.param, p.tau, p.fpr, p.tpr
                );
            }
        }
        s
    }

    /// AUC per curve together with the effective configuration.
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Cell<'a> {
            subset: &'a str,
            op: &'a str,
            param: f64,
            images: usize,
            auc: f64,
        }
        #[derive(Serialize)]
        struct Summary<'a> {
            config: &'a RunConfig,
            seed: u64,
            cells: Vec<Cell<'a>>,
            failures: &'a [FailureRecord],
        }
        let summary = Summary {
            config: &self.config,
            seed: self.seed,
            cells: self
                .curves
                .iter()
                .map(|c| Cell {
                    subset: &c.subset,
                    op: &c.op,
                    param: c.param,
                    images: c.images,
                    auc: c.curve.auc,
                })
                .collect(),
            failures: &self.failures,
        };
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    }

    /// A plain SVG line plot of every curve.
    pub fn roc_svg(&self) -> String {
        const SIZE: f64 = 400.0;
        const PAD: f64 = 40.0;
        const COLORS: [&str; 8] = [
            "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
        ];
        let total = SIZE + 2.0 * PAD;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{}" font-family="sans-serif" font-size="10">"#,
            total + 14.0 * self.curves.len() as f64
        );
        let _ = writeln!(
            s,
            r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r##"<line x1="{PAD}" y1="{}" x2="{}" y2="{PAD}" stroke="#bbb" stroke-dasharray="4"/>"##,
            PAD + SIZE,
            PAD + SIZE
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">FPR</text>"#,
            PAD + SIZE / 2.0,
            PAD + SIZE + 25.0
        );
        let _ = writeln!(s, r#"<text x="5" y="{}">TPR</text>"#, PAD + SIZE / 2.0);
        for (i, c) in self.curves.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = c
                .curve
                .points
                .iter()
                .map(|p| {
                    format!(
                        "{:.2},{:.2}",
                        PAD + p.fpr * SIZE,
                        PAD + (1.0 - p.tpr) * SIZE
                    )
                })
                .collect();
            let _ = writeln!(
                s,
                r##"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"##,
                pts.join(" ")
            );
            let _ = writeln!(
                s,
                r##"<text x="{PAD}" y="{}" fill="{color}">{} {} {} (AUC {:.3})</text>"##,
                total + 14.0 * i as f64,
                c.subset,
                c.op,
                c.param,
                c.curve.auc
            );
        }
        s.push_str("</svg>\n");
        s
    }

    /// Writes `roc.csv`, `summary.json` and `roc.svg` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("roc.csv", self.roc_csv()),
            ("summary.json", self.summary_json()),
            ("roc.svg", self.roc_svg()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
