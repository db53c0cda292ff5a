use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use shfd::descriptor::write_descriptors_csv;
use shfd::eval::{
    coverage_manifest, run_eval, DatasetManifest, Label, ManifestEntry, TamperFactor,
};
use shfd::harris::write_keypoints_csv;
use shfd::imgio::{load_image, perturb, save_image, Perturbation};
use shfd::matcher::{candidate_matches, detect_from_features, extract_features};
use shfd::overlay::save_overlay;
use shfd::synth::{generate_suite, Tamper, ROTATIONS, SCALES};
use shfd::{DetectionReport, Epsilon, ModelKind, RunConfig, Verdict};

#[derive(Parser)]
#[command(
    name = "shfd",
    version,
    about = "Copy-move forgery detection with scaled Harris feature descriptors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect copy-move forgery in one image. Exit status 0 = genuine, 1 = forged.
    Detect(DetectArgs),
    /// Dump candidate match pairs (before RANSAC) as CSV.
    Match(MatchArgs),
    /// Evaluate a labeled manifest and write roc.csv, summary.json and roc.svg.
    Eval(EvalArgs),
    /// Apply one post-processing perturbation to an image.
    Perturb(PerturbArgs),
    /// Generate a seeded synthetic forgery corpus with manifest and ground truth.
    Synth(SynthArgs),
    /// Write the oriented keypoints (and optionally descriptors) of an image as CSV.
    DumpKeypoints(DumpArgs),
    /// Build a manifest from a COVERAGE-style directory (`<id>.ext` genuine, `<id>t.ext` forged).
    CoverageManifest(CoverageArgs),
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// JSON run configuration; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of pyramid octaves.
    #[arg(long, global = true)]
    octaves: Option<usize>,
    /// Intervals per octave; also resets the blur step to 2^(1/intervals).
    #[arg(long, global = true)]
    intervals: Option<usize>,
    /// Downsampling factor between octaves.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Corner response weight k.
    #[arg(long, global = true)]
    k: Option<f64>,
    /// Corner threshold as a fraction of the level's maximum response.
    #[arg(long = "t-cr", global = true)]
    t_cr: Option<f64>,
    /// Matching threshold: one value, or four comma-separated per-block values.
    #[arg(long, global = true)]
    epsilon: Option<String>,
    /// Minimum distance between the two points of a candidate pair.
    #[arg(long = "d-min", global = true)]
    d_min: Option<f64>,
    /// RANSAC transform model.
    #[arg(long, global = true)]
    model: Option<ModelKind>,
    /// RANSAC hypothesis budget.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    /// RANSAC inlier tolerance in pixels.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Inlier count at which an image is declared forged.
    #[arg(long, global = true)]
    tau: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.octaves {
            cfg.pyramid.octaves = v;
        }
        if let Some(v) = self.intervals {
            cfg.pyramid.intervals = v;
            if v > 0 {
                cfg.pyramid.sigma_step = 2f64.powf(1.0 / v as f64);
            }
        }
        if let Some(v) = self.beta {
            cfg.pyramid.sampling_factor = v;
        }
        if let Some(v) = self.k {
            cfg.harris.k = v;
        }
        if let Some(v) = self.t_cr {
            cfg.harris.t_cr_fraction = v;
        }
        if let Some(v) = &self.epsilon {
            cfg.matcher.epsilon = parse_epsilon(v)?;
        }
        if let Some(v) = self.d_min {
            cfg.matcher.d_min = v;
        }
        if let Some(v) = self.model {
            cfg.matcher.model = v;
        }
        if let Some(v) = self.iterations {
            cfg.matcher.iterations = v;
        }
        if let Some(v) = self.tol {
            cfg.matcher.tolerance = v;
        }
        if let Some(v) = self.tau {
            cfg.matcher.tau_match = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_epsilon(text: &str) -> Result<Epsilon> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("invalid epsilon `{text}`"))?;
    match values[..] {
        [e] => Ok(Epsilon::Shared(e)),
        [a, b, c, d] => Ok(Epsilon::PerBlock([a, b, c, d])),
        _ => bail!("epsilon takes one value or four comma-separated values"),
    }
}

#[derive(Args)]
struct DetectArgs {
    image: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a PNG with the inlier pairs drawn over the image.
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Write every pyramid level as PGM into this directory.
    #[arg(long = "dump-pyramid")]
    dump_pyramid: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct MatchArgs {
    image: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridChoice {
    /// Blur, noise and JPEG cells at three strengths each.
    Default,
    /// Clean images only.
    None,
}

#[derive(Args)]
struct EvalArgs {
    /// JSON array of {image_path, label, tamper_factor, pair_id}.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "none")]
    grid: GridChoice,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum OpChoice {
    Blur,
    Noise,
    Jpeg,
}

#[derive(Args)]
struct PerturbArgs {
    image: PathBuf,
    #[arg(long)]
    op: OpChoice,
    /// Blur sigma, noise variance or JPEG quality.
    #[arg(long)]
    param: f64,
    /// Blur window size.
    #[arg(long, default_value_t = 3)]
    window: usize,
    /// Noise mean.
    #[arg(long, default_value_t = 0.0)]
    mean: f64,
    /// Output image (.png or .pgm).
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum TamperChoice {
    Naive,
    Rotation,
    Scaling,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of forged/genuine pairs.
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, value_enum, default_value = "naive")]
    tamper: TamperChoice,
    /// Image side length.
    #[arg(long, default_value_t = 512)]
    size: usize,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct DumpArgs {
    image: PathBuf,
    /// Keypoint CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write descriptors (original-image coordinates) to this CSV.
    #[arg(long)]
    descriptors: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct CoverageArgs {
    /// Directory holding the images.
    #[arg(long)]
    root: PathBuf,
    /// Optional JSON object mapping image ids to naive|rotation|scaling.
    #[arg(long)]
    factors: Option<PathBuf>,
    /// Manifest output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct DetectOutput<'a> {
    image: String,
    #[serde(flatten)]
    report: &'a DetectionReport,
    config: &'a RunConfig,
}

fn config_comment(cfg: &RunConfig) -> String {
    format!(
        "# config={}\n",
        serde_json::to_string(cfg).expect("config serializes")
    )
}

fn write_output(path: Option<&Path>, body: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn cmd_detect(args: &DetectArgs) -> Result<Verdict> {
    let cfg = args.cfg.resolve()?;
    let img = load_image(&args.image)?;
    let features = extract_features(&img, &cfg)?;
    if let Some(dir) = &args.dump_pyramid {
        features.pyramid.dump(dir)?;
    }
    let report = detect_from_features(&features, &cfg, cfg.seed);
    if let Some(path) = &args.overlay {
        save_overlay(&img, &report.inliers, path)?;
    }
    let out = DetectOutput {
        image: args.image.display().to_string(),
        report: &report,
        config: &cfg,
    };
    let mut body = serde_json::to_vec_pretty(&out)?;
    body.push(b'\n');
    write_output(args.out.as_deref(), &body)?;
    Ok(report.verdict)
}

fn cmd_match(args: &MatchArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    let img = load_image(&args.image)?;
    let features = extract_features(&img, &cfg)?;
    let pairs = candidate_matches(&features, &cfg);
    let mut body = config_comment(&cfg);
    body.push_str("ax,ay,bx,by,d1,d2,d3,d4\n");
    for p in &pairs {
        let d = p.block_distances;
        body.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.a[0], p.a[1], p.b[0], p.b[1], d[0], d[1], d[2], d[3]
        ));
    }
    write_output(args.out.as_deref(), body.as_bytes())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    let manifest = DatasetManifest::load(&args.manifest)?;
    let grid = match args.grid {
        GridChoice::Default => Perturbation::default_grid(),
        GridChoice::None => Vec::new(),
    };
    let run = run_eval(&manifest, &grid, &cfg, cfg.seed)?;
    run.write(&args.out)?;
    for f in &run.failures {
        eprintln!("warning: {} ({} {}): {}", f.image, f.op, f.param, f.error);
    }
    Ok(())
}

fn cmd_perturb(args: &PerturbArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    let op = match args.op {
        OpChoice::Blur => Perturbation::Blur {
            window: args.window,
            sigma: args.param,
        },
        OpChoice::Noise => Perturbation::Noise {
            mean: args.mean,
            variance: args.param,
        },
        OpChoice::Jpeg => {
            if !(1.0..=100.0).contains(&args.param) || args.param.fract() != 0.0 {
                bail!("JPEG quality must be an integer in [1, 100]");
            }
            Perturbation::Jpeg {
                quality: args.param as u8,
            }
        }
    };
    let img = load_image(&args.image)?;
    let out = perturb(&img, &op, cfg.seed)?;
    save_image(&out, &args.out)?;
    Ok(())
}

#[derive(Serialize)]
struct SynthRecord<'a> {
    n: usize,
    size: usize,
    tamper: &'static str,
    config: &'a RunConfig,
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    let (tampers, tamper_name): (Vec<Tamper>, _) = match args.tamper {
        TamperChoice::Naive => (vec![Tamper::Naive], "naive"),
        TamperChoice::Rotation => (
            ROTATIONS.iter().map(|&r| Tamper::Rotation(r)).collect(),
            "rotation",
        ),
        TamperChoice::Scaling => (
            SCALES.iter().map(|&s| Tamper::Scaling(s)).collect(),
            "scaling",
        ),
    };
    let items = generate_suite(args.n, &tampers, args.size, cfg.seed)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut entries = Vec::with_capacity(items.len());
    for item in &items {
        let file = format!("{}.png", item.name);
        save_image(&item.image, args.out.join(&file))?;
        if let Some(truth) = &item.truth {
            truth.save_json(args.out.join(format!("{}.truth.json", item.name)))?;
        }
        entries.push(ManifestEntry {
            image_path: PathBuf::from(file),
            label: item.label,
            tamper_factor: item.factor,
            pair_id: Some(item.pair_id.clone()),
        });
    }
    let manifest = DatasetManifest {
        entries,
        base_dir: args.out.clone(),
    };
    fs::write(args.out.join("manifest.json"), manifest.to_json() + "\n")?;
    let record = SynthRecord {
        n: args.n,
        size: args.size,
        tamper: tamper_name,
        config: &cfg,
    };
    fs::write(
        args.out.join("synth.json"),
        serde_json::to_string_pretty(&record)? + "\n",
    )?;
    Ok(())
}

fn cmd_dump_keypoints(args: &DumpArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?;
    let img = load_image(&args.image)?;
    let features = extract_features(&img, &cfg)?;
    let mut body = config_comment(&cfg).into_bytes();
    write_keypoints_csv(&mut body, &features.keypoints)?;
    write_output(args.out.as_deref(), &body)?;
    if let Some(path) = &args.descriptors {
        let mut body = config_comment(&cfg).into_bytes();
        write_descriptors_csv(&mut body, &features.descriptors)?;
        fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_coverage(args: &CoverageArgs) -> Result<()> {
    let factors: BTreeMap<String, TamperFactor> = match &args.factors {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => BTreeMap::new(),
    };
    let manifest = coverage_manifest(&args.root, &factors)?;
    let forged = manifest
        .entries
        .iter()
        .filter(|e| e.label == Label::Forged)
        .count();
    eprintln!(
        "{} entries ({} forged, {} genuine)",
        manifest.entries.len(),
        forged,
        manifest.entries.len() - forged
    );
    fs::write(&args.out, manifest.to_json() + "\n")
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Detect(a) => {
            return Ok(match cmd_detect(a)? {
                Verdict::Genuine => ExitCode::from(0),
                Verdict::Forged => ExitCode::from(1),
            })
        }
        Command::Match(a) => cmd_match(a)?,
        Command::Eval(a) => cmd_eval(a)?,
        Command::Perturb(a) => cmd_perturb(a)?,
        Command::Synth(a) => cmd_synth(a)?,
        Command::DumpKeypoints(a) => cmd_dump_keypoints(a)?,
        Command::CoverageManifest(a) => cmd_coverage(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
