//! Synthetic textured images and copy-move forgeries with exact ground
//! truth, used for oracle tests and the synthetic evaluation suites.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Label, TamperFactor};
use crate::plane::{snap, GrayImage, Plane};
use crate::scalespace::gaussian_blur;

/// Rotations drawn by the rotation tamper generator.
pub const ROTATIONS: [f64; 3] = [FRAC_PI_6, FRAC_PI_2, PI];
/// Scales drawn by the scaling tamper generator.
pub const SCALES: [f64; 2] = [0.9, 1.1];

/// SplitMix64 step; derives independent per-item seeds from one run seed.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    /// Center in pixel-center coordinates.
    pub fn center(&self) -> [f64; 2] {
        [
            self.x as f64 + (self.width as f64 - 1.0) / 2.0,
            self.y as f64 + (self.height as f64 - 1.0) / 2.0,
        ]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        const EPS: f64 = 1e-9;
        p[0] >= self.x as f64 - EPS
            && p[0] <= (self.x + self.width - 1) as f64 + EPS
            && p[1] >= self.y as f64 - EPS
            && p[1] <= (self.y + self.height - 1) as f64 + EPS
    }
}

/// Geometry of one copy-move: the source rectangle is rotated and scaled
/// about its center and pasted centered on `dest_center`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgeryGroundTruth {
    pub source_rect: Rect,
    pub dest_center: [f64; 2],
    /// Radians, counter-clockwise in the x-right/y-down frame's matrix sense.
    pub rotation: f64,
    pub scale: f64,
    /// `dest_center - source_rect.center()`.
    pub translation: [f64; 2],
}

impl ForgeryGroundTruth {
    pub fn new(source_rect: Rect, dest_center: [f64; 2], rotation: f64, scale: f64) -> Self {
        let c = source_rect.center();
        ForgeryGroundTruth {
            source_rect,
            dest_center,
            rotation,
            scale,
            translation: [dest_center[0] - c[0], dest_center[1] - c[1]],
        }
    }

    /// Maps a source-image point to its pasted location.
    pub fn forward(&self, p: [f64; 2]) -> [f64; 2] {
        let c = self.source_rect.center();
        let (s, co) = self.rotation.sin_cos();
        let (u, v) = (p[0] - c[0], p[1] - c[1]);
        [
            self.dest_center[0] + self.scale * (co * u - s * v),
            self.dest_center[1] + self.scale * (s * u + co * v),
        ]
    }

    /// Maps a pasted location back to the source image.
    pub fn inverse(&self, p: [f64; 2]) -> [f64; 2] {
        let c = self.source_rect.center();
        let (s, co) = self.rotation.sin_cos();
        let (u, v) = (
            (p[0] - self.dest_center[0]) / self.scale,
            (p[1] - self.dest_center[1]) / self.scale,
        );
        [snap(c[0] + co * u + s * v), snap(c[1] - s * u + co * v)]
    }

    /// Integer bounding box `(x0, y0, x1, y1)` (inclusive) of the pasted
    /// region.
    pub fn footprint(&self) -> (f64, f64, f64, f64) {
        let r = &self.source_rect;
        let (x0, y0) = (r.x as f64, r.y as f64);
        let (x1, y1) = ((r.x + r.width - 1) as f64, (r.y + r.height - 1) as f64);
        let corners = [[x0, y0], [x1, y0], [x0, y1], [x1, y1]].map(|p| self.forward(p));
        let fold = |f: fn(f64, f64) -> f64, init: f64, i: usize| {
            corners.iter().map(|c| c[i]).fold(init, f)
        };
        (
            (fold(f64::min, f64::INFINITY, 0) - 1e-9).ceil(),
            (fold(f64::min, f64::INFINITY, 1) - 1e-9).ceil(),
            (fold(f64::max, f64::NEG_INFINITY, 0) + 1e-9).floor(),
            (fold(f64::max, f64::NEG_INFINITY, 1) + 1e-9).floor(),
        )
    }

    /// Checks the image-independent fields: scale in [0.5, 2], rotation in
    /// [0, 2pi), finite coordinates.
    pub fn check_parameters(&self) -> Result<()> {
        if !(0.5..=2.0).contains(&self.scale) {
            return Err(Error::param(format!(
                "scale {} outside [0.5, 2]",
                self.scale
            )));
        }
        if !(0.0..TAU).contains(&self.rotation) {
            return Err(Error::param(format!(
                "rotation {} outside [0, 2pi)",
                self.rotation
            )));
        }
        if self
            .dest_center
            .iter()
            .chain(&self.translation)
            .any(|v| !v.is_finite())
        {
            return Err(Error::param("non-finite destination"));
        }
        Ok(())
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        self.check_parameters()?;
        let r = &self.source_rect;
        let fits = |start: usize, len: usize, limit: usize| {
            start.checked_add(len).is_some_and(|end| end <= limit)
        };
        if r.width == 0
            || r.height == 0
            || !fits(r.x, r.width, width)
            || !fits(r.y, r.height, height)
        {
            return Err(Error::OutOfBounds(format!("source rectangle {r:?}")));
        }
        let (x0, y0, x1, y1) = self.footprint();
        if x0 < 0.0 || y0 < 0.0 || x1 > (width - 1) as f64 || y1 > (height - 1) as f64 {
            return Err(Error::OutOfBounds(format!(
                "pasted region [{x0}, {x1}] x [{y0}, {y1}] leaves the {width}x{height} image"
            )));
        }
        Ok(())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Parses a saved ground truth and checks its parameters.
    pub fn from_json(text: &str) -> Result<Self> {
        let truth: Self = serde_json::from_str(text)?;
        truth.check_parameters()?;
        Ok(truth)
    }
}

/// Copies `truth.source_rect`, rotates/scales it about its center with
/// bilinear interpolation and pastes it at `truth.dest_center`.
pub fn synth_forgery(
    img: &GrayImage,
    truth: &ForgeryGroundTruth,
) -> Result<(GrayImage, ForgeryGroundTruth)> {
    let (w, h) = img.dims();
    let truth = ForgeryGroundTruth::new(
        truth.source_rect,
        truth.dest_center,
        truth.rotation,
        truth.scale,
    );
    truth.validate(w, h)?;
    let (x0, y0, x1, y1) = truth.footprint();
    let mut out = img.clone();
    for y in y0 as usize..=y1 as usize {
        for x in x0 as usize..=x1 as usize {
            let q = truth.inverse([x as f64, y as f64]);
            if truth.source_rect.contains(q) {
                out.set(x, y, img.sample_bilinear(q[0], q[1]));
            }
        }
    }
    Ok((out, truth))
}

/// Parameters of [`stamp_texture`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StampParams {
    /// Grid spacing of the blobs in pixels.
    pub spacing: f64,
    /// Gaussian radius of one blob.
    pub radius: f64,
    /// Peak amplitude of the fine texture inside a blob, in gray levels.
    pub amplitude: f64,
    /// Smoothing of the fine texture.
    pub grain: f64,
}

impl Default for StampParams {
    fn default() -> Self {
        StampParams {
            spacing: 24.0,
            radius: 5.0,
            amplitude: 50.0,
            grain: 1.5,
        }
    }
}

fn unit_layer(rng: &mut ChaCha8Rng, width: usize, height: usize, sigma: f64) -> Plane {
    let white = Plane::from_fn(width, height, |_, _| rng.random::<f64>() - 0.5);
    let layer = gaussian_blur(&white, sigma);
    let rms = (layer.data().iter().map(|v| v * v).sum::<f64>() / layer.data().len() as f64)
        .sqrt()
        .max(1e-12);
    layer.map(|v| v / rms)
}

/// Slowly varying background with small blobs of fine noise scattered on a
/// jittered grid, on the [0, 255] scale.
pub fn stamp_texture(width: usize, height: usize, seed: u64, params: &StampParams) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fine = unit_layer(&mut rng, width, height, params.grain);
    let background = unit_layer(&mut rng, width, height, 32.0);
    let mut envelope = Plane::filled(width, height, 0.0);
    let nx = (width as f64 / params.spacing).ceil() as usize;
    let ny = (height as f64 / params.spacing).ceil() as usize;
    let reach = (3.0 * params.radius) as isize;
    for gy in 0..ny {
        for gx in 0..nx {
            let cx = (gx as f64 + rng.random::<f64>()) * params.spacing;
            let cy = (gy as f64 + rng.random::<f64>()) * params.spacing;
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    let x = cx as isize + dx;
                    let y = cy as isize + dy;
                    if x < 0 || y < 0 || x >= width as isize || y >= height as isize {
                        continue;
                    }
                    let (x, y) = (x as usize, y as usize);
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    let w = (-d2 / (2.0 * params.radius * params.radius)).exp();
                    envelope.set(x, y, envelope.get(x, y) + w);
                }
            }
        }
    }
    Plane::from_fn(width, height, |x, y| {
        let v = 128.0
            + 30.0 * background.get(x, y)
            + params.amplitude * envelope.get(x, y).min(1.0) * fine.get(x, y);
        v.clamp(0.0, 255.0)
    })
}

/// The test texture used by the synthetic suites.
pub fn textured_image(width: usize, height: usize, seed: u64) -> GrayImage {
    stamp_texture(width, height, seed, &StampParams::default())
}

/// Kind of synthetic tampering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tamper {
    Naive,
    Rotation(f64),
    Scaling(f64),
}

impl Tamper {
    pub fn factor(&self) -> TamperFactor {
        match self {
            Tamper::Naive => TamperFactor::Naive,
            Tamper::Rotation(_) => TamperFactor::Rotation,
            Tamper::Scaling(_) => TamperFactor::Scaling,
        }
    }
}

/// Side length of the copied square.
pub const PATCH_SIZE: usize = 64;
/// Minimum |dx| of the copy; keeps the pasted region clear of the source.
pub const MIN_SHIFT: i64 = 80;
const MAX_SHIFT: i64 = 160;
const EDGE_MARGIN: f64 = 16.0;

/// Random copy-move geometry for a `width` x `height` image.
pub fn random_forgery(
    rng: &mut impl Rng,
    width: usize,
    height: usize,
    tamper: Tamper,
) -> Result<ForgeryGroundTruth> {
    let (rotation, scale) = match tamper {
        Tamper::Naive => (0.0, 1.0),
        Tamper::Rotation(r) => (r, 1.0),
        Tamper::Scaling(s) => (0.0, s),
    };
    let m = EDGE_MARGIN as usize;
    if width < PATCH_SIZE + 2 * m + MAX_SHIFT as usize || height < PATCH_SIZE + 2 * m {
        return Err(Error::TooSmall {
            width,
            height,
            min: PATCH_SIZE + 2 * m + MAX_SHIFT as usize,
        });
    }
    for _ in 0..10_000 {
        let rect = Rect {
            x: rng.random_range(m..=width - PATCH_SIZE - m),
            y: rng.random_range(m..=height - PATCH_SIZE - m),
            width: PATCH_SIZE,
            height: PATCH_SIZE,
        };
        let mut dx = rng.random_range(MIN_SHIFT..=MAX_SHIFT);
        if rng.random::<bool>() {
            dx = -dx;
        }
        let dy = rng.random_range(-60i64..=60);
        let c = rect.center();
        let truth =
            ForgeryGroundTruth::new(rect, [c[0] + dx as f64, c[1] + dy as f64], rotation, scale);
        let (x0, y0, x1, y1) = truth.footprint();
        if x0 >= EDGE_MARGIN
            && y0 >= EDGE_MARGIN
            && x1 <= width as f64 - 1.0 - EDGE_MARGIN
            && y1 <= height as f64 - 1.0 - EDGE_MARGIN
        {
            return Ok(truth);
        }
    }
    Err(Error::OutOfBounds(
        "no admissible forgery placement found".into(),
    ))
}

#[derive(Clone, Debug)]
pub struct SuiteItem {
    pub name: String,
    pub image: GrayImage,
    pub label: Label,
    pub factor: TamperFactor,
    pub pair_id: String,
    pub truth: Option<ForgeryGroundTruth>,
}

/// `n` genuine textures plus one forged copy of each. Forgery `i` draws its
/// tamper uniformly from `tampers`.
pub fn generate_suite(
    n: usize,
    tampers: &[Tamper],
    size: usize,
    seed: u64,
) -> Result<Vec<SuiteItem>> {
    if tampers.is_empty() {
        return Err(Error::param("at least one tamper kind is required"));
    }
    let mut items = Vec::with_capacity(2 * n);
    for i in 0..n {
        let base = textured_image(size, size, mix_seed(seed, 2 * i as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2 * i as u64 + 1));
        let tamper = tampers[rng.random_range(0..tampers.len())];
        let spec = random_forgery(&mut rng, size, size, tamper)?;
        let (forged, truth) = synth_forgery(&base, &spec)?;
        let pair_id = format!("{i:03}");
        items.push(SuiteItem {
            name: format!("{pair_id}_forged"),
            image: forged,
            label: Label::Forged,
            factor: tamper.factor(),
            pair_id: pair_id.clone(),
            truth: Some(truth),
        });
        items.push(SuiteItem {
            name: format!("{pair_id}_genuine"),
            image: base,
            label: Label::Genuine,
            factor: TamperFactor::None,
            pair_id,
            truth: None,
        });
    }
    Ok(items)
}
