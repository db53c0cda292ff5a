//! Gaussian pyramid of octaves (resolution) and intervals (blur).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgio::save_image;
use crate::plane::{gaussian_kernel, GrayImage};

/// Smallest side length any pyramid level may have.
pub const MIN_LEVEL_SIZE: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PyramidConfig {
    pub octaves: usize,
    pub intervals: usize,
    /// Downsampling factor between consecutive octaves.
    pub sampling_factor: f64,
    /// Blur of the first interval of every octave.
    pub base_sigma: f64,
    /// Ratio between the blur of consecutive intervals.
    pub sigma_step: f64,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        PyramidConfig {
            octaves: 4,
            intervals: 4,
            sampling_factor: 1.25,
            base_sigma: 1.0,
            sigma_step: 2f64.powf(1.0 / 4.0),
        }
    }
}

impl PyramidConfig {
    pub fn validate(&self) -> Result<()> {
        if self.octaves < 1 || self.intervals < 1 {
            return Err(Error::param(
                "pyramid needs at least one octave and one interval",
            ));
        }
        if !(self.sampling_factor > 1.0 && self.sampling_factor.is_finite()) {
            return Err(Error::param("sampling factor must be > 1"));
        }
        if !(self.base_sigma > 0.0 && self.base_sigma.is_finite()) {
            return Err(Error::param("base sigma must be > 0"));
        }
        if !(self.sigma_step > 1.0 && self.sigma_step.is_finite()) {
            return Err(Error::param("sigma step must be > 1"));
        }
        Ok(())
    }

    /// Blur applied to interval `interval` (1-based) of every octave.
    pub fn sigma(&self, interval: usize) -> f64 {
        self.base_sigma * self.sigma_step.powi(interval as i32 - 1)
    }
}

#[derive(Clone, Debug)]
pub struct Pyramid {
    /// `levels[octave][interval]`, both zero-based here.
    pub levels: Vec<Vec<GrayImage>>,
    pub sigmas: Vec<f64>,
    pub sampling_factor: f64,
}

impl Pyramid {
    /// Level by 1-based octave and interval.
    pub fn level(&self, octave: usize, interval: usize) -> &GrayImage {
        &self.levels[octave - 1][interval - 1]
    }

    pub fn octaves(&self) -> usize {
        self.levels.len()
    }

    /// Writes every level as `o{octave}_i{interval}.pgm`.
    pub fn dump(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (o, octave) in self.levels.iter().enumerate() {
            for (i, level) in octave.iter().enumerate() {
                save_image(level, dir.join(format!("o{}_i{}.pgm", o + 1, i + 1)))?;
            }
        }
        Ok(())
    }
}

/// Separable Gaussian blur, kernel radius `ceil(3 sigma)`, replicated borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    assert!(sigma > 0.0, "sigma must be positive");
    img.convolve_separable(&gaussian_kernel(sigma))
}

/// Output size of one downsampling step.
pub fn downsampled_dims(width: usize, height: usize, beta: f64) -> (usize, usize) {
    (
        (width as f64 / beta).round() as usize,
        (height as f64 / beta).round() as usize,
    )
}

/// Bilinear resampling by `beta`. Output pixel (i, j) samples the input at
/// (i * beta, j * beta), so octave coordinates scale back to the original
/// frame by a plain multiplication.
pub fn downsample(img: &GrayImage, beta: f64) -> Result<GrayImage> {
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::param(format!("sampling factor {beta} must be > 1")));
    }
    let (w, h) = downsampled_dims(img.width(), img.height(), beta);
    if w < MIN_LEVEL_SIZE || h < MIN_LEVEL_SIZE {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: MIN_LEVEL_SIZE,
        });
    }
    Ok(GrayImage::from_fn(w, h, |x, y| {
        img.sample_bilinear(x as f64 * beta, y as f64 * beta)
    }))
}

pub fn build_pyramid(img: &GrayImage, cfg: &PyramidConfig) -> Result<Pyramid> {
    cfg.validate()?;
    let (w, h) = img.dims();
    if w < MIN_LEVEL_SIZE || h < MIN_LEVEL_SIZE {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min: MIN_LEVEL_SIZE,
        });
    }

    let sigmas: Vec<f64> = (1..=cfg.intervals).map(|i| cfg.sigma(i)).collect();
    let mut levels: Vec<Vec<GrayImage>> = Vec::with_capacity(cfg.octaves);
    let mut seed = img.clone();
    for o in 0..cfg.octaves {
        if o > 0 {
            let prev = &levels[o - 1][0];
            let next = downsample(prev, cfg.sampling_factor)?;
            if next.width() >= prev.width() || next.height() >= prev.height() {
                return Err(Error::param(format!(
                    "sampling factor {} does not shrink a {}x{} level",
                    cfg.sampling_factor,
                    prev.width(),
                    prev.height()
                )));
            }
            seed = next;
        }
        levels.push(sigmas.iter().map(|&s| gaussian_blur(&seed, s)).collect());
    }

    Ok(Pyramid {
        levels,
        sigmas,
        sampling_factor: cfg.sampling_factor,
    })
}
