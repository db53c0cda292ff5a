//! Harris corners on every pyramid level.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::{GrayImage, Plane};
use crate::scalespace::{gaussian_blur, Pyramid};

/// Keypoints closer than this to a level border are dropped; the oriented
/// descriptor support (4x4 grid plus radius-2 LBP rings) needs the room.
pub const BORDER_MARGIN: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarrisConfig {
    /// Weight of the squared trace in the corner response.
    pub k: f64,
    /// Threshold as a fraction of the level's maximum response.
    pub t_cr_fraction: f64,
    /// Sigma of the Gaussian window of the second moment matrix.
    pub window_sigma: f64,
    pub nms_radius: usize,
}

impl Default for HarrisConfig {
    fn default() -> Self {
        HarrisConfig {
            k: 0.05,
            t_cr_fraction: 0.02,
            window_sigma: 1.0,
            nms_radius: 1,
        }
    }
}

impl HarrisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(Error::param("harris k must be finite and >= 0"));
        }
        if !(self.t_cr_fraction.is_finite() && self.t_cr_fraction >= 0.0) {
            return Err(Error::param("t_cr_fraction must be finite and >= 0"));
        }
        if !(self.window_sigma > 0.0 && self.window_sigma.is_finite()) {
            return Err(Error::param("window sigma must be > 0"));
        }
        if self.nms_radius < 1 {
            return Err(Error::param("nms radius must be >= 1"));
        }
        Ok(())
    }
}

/// A scaled Harris point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    /// Position in its own pyramid level.
    pub x: f64,
    pub y: f64,
    /// 1-based.
    pub octave: usize,
    /// 1-based.
    pub interval: usize,
    pub response: f64,
    /// Radians in [0, 2pi); zero until orientation is assigned.
    pub orientation: f64,
}

/// Central differences `(I(x+1) - I(x-1)) / 2` with replicated borders.
pub fn gradients(img: &GrayImage) -> (Plane, Plane) {
    let (w, h) = img.dims();
    let mut ix = Plane::filled(w, h, 0.0);
    let mut iy = Plane::filled(w, h, 0.0);
    for y in 0..h {
        let yi = y as isize;
        for x in 0..w {
            let xi = x as isize;
            ix.set(
                x,
                y,
                (img.get_clamped(xi + 1, yi) - img.get_clamped(xi - 1, yi)) / 2.0,
            );
            iy.set(
                x,
                y,
                (img.get_clamped(xi, yi + 1) - img.get_clamped(xi, yi - 1)) / 2.0,
            );
        }
    }
    (ix, iy)
}

/// Windowed second moment matrix entries `(Sxx, Syy, Sxy)`.
pub fn second_moments(img: &GrayImage, window_sigma: f64) -> (Plane, Plane, Plane) {
    let (ix, iy) = gradients(img);
    let sxx = gaussian_blur(&ix.map(|v| v * v), window_sigma);
    let syy = gaussian_blur(&iy.map(|v| v * v), window_sigma);
    let sxy = gaussian_blur(&ix.zip_map(&iy, |a, b| a * b), window_sigma);
    (sxx, syy, sxy)
}

/// Corner response `det(M) - k tr(M)^2` per pixel.
pub fn harris_response(img: &GrayImage, cfg: &HarrisConfig) -> Plane {
    let (sxx, syy, sxy) = second_moments(img, cfg.window_sigma);
    let k = cfg.k;
    let data = sxx
        .data()
        .iter()
        .zip(syy.data())
        .zip(sxy.data())
        .map(|((&a, &b), &c)| {
            let tr = a + b;
            a * b - c * c - k * tr * tr
        })
        .collect();
    Plane::new(img.width(), img.height(), data).expect("response map has image dimensions")
}

/// Thresholded local maxima of one response map, excluding the border margin.
///
/// Among equal neighbors only the one first in raster order survives, so no
/// two returned points lie within `nms_radius` of each other.
pub fn local_maxima(cr: &Plane, t_cr_fraction: f64, nms_radius: usize) -> Vec<(usize, usize, f64)> {
    let (w, h) = cr.dims();
    let max = cr.max();
    if max.is_nan() || max <= 0.0 || w <= 2 * BORDER_MARGIN || h <= 2 * BORDER_MARGIN {
        return Vec::new();
    }
    let threshold = t_cr_fraction * max;
    let r = nms_radius as isize;
    let mut out = Vec::new();
    for y in BORDER_MARGIN..h - BORDER_MARGIN {
        'px: for x in BORDER_MARGIN..w - BORDER_MARGIN {
            let v = cr.get(x, y);
            if v < threshold || v <= 0.0 {
                continue;
            }
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = cr.get_clamped(x as isize + dx, y as isize + dy);
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if n > v || (earlier && n == v) {
                        continue 'px;
                    }
                }
            }
            out.push((x, y, v));
        }
    }
    out
}

/// Harris points of every level, sorted by (octave, interval, y, x).
pub fn extract_keypoints(pyr: &Pyramid, cfg: &HarrisConfig) -> Vec<Keypoint> {
    let mut keypoints = Vec::new();
    for (o, octave) in pyr.levels.iter().enumerate() {
        for (i, level) in octave.iter().enumerate() {
            let cr = harris_response(level, cfg);
            keypoints.extend(
                local_maxima(&cr, cfg.t_cr_fraction, cfg.nms_radius)
                    .into_iter()
                    .map(|(x, y, response)| Keypoint {
                        x: x as f64,
                        y: y as f64,
                        octave: o + 1,
                        interval: i + 1,
                        response,
                        orientation: 0.0,
                    }),
            );
        }
    }
    keypoints
}

/// CSV with header `octave,interval,x,y,response,theta`.
pub fn write_keypoints_csv<W: Write>(mut out: W, keypoints: &[Keypoint]) -> std::io::Result<()> {
    writeln!(out, "octave,interval,x,y,response,theta")?;
    for kp in keypoints {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            kp.octave, kp.interval, kp.x, kp.y, kp.response, kp.orientation
        )?;
    }
    Ok(())
}
