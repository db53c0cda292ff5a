//! Composite keypoint descriptor: uniform LBP histogram, rotation-invariant
//! uniform LBP histogram, DCT coefficients and singular values of the
//! oriented 4x4 patch.

pub mod lbp;
pub mod transform;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use lbp::{is_uniform, lbp_code, riu2_bin, transitions, u2_bin, U2_BINS};
pub use transform::{dct_features, svd_features};

use crate::error::{Error, Result};
use crate::harris::Keypoint;
use crate::matcher::map_to_original;
use crate::orient::{oriented_grid, sample_oriented_patch};
use crate::plane::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbpParams {
    pub points: u32,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescriptorConfig {
    /// Uniform (u2) operator; only 8 sampling points are supported.
    pub lbp1: LbpParams,
    /// Rotation-invariant uniform (riu2) operator; 12 or 16 points.
    pub lbp2: LbpParams,
    pub normalize_blocks: bool,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            lbp1: LbpParams {
                points: 8,
                radius: 1.0,
            },
            lbp2: LbpParams {
                points: 12,
                radius: 2.0,
            },
            normalize_blocks: true,
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lbp1.points != 8 {
            return Err(Error::param("u2 operator requires 8 sampling points"));
        }
        if !matches!(self.lbp2.points, 12 | 16) {
            return Err(Error::param(
                "riu2 operator supports 12 or 16 sampling points",
            ));
        }
        for r in [self.lbp1.radius, self.lbp2.radius] {
            if !(r > 0.0 && r <= 4.0) {
                return Err(Error::param(format!("lbp radius {r} outside (0, 4]")));
            }
        }
        Ok(())
    }

    /// Total descriptor length: 59 + (P + 2) + 16 + 4.
    pub fn descriptor_len(&self) -> usize {
        U2_BINS + self.lbp2.points as usize + 2 + 16 + 4
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Descriptor {
    /// Keypoint position in original-image pixels.
    pub x: f64,
    pub y: f64,
    pub octave: usize,
    pub interval: usize,
    /// u2 histogram, 59 bins.
    pub v1: Vec<f64>,
    /// riu2 histogram, P + 2 bins.
    pub v2: Vec<f64>,
    pub v3: [f64; 16],
    pub v4: [f64; 4],
}

impl Descriptor {
    pub fn blocks(&self) -> [&[f64]; 4] {
        [&self.v1, &self.v2, &self.v3, &self.v4]
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    /// Euclidean distance per block.
    pub fn block_distances(&self, other: &Descriptor) -> [f64; 4] {
        let a = self.blocks();
        let b = other.blocks();
        std::array::from_fn(|i| euclidean(a[i], b[i]))
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn normalize(block: &mut [f64]) {
    let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        block.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Unnormalized histograms of LBP codes over the oriented grid.
pub fn lbp_histograms(
    level: &GrayImage,
    kp: &Keypoint,
    cfg: &DescriptorConfig,
) -> (Vec<f64>, Vec<f64>) {
    let mut v1 = vec![0.0; U2_BINS];
    let mut v2 = vec![0.0; cfg.lbp2.points as usize + 2];
    for (cx, cy) in oriented_grid(kp.x, kp.y, kp.orientation) {
        let c1 = lbp_code(
            level,
            cx,
            cy,
            cfg.lbp1.points,
            cfg.lbp1.radius,
            kp.orientation,
        );
        v1[u2_bin(c1)] += 1.0;
        let c2 = lbp_code(
            level,
            cx,
            cy,
            cfg.lbp2.points,
            cfg.lbp2.radius,
            kp.orientation,
        );
        v2[riu2_bin(c2, cfg.lbp2.points)] += 1.0;
    }
    (v1, v2)
}

/// Descriptor of an oriented keypoint on its own pyramid level. `beta` is
/// the pyramid sampling factor, used to place the keypoint in the original
/// image frame.
pub fn build_descriptor(
    level: &GrayImage,
    kp: &Keypoint,
    cfg: &DescriptorConfig,
    beta: f64,
) -> Descriptor {
    let (mut v1, mut v2) = lbp_histograms(level, kp, cfg);
    let patch = sample_oriented_patch(level, kp);
    let mut v3 = dct_features(&patch);
    let mut v4 = svd_features(&patch);
    if cfg.normalize_blocks {
        normalize(&mut v1);
        normalize(&mut v2);
        normalize(&mut v3);
        normalize(&mut v4);
    }
    let (x, y) = map_to_original(kp, beta);
    Descriptor {
        x,
        y,
        octave: kp.octave,
        interval: kp.interval,
        v1,
        v2,
        v3,
        v4,
    }
}

/// CSV rows `X,Y,<values>` with a header naming every column.
pub fn write_descriptors_csv<W: Write>(mut out: W, descs: &[Descriptor]) -> std::io::Result<()> {
    if let Some(first) = descs.first() {
        write!(out, "X,Y")?;
        for i in 0..first.len() {
            write!(out, ",f{i}")?;
        }
        writeln!(out)?;
    }
    for d in descs {
        write!(out, "{},{}", d.x, d.y)?;
        for v in d.to_vec() {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::Plane;

    fn textured(w: usize, h: usize) -> Plane {
        Plane::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            128.0
                + 50.0 * (0.37 * x + 0.11 * y).sin()
                + 40.0 * (0.23 * y - 0.05 * x * x / 30.0).cos()
        })
    }

    fn kp(x: f64, y: f64, theta: f64) -> Keypoint {
        Keypoint {
            x,
            y,
            octave: 1,
            interval: 1,
            response: 1.0,
            orientation: theta,
        }
    }

    #[test]
    fn default_length_is_93() {
        let cfg = DescriptorConfig::default();
        assert_eq!(cfg.descriptor_len(), 93);
        let d = build_descriptor(&textured(32, 32), &kp(15.0, 16.0, 0.4), &cfg, 1.25);
        assert_eq!(d.len(), 93);
        assert_eq!(d.v2.len(), 14);
    }

    #[test]
    fn p16_gives_97() {
        let mut cfg = DescriptorConfig::default();
        cfg.lbp2.points = 16;
        assert!(cfg.validate().is_ok());
        let d = build_descriptor(&textured(32, 32), &kp(15.0, 16.0, 0.4), &cfg, 1.25);
        assert_eq!(d.len(), 97);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = DescriptorConfig::default();
        cfg.lbp2.points = 14;
        assert!(cfg.validate().is_err());
        let mut cfg = DescriptorConfig::default();
        cfg.lbp1.points = 16;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn histogram_mass_is_sixteen() {
        let (v1, v2) = lbp_histograms(
            &textured(40, 40),
            &kp(20.0, 19.0, 2.0),
            &DescriptorConfig::default(),
        );
        assert_eq!(v1.iter().sum::<f64>(), 16.0);
        assert_eq!(v2.iter().sum::<f64>(), 16.0);
    }

    #[test]
    fn blocks_are_unit_norm_and_sv_sorted() {
        let d = build_descriptor(
            &textured(40, 40),
            &kp(20.0, 19.0, 2.0),
            &DescriptorConfig::default(),
            1.25,
        );
        for b in d.blocks() {
            let n = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert!(d.v4.windows(2).all(|w| w[0] >= w[1]));
        assert!(d.v4.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn keypoint_ref_is_in_original_frame() {
        let mut k = kp(10.0, 12.0, 0.0);
        k.octave = 3;
        let d = build_descriptor(&textured(40, 40), &k, &DescriptorConfig::default(), 1.25);
        assert!((d.x - 15.625).abs() < 1e-12);
        assert!((d.y - 18.75).abs() < 1e-12);
    }
}
