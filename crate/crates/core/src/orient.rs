//! Dominant gradient orientation per keypoint and rotated patch sampling.

use std::f64::consts::TAU;

use crate::harris::{gradients, Keypoint};
use crate::plane::{snap, GrayImage, Plane};

pub const ORIENTATION_BINS: usize = 10;
pub const DEFAULT_ORIENTATION_RADIUS: usize = 4;

/// Grid offsets of the 4x4 sampling grid, centered on the keypoint.
pub const PATCH_OFFSETS: [f64; 4] = [-1.5, -0.5, 0.5, 1.5];

pub type Patch = [[f64; 4]; 4];

/// Gradient magnitude and direction planes of one level.
#[derive(Clone, Debug)]
pub struct PolarGradients {
    pub magnitude: Plane,
    /// Radians in [0, 2pi); zero where the magnitude is zero.
    pub angle: Plane,
}

/// Maps any angle into [0, 2pi).
#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

pub fn gradient_polar(level: &GrayImage) -> PolarGradients {
    let (dx, dy) = gradients(level);
    let magnitude = dx.zip_map(&dy, |a, b| a.hypot(b));
    let angle = dx.zip_map(&dy, |a, b| {
        if a == 0.0 && b == 0.0 {
            0.0
        } else {
            wrap_angle(b.atan2(a))
        }
    });
    PolarGradients { magnitude, angle }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OrientationHistogram {
    pub bins: [f64; ORIENTATION_BINS],
}

impl OrientationHistogram {
    pub const BIN_WIDTH: f64 = TAU / ORIENTATION_BINS as f64;

    pub fn bin_of(theta: f64) -> usize {
        ((wrap_angle(theta) / Self::BIN_WIDTH).floor() as usize) % ORIENTATION_BINS
    }

    pub fn bin_center(bin: usize) -> f64 {
        (bin as f64 + 0.5) * Self::BIN_WIDTH
    }

    pub fn add(&mut self, theta: f64, magnitude: f64) {
        self.bins[Self::bin_of(theta)] += magnitude;
    }

    pub fn mass(&self) -> f64 {
        self.bins.iter().sum()
    }

    /// Center of the heaviest bin, lowest index on ties; 0 when empty.
    pub fn dominant(&self) -> f64 {
        let mut best = 0;
        for (i, &v) in self.bins.iter().enumerate() {
            if v > self.bins[best] {
                best = i;
            }
        }
        if self.bins[best] > 0.0 {
            Self::bin_center(best)
        } else {
            0.0
        }
    }
}

/// Magnitude-weighted histogram over the `(2 radius + 1)^2` window.
pub fn orientation_histogram(
    x: f64,
    y: f64,
    grads: &PolarGradients,
    radius: usize,
) -> OrientationHistogram {
    let cx = x.round() as isize;
    let cy = y.round() as isize;
    let r = radius as isize;
    let mut hist = OrientationHistogram::default();
    for dy in -r..=r {
        for dx in -r..=r {
            let m = grads.magnitude.get_clamped(cx + dx, cy + dy);
            if m > 0.0 {
                hist.add(grads.angle.get_clamped(cx + dx, cy + dy), m);
            }
        }
    }
    hist
}

pub fn assign_orientation(kp: &Keypoint, grads: &PolarGradients, radius: usize) -> Keypoint {
    Keypoint {
        orientation: orientation_histogram(kp.x, kp.y, grads, radius).dominant(),
        ..*kp
    }
}

/// Rotates the grid offset `(u, v)` by `theta`.
#[inline]
pub fn rotate_offset(u: f64, v: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (snap(c * u - s * v), snap(s * u + c * v))
}

/// Sample positions of the oriented 4x4 grid, row-major (rows follow v).
pub fn oriented_grid(x: f64, y: f64, theta: f64) -> [(f64, f64); 16] {
    let mut out = [(0.0, 0.0); 16];
    for (r, &v) in PATCH_OFFSETS.iter().enumerate() {
        for (c, &u) in PATCH_OFFSETS.iter().enumerate() {
            let (du, dv) = rotate_offset(u, v, theta);
            out[r * 4 + c] = (x + du, y + dv);
        }
    }
    out
}

pub fn sample_oriented_patch(level: &GrayImage, kp: &Keypoint) -> Patch {
    let grid = oriented_grid(kp.x, kp.y, kp.orientation);
    let mut patch = [[0.0; 4]; 4];
    for (i, &(sx, sy)) in grid.iter().enumerate() {
        patch[i / 4][i % 4] = level.sample_bilinear(sx, sy);
    }
    patch
}
