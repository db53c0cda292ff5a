//! Row-major 2D arrays of `f64` and the separable filtering used across the
//! pipeline.

use crate::error::{Error, Result};

/// A dense row-major array of real values.
///
/// Gradients, response maps and intermediate products all live in a
/// `Plane`; images are planes whose values sit on the [0, 255] scale (see
/// [`GrayImage`]).
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// A grayscale image: a [`Plane`] of intensities on the [0, 255] scale.
pub type GrayImage = Plane;

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "plane dimensions must be positive");
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "plane dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel access with replicated borders.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    /// Bilinear sample at a real-valued position. Coordinates are clamped to
    /// the pixel-center extent of the plane.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise combination of two planes of equal size.
    pub fn zip_map(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        assert_eq!(self.dims(), other.dims(), "plane dimensions differ");
        Plane {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute element-wise difference.
    pub fn max_abs_diff(&self, other: &Plane) -> f64 {
        assert_eq!(self.dims(), other.dims(), "plane dimensions differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Copy of the plane rotated by 90 degrees clockwise in image
    /// coordinates (x right, y down).
    pub fn rotate90(&self) -> Plane {
        let (w, h) = self.dims();
        Plane::from_fn(h, w, |x, y| self.get(y, h - 1 - x))
    }

    /// Copy of the plane rotated by 180 degrees.
    pub fn rotate180(&self) -> Plane {
        let (w, h) = self.dims();
        Plane::from_fn(w, h, |x, y| self.get(w - 1 - x, h - 1 - y))
    }

    /// Separable convolution with an odd-length symmetric kernel, replicating
    /// edge pixels.
    pub fn convolve_separable(&self, kernel: &[f64]) -> Plane {
        assert!(kernel.len() % 2 == 1, "kernel length must be odd");
        let r = (kernel.len() / 2) as isize;
        let (w, h) = self.dims();

        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            let row = &self.data[y * w..(y + 1) * w];
            for x in 0..w {
                let c = row[x];
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    let sx = (x as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                    acc += kv * (row[sx] - c);
                }
                tmp[y * w + x] = c + acc;
            }
        }

        // Offsets are taken from the center sample so that constant regions
        // come out bit-identical.
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            let center = &tmp[y * w..(y + 1) * w];
            for (k, &kv) in kernel.iter().enumerate() {
                let sy = (y as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
                let src = &tmp[sy * w..(sy + 1) * w];
                let dst = &mut out[y * w..(y + 1) * w];
                for ((d, s), c) in dst.iter_mut().zip(src).zip(center) {
                    *d += kv * (s - c);
                }
            }
            for (d, c) in out[y * w..(y + 1) * w].iter_mut().zip(center) {
                *d += c;
            }
        }

        Plane {
            width: w,
            height: h,
            data: out,
        }
    }
}

/// Sampled Gaussian of the given odd length, normalized to unit sum.
pub fn gaussian_window(len: usize, sigma: f64) -> Vec<f64> {
    debug_assert!(len % 2 == 1 && sigma > 0.0);
    let r = (len / 2) as isize;
    let denom = 2.0 * sigma * sigma;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Gaussian kernel truncated at radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    gaussian_window(2 * radius + 1, sigma)
}

/// Snaps values within 1e-9 of an integer onto it, so that sampling offsets
/// produced by `cos`/`sin` of multiples of pi/2 land exactly on the lattice.
#[inline]
pub(crate) fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_bad_input() {
        assert!(matches!(Plane::new(0, 3, vec![]), Err(Error::EmptyImage)));
        assert!(Plane::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Plane::new(1, 1, vec![f64::NAN]).is_err());
        assert!(Plane::new(1, 2, vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn bilinear_reproduces_lattice_and_midpoints() {
        let p = Plane::from_fn(4, 3, |x, y| (x + 10 * y) as f64);
        assert_eq!(p.sample_bilinear(2.0, 1.0), 12.0);
        assert!((p.sample_bilinear(1.5, 0.5) - 6.5).abs() < 1e-12);
        // clamped outside
        assert_eq!(p.sample_bilinear(-3.0, -1.0), 0.0);
        assert_eq!(p.sample_bilinear(10.0, 10.0), 23.0);
    }

    #[test]
    fn rotations_compose() {
        let p = Plane::from_fn(5, 3, |x, y| (x * 7 + y * 3) as f64);
        let r4 = p.rotate90().rotate90().rotate90().rotate90();
        assert_eq!(p, r4);
        assert_eq!(p.rotate90().rotate90(), p.rotate180());
    }

    #[test]
    fn gaussian_kernel_is_normalized_and_sized() {
        let k = gaussian_kernel(1.0);
        assert_eq!(k.len(), 7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(gaussian_kernel(0.5).len(), 5);
    }
}
