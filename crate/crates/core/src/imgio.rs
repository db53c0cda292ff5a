//! Image decoding and encoding, luminance conversion and the perturbation
//! operators used by the robustness experiments.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader, Limits};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::{gaussian_window, GrayImage, Plane};

/// Decoder allocation cap. Guards against headers announcing absurd sizes.
const MAX_DECODE_ALLOC: u64 = 256 * 1024 * 1024;

/// ITU-R BT.601 luma.
#[inline]
pub fn luminance(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Decodes PNG, JPEG, PGM/PPM or TIFF bytes into a grayscale image.
///
/// The format is detected from the content, not from a file name.
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    let mut reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::Decode(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Jpeg | ImageFormat::Pnm | ImageFormat::Tiff) => {}
        _ => return Err(Error::UnsupportedFormat),
    }
    let mut limits = Limits::default();
    limits.max_alloc = Some(MAX_DECODE_ALLOC);
    reader.limits(limits);
    let dynamic = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(_) => Error::UnsupportedFormat,
        other => Error::Decode(other.to_string()),
    })?;
    to_gray(&dynamic)
}

/// Converts any decoded image to luminance on the [0, 255] scale.
pub fn to_gray(img: &DynamicImage) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::EmptyImage);
    }
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.as_raw().iter().map(|&v| v as f64).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0] as f64).collect(),
        DynamicImage::ImageLuma16(buf) => buf.as_raw().iter().map(|&v| v as f64 / 257.0).collect(),
        DynamicImage::ImageLumaA16(buf) => buf.pixels().map(|p| p.0[0] as f64 / 257.0).collect(),
        DynamicImage::ImageRgb8(buf) => buf
            .pixels()
            .map(|p| luminance(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64))
            .collect(),
        DynamicImage::ImageRgba8(buf) => buf
            .pixels()
            .map(|p| luminance(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64))
            .collect(),
        other => other
            .to_rgb32f()
            .pixels()
            .map(|p| {
                let c = |v: f32| (v as f64).clamp(0.0, 1.0) * 255.0;
                luminance(c(p.0[0]), c(p.0[1]), c(p.0[2]))
            })
            .collect(),
    };
    Plane::new(w, h, data)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Quantizes to 8 bits (round, clamp) for encoding.
pub fn to_luma8(img: &GrayImage) -> image::GrayImage {
    let (w, h) = img.dims();
    let raw = img
        .data()
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    image::GrayImage::from_raw(w as u32, h as u32, raw).expect("buffer length matches dimensions")
}

/// Writes PNG or binary PGM, chosen by the file extension.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => ImageFormat::Png,
        Some("pgm") => ImageFormat::Pnm,
        _ => return Err(Error::UnsupportedFormat),
    };
    let bytes = encode_image(img, format)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn encode_image(img: &GrayImage, format: ImageFormat) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    let buf = to_luma8(img);
    match format {
        ImageFormat::Pnm => {
            let enc = image::codecs::pnm::PnmEncoder::new(&mut out).with_subtype(
                image::codecs::pnm::PnmSubtype::Graymap(image::codecs::pnm::SampleEncoding::Binary),
            );
            buf.write_with_encoder(enc)
        }
        other => buf.write_to(&mut out, other),
    }
    .map_err(|e| Error::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

/// Baseline JPEG encode at `quality`, then decode back.
pub fn jpeg_roundtrip(img: &GrayImage, quality: u8) -> Result<GrayImage> {
    if !(1..=100).contains(&quality) {
        return Err(Error::param(format!(
            "jpeg quality {quality} outside [1, 100]"
        )));
    }
    let mut out = Cursor::new(Vec::new());
    let enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, quality);
    to_luma8(img)
        .write_with_encoder(enc)
        .map_err(|e| Error::Encode(e.to_string()))?;
    decode_image(out.get_ref())
}

/// Peak signal-to-noise ratio in dB for 8-bit peak 255.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> f64 {
    assert_eq!(a.dims(), b.dims());
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}

/// Post-processing operation applied before detection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Perturbation {
    /// Gaussian blur with an explicit odd window size.
    Blur { window: usize, sigma: f64 },
    /// Additive Gaussian noise; variance in squared gray levels.
    Noise { mean: f64, variance: f64 },
    /// JPEG compression round-trip.
    Jpeg { quality: u8 },
}

impl Perturbation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Perturbation::Blur { window, sigma } => {
                if window % 2 == 0 {
                    return Err(Error::param(format!("blur window {window} must be odd")));
                }
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::param(format!("blur sigma {sigma} must be positive")));
                }
            }
            Perturbation::Noise { mean, variance } => {
                if !mean.is_finite() || !(variance >= 0.0 && variance.is_finite()) {
                    return Err(Error::param(format!(
                        "noise mean {mean} / variance {variance} invalid"
                    )));
                }
            }
            Perturbation::Jpeg { quality } => {
                if !(1..=100).contains(&quality) {
                    return Err(Error::param(format!(
                        "jpeg quality {quality} outside [1, 100]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn op_name(&self) -> &'static str {
        match self {
            Perturbation::Blur { .. } => "blur",
            Perturbation::Noise { .. } => "noise",
            Perturbation::Jpeg { .. } => "jpeg",
        }
    }

    /// The swept parameter: sigma, variance or quality.
    pub fn param(&self) -> f64 {
        match *self {
            Perturbation::Blur { sigma, .. } => sigma,
            Perturbation::Noise { variance, .. } => variance,
            Perturbation::Jpeg { quality } => quality as f64,
        }
    }

    /// The 3x3 post-processing grid: blur sigma 0.5/1/2 at window 3, noise
    /// variance 1/3/5, JPEG quality 80/60/40.
    pub fn default_grid() -> Vec<Perturbation> {
        let mut grid = Vec::with_capacity(9);
        for sigma in [0.5, 1.0, 2.0] {
            grid.push(Perturbation::Blur { window: 3, sigma });
        }
        for variance in [1.0, 3.0, 5.0] {
            grid.push(Perturbation::Noise {
                mean: 0.0,
                variance,
            });
        }
        for quality in [80, 60, 40] {
            grid.push(Perturbation::Jpeg { quality });
        }
        grid
    }
}

/// Applies a perturbation. Deterministic for a fixed `seed`.
pub fn perturb(img: &GrayImage, op: &Perturbation, seed: u64) -> Result<GrayImage> {
    op.validate()?;
    match *op {
        Perturbation::Blur { window, sigma } => {
            Ok(img.convolve_separable(&gaussian_window(window, sigma)))
        }
        Perturbation::Noise { mean, variance } => {
            let normal = Normal::new(mean, variance.sqrt())
                .map_err(|e| Error::param(format!("noise distribution: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = img.clone();
            for v in out.data_mut() {
                *v = (*v + normal.sample(&mut rng)).clamp(0.0, 255.0);
            }
            Ok(out)
        }
        Perturbation::Jpeg { quality } => jpeg_roundtrip(img, quality),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgm(w: usize, h: usize, value: u8) -> Vec<u8> {
        let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
        bytes.extend(std::iter::repeat_n(value, w * h));
        bytes
    }

    fn rgb_png(pixel: [u8; 3]) -> Vec<u8> {
        let img = image::RgbImage::from_pixel(2, 2, image::Rgb(pixel));
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        out.into_inner()
    }

    #[test]
    fn constant_pgm_decodes_to_128() {
        let img = decode_image(&pgm(5, 4, 128)).unwrap();
        assert_eq!(img.dims(), (5, 4));
        assert!(img.data().iter().all(|&v| v == 128.0));
    }

    #[test]
    fn luminance_of_white_and_red() {
        let white = decode_image(&rgb_png([255, 255, 255])).unwrap();
        assert!((white.get(0, 0) - 255.0).abs() < 1e-9);
        let red = decode_image(&rgb_png([255, 0, 0])).unwrap();
        assert!((red.get(1, 1) - 76.245).abs() < 1e-9);
    }

    #[test]
    fn rejects_garbage_and_unsupported() {
        assert!(decode_image(b"definitely not an image").is_err());
        // GIF magic: recognized by the guesser but not accepted here.
        assert!(matches!(
            decode_image(b"GIF89a\x01\x00\x01\x00\x00\x00\x00"),
            Err(Error::UnsupportedFormat)
        ));
        assert!(decode_image(b"P5\n0 4\n255\n").is_err());
    }

    #[test]
    fn save_and_reload_pgm_and_png() {
        let dir = tempfile::tempdir().unwrap();
        let img = Plane::from_fn(17, 9, |x, y| ((x * 13 + y * 7) % 256) as f64);
        for name in ["a.pgm", "a.png"] {
            let p = dir.path().join(name);
            save_image(&img, &p).unwrap();
            assert_eq!(load_image(&p).unwrap(), img);
        }
        assert!(save_image(&img, dir.path().join("a.bmp")).is_err());
        assert!(matches!(
            load_image(dir.path().join("missing.png")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn zero_variance_noise_is_identity() {
        let img = Plane::from_fn(20, 20, |x, y| ((x * y) % 256) as f64);
        let out = perturb(
            &img,
            &Perturbation::Noise {
                mean: 0.0,
                variance: 0.0,
            },
            7,
        )
        .unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn noise_is_seeded() {
        let img = Plane::filled(16, 16, 100.0);
        let op = Perturbation::Noise {
            mean: 0.0,
            variance: 5.0,
        };
        let a = perturb(&img, &op, 1).unwrap();
        assert_eq!(a, perturb(&img, &op, 1).unwrap());
        assert_ne!(a, perturb(&img, &op, 2).unwrap());
        assert!(a.data().iter().all(|v| (0.0..=255.0).contains(v)));
    }

    #[test]
    fn blur_keeps_constant_image() {
        let img = Plane::filled(16, 16, 77.0);
        let out = perturb(
            &img,
            &Perturbation::Blur {
                window: 3,
                sigma: 0.5,
            },
            0,
        )
        .unwrap();
        assert!(out.max_abs_diff(&img) < 1e-12);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let img = Plane::filled(16, 16, 1.0);
        for op in [
            Perturbation::Blur {
                window: 4,
                sigma: 1.0,
            },
            Perturbation::Blur {
                window: 3,
                sigma: 0.0,
            },
            Perturbation::Noise {
                mean: 0.0,
                variance: -1.0,
            },
            Perturbation::Jpeg { quality: 0 },
            Perturbation::Jpeg { quality: 101 },
        ] {
            assert!(
                matches!(perturb(&img, &op, 0), Err(Error::InvalidParameter(_))),
                "{op:?}"
            );
        }
    }

    #[test]
    fn default_grid_has_nine_cells() {
        let grid = Perturbation::default_grid();
        assert_eq!(grid.len(), 9);
        assert_eq!(grid.iter().filter(|p| p.op_name() == "jpeg").count(), 3);
    }

    #[test]
    fn perturbation_json_shape() {
        let json = serde_json::to_string(&Perturbation::Jpeg { quality: 60 }).unwrap();
        assert_eq!(json, r#"{"op":"jpeg","quality":60}"#);
        let back: Perturbation =
            serde_json::from_str(r#"{"op":"blur","window":3,"sigma":1.0}"#).unwrap();
        assert_eq!(
            back,
            Perturbation::Blur {
                window: 3,
                sigma: 1.0
            }
        );
    }
}
