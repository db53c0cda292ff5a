//! Match visualization: inlier pairs drawn over the grayscale image.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::imgio::to_luma8;
use crate::matcher::MatchPair;
use crate::plane::GrayImage;

const LINE: Rgb<u8> = Rgb([255, 0, 0]);
const SOURCE: Rgb<u8> = Rgb([0, 200, 0]);
const TARGET: Rgb<u8> = Rgb([0, 64, 255]);

fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

/// Bresenham.
fn draw_line(img: &mut RgbImage, from: [f64; 2], to: [f64; 2], color: Rgb<u8>) {
    let (mut x0, mut y0) = (from[0].round() as i64, from[1].round() as i64);
    let (x1, y1) = (to[0].round() as i64, to[1].round() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put(img, x0, y0, color);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

fn draw_dot(img: &mut RgbImage, p: [f64; 2], color: Rgb<u8>) {
    let (cx, cy) = (p[0].round() as i64, p[1].round() as i64);
    for dy in -2..=2 {
        for dx in -2..=2 {
            if dx * dx + dy * dy <= 4 {
                put(img, cx + dx, cy + dy, color);
            }
        }
    }
}

/// Red lines between matched points; `a` endpoints green, `b` endpoints blue.
pub fn render_matches(img: &GrayImage, pairs: &[MatchPair]) -> RgbImage {
    let gray = to_luma8(img);
    let mut out = RgbImage::from_fn(gray.width(), gray.height(), |x, y| {
        let v = gray.get_pixel(x, y).0[0];
        Rgb([v, v, v])
    });
    for p in pairs {
        draw_line(&mut out, p.a, p.b, LINE);
    }
    for p in pairs {
        draw_dot(&mut out, p.a, SOURCE);
        draw_dot(&mut out, p.b, TARGET);
    }
    out
}

pub fn save_overlay(img: &GrayImage, pairs: &[MatchPair], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    render_matches(img, pairs)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Encode(other.to_string()),
        })
}
