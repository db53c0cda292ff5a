//! Local binary patterns sampled on a circle in the keypoint's oriented frame.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use crate::orient::rotate_offset;
use crate::plane::GrayImage;

/// Number of histogram bins of the 8-neighbor uniform mapping.
pub const U2_BINS: usize = 59;

/// Circular 0/1 transitions in the low `p` bits of `code`.
pub fn transitions(code: u32, p: u32) -> u32 {
    let mask = if p >= 32 { u32::MAX } else { (1u32 << p) - 1 };
    let code = code & mask;
    let rotated = ((code >> 1) | ((code & 1) << (p - 1))) & mask;
    (code ^ rotated).count_ones()
}

#[inline]
pub fn is_uniform(code: u32, p: u32) -> bool {
    transitions(code, p) <= 2
}

/// LBP code at a real-valued center. Neighbor `p` sits at angle
/// `theta + 2 pi p / P` on a circle of radius `radius`; bit `p` is set when
/// the neighbor is at least as bright as the center. All samples are
/// bilinear and clamped to the image.
pub fn lbp_code(level: &GrayImage, cx: f64, cy: f64, p: u32, radius: f64, theta: f64) -> u32 {
    debug_assert!((1..=31).contains(&p));
    let center = level.sample_bilinear(cx, cy);
    let mut code = 0u32;
    for bit in 0..p {
        let phi = theta + TAU * bit as f64 / p as f64;
        let (dx, dy) = rotate_offset(radius, 0.0, phi);
        if level.sample_bilinear(cx + dx, cy + dy) >= center {
            code |= 1 << bit;
        }
    }
    code
}

fn u2_table() -> &'static [u8; 256] {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [(U2_BINS - 1) as u8; 256];
        let mut next = 0u8;
        for code in 0..256u32 {
            if is_uniform(code, 8) {
                table[code as usize] = next;
                next += 1;
            }
        }
        debug_assert_eq!(next as usize, U2_BINS - 1);
        table
    })
}

/// Uniform-pattern bin for P = 8: the 58 uniform codes in increasing code
/// order take bins 0..=57, everything else bin 58.
pub fn u2_bin(code: u32) -> usize {
    assert!(code < 256, "u2 mapping is defined for 8-bit codes");
    u2_table()[code as usize] as usize
}

/// Rotation-invariant uniform bin: popcount for uniform codes, `P + 1`
/// otherwise.
pub fn riu2_bin(code: u32, p: u32) -> usize {
    if is_uniform(code, p) {
        code.count_ones() as usize
    } else {
        p as usize + 1
    }
}
