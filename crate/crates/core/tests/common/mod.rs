#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Matrix4, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shfd::harris::{harris_response, second_moments, HarrisConfig};
use shfd::orient::Patch;
use shfd::{MatchPair, Plane};

pub fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Plane {
    Plane::from_fn(w, h, |_, _| rng.random::<f64>() * 255.0)
}

pub fn random_patch(rng: &mut ChaCha8Rng) -> Patch {
    let mut p = [[0.0; 4]; 4];
    for row in p.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.random::<f64>() * 255.0 - 100.0;
        }
    }
    p
}

/// Eigenvalues of the symmetric 2x2 matrix [[a, c], [c, b]].
pub fn eig2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mid = (a + b) / 2.0;
    let rad = (((a - b) / 2.0).powi(2) + c * c).sqrt();
    (mid + rad, mid - rad)
}

pub fn max_rel_harris_error(img: &Plane, cfg: &HarrisConfig) -> f64 {
    let cr = harris_response(img, cfg);
    let (sxx, syy, sxy) = second_moments(img, cfg.window_sigma);
    let mut worst: f64 = 0.0;
    for i in 0..cr.data().len() {
        let (l1, l2) = eig2(sxx.data()[i], syy.data()[i], sxy.data()[i]);
        let oracle = l1 * l2 - cfg.k * (l1 + l2).powi(2);
        // Both terms are bounded by (l1 + l2)^2, the natural magnitude here.
        let scale = (l1 + l2).powi(2).max(oracle.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max((cr.data()[i] - oracle).abs() / scale);
    }
    worst
}

pub fn dct_oracle(p: &Patch) -> [f64; 16] {
    let alpha = |k: usize| if k == 0 { 0.5 } else { (0.5f64).sqrt() };
    let mut out = [0.0; 16];
    for u in 0..4 {
        for v in 0..4 {
            let mut s = 0.0;
            for (m, row) in p.iter().enumerate() {
                for (n, &x) in row.iter().enumerate() {
                    s += x
                        * ((2 * m + 1) as f64 * u as f64 * PI / 8.0).cos()
                        * ((2 * n + 1) as f64 * v as f64 * PI / 8.0).cos();
                }
            }
            out[u * 4 + v] = alpha(u) * alpha(v) * s;
        }
    }
    out
}

pub fn svd_oracle(p: &Patch) -> [f64; 4] {
    let a = Matrix4::from_fn(|r, c| p[r][c]);
    let eig = SymmetricEigen::new(a.transpose() * a);
    let mut s: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    [s[0], s[1], s[2], s[3]]
}

/// Straightforward LBP at an integer center with theta = 0.
pub fn lbp_oracle(img: &Plane, cx: usize, cy: usize, p: u32, r: f64) -> u32 {
    let px = |x: isize, y: isize| img.get_clamped(x, y);
    let center = px(cx as isize, cy as isize);
    let mut code = 0;
    for k in 0..p {
        let phi = 2.0 * PI * k as f64 / p as f64;
        let mut x = cx as f64 + r * phi.cos();
        let mut y = cy as f64 + r * phi.sin();
        // offsets that are integral up to rounding land on the lattice
        if (x - x.round()).abs() < 1e-9 {
            x = x.round();
        }
        if (y - y.round()).abs() < 1e-9 {
            y = y.round();
        }
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (xi, yi) = (x0 as isize, y0 as isize);
        let v = px(xi, yi) * (1.0 - fx) * (1.0 - fy)
            + px(xi + 1, yi) * fx * (1.0 - fy)
            + px(xi, yi + 1) * (1.0 - fx) * fy
            + px(xi + 1, yi + 1) * fx * fy;
        if v >= center {
            code |= 1 << k;
        }
    }
    code
}

pub fn rotl(code: u32, by: u32, p: u32) -> u32 {
    let mask = (1u32 << p) - 1;
    ((code << by) | (code >> (p - by))) & mask
}

pub fn planted(seed: u64, shift: [f64; 2]) -> (Vec<MatchPair>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for _ in 0..14 {
        let a = [rng.random_range(20.0..300.0), rng.random_range(20.0..300.0)];
        pairs.push(MatchPair {
            a,
            b: [a[0] + shift[0], a[1] + shift[1]],
            block_distances: [0.1; 4],
        });
    }
    for _ in 0..6 {
        let a = [rng.random_range(0.0..250.0), rng.random_range(0.0..500.0)];
        let b = [rng.random_range(260.0..500.0), rng.random_range(0.0..500.0)];
        pairs.push(MatchPair {
            a,
            b,
            block_distances: [0.1; 4],
        });
    }
    // interleave so the planted pairs are not a prefix
    let mut order: Vec<usize> = (0..20).collect();
    for i in (1..20).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let shuffled: Vec<MatchPair> = order.iter().map(|&i| pairs[i].clone()).collect();
    let mut inliers: Vec<usize> = (0..20).filter(|&j| order[j] < 14).collect();
    inliers.sort();
    (shuffled, inliers)
}
