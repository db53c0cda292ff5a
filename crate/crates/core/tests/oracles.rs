mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{
    dct_oracle, lbp_oracle, max_rel_harris_error, random_patch, random_plane, rotl, svd_oracle,
};
use shfd::descriptor::lbp::{is_uniform, lbp_code, riu2_bin, u2_bin, U2_BINS};
use shfd::descriptor::transform::{dct_features, svd_features};
use shfd::harris::HarrisConfig;
use shfd::Plane;

#[test]
fn harris_matches_eigenvalue_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = HarrisConfig::default();
    for _ in 0..10 {
        let img = random_plane(&mut rng, 32, 32);
        let err = max_rel_harris_error(&img, &cfg);
        assert!(err < 1e-9, "relative error {err}");
    }
}

#[test]
fn dct_matches_basis_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let p = random_patch(&mut rng);
        let got = dct_features(&p);
        let want = dct_oracle(&p);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }
}

#[test]
fn dct_constant_and_parseval() {
    let c = 7.25;
    let out = dct_features(&[[c; 4]; 4]);
    assert!((out[0] - 4.0 * c).abs() < 1e-12);
    assert!(out[1..].iter().all(|v| v.abs() < 1e-12));

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = random_patch(&mut rng);
    let energy: f64 = p.iter().flatten().map(|v| v * v).sum();
    let coeff: f64 = dct_features(&p).iter().map(|v| v * v).sum();
    assert!((energy - coeff).abs() < 1e-9 * energy);
}

#[test]
fn svd_matches_eigen_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..200 {
        let p = random_patch(&mut rng);
        let got = svd_features(&p);
        let want = svd_oracle(&p);
        let scale = want[0].max(1.0);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9 * scale, "{got:?} vs {want:?}");
        }
        assert!(got.windows(2).all(|w| w[0] >= w[1]));
        assert!(got.iter().all(|v| *v >= 0.0));
    }
    let mut id = [[0.0; 4]; 4];
    for (i, row) in id.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for v in svd_features(&id) {
        assert!((v - 1.0).abs() < 1e-12);
    }
}

#[test]
fn lbp_matches_naive_oracle_on_lattice() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..20 {
        let img = random_plane(&mut rng, 8, 8);
        for y in 1..7 {
            for x in 1..7 {
                assert_eq!(
                    lbp_code(&img, x as f64, y as f64, 8, 1.0, 0.0),
                    lbp_oracle(&img, x, y, 8, 1.0),
                    "center ({x}, {y})"
                );
            }
        }
    }
    let img = random_plane(&mut rng, 12, 12);
    for y in 3..9 {
        for x in 3..9 {
            assert_eq!(
                lbp_code(&img, x as f64, y as f64, 12, 2.0, 0.0),
                lbp_oracle(&img, x, y, 12, 2.0)
            );
        }
    }
}

#[test]
fn lbp_tie_and_extreme_codes() {
    let flat = Plane::filled(5, 5, 42.0);
    assert_eq!(lbp_code(&flat, 2.0, 2.0, 8, 1.0, 0.3), 255);
    let peak = Plane::from_fn(5, 5, |x, y| if (x, y) == (2, 2) { 9.0 } else { 1.0 });
    assert_eq!(lbp_code(&peak, 2.0, 2.0, 8, 1.0, 0.0), 0);
}

#[test]
fn u2_enumeration() {
    let uniform: Vec<u32> = (0..256).filter(|&c| is_uniform(c, 8)).collect();
    assert_eq!(uniform.len(), U2_BINS - 1);
    for (bin, &code) in uniform.iter().enumerate() {
        assert_eq!(u2_bin(code), bin);
    }
    assert_eq!(u2_bin(0b0101_0101), U2_BINS - 1);
    let mut seen = vec![0usize; U2_BINS];
    for c in 0..256 {
        seen[u2_bin(c)] += 1;
    }
    assert_eq!(seen[U2_BINS - 1], 256 - 58);
}

#[test]
fn riu2_rotation_invariance_exhaustive_p12() {
    let p = 12;
    for code in 0..(1u32 << p) {
        let bin = riu2_bin(code, p);
        assert!(bin <= p as usize + 1);
        for by in 1..p {
            assert_eq!(
                riu2_bin(rotl(code, by, p), p),
                bin,
                "code {code:#b} rotated by {by}"
            );
        }
    }
    assert_eq!(riu2_bin(0, p), 0);
    assert_eq!(riu2_bin((1 << p) - 1, p), p as usize);
}
