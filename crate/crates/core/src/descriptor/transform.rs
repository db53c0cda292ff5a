//! Block transforms of the 4x4 oriented patch: orthonormal DCT-II and
//! singular values.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::orient::Patch;

/// `basis[k][m] = alpha(k) cos(pi (2m + 1) k / 8)`.
fn dct_basis() -> &'static [[f64; 4]; 4] {
    static BASIS: OnceLock<[[f64; 4]; 4]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0.0; 4]; 4];
        for (k, row) in b.iter_mut().enumerate() {
            let alpha = if k == 0 { 0.5 } else { 0.5f64.sqrt() };
            for (m, v) in row.iter_mut().enumerate() {
                *v = alpha * (PI * (2 * m + 1) as f64 * k as f64 / 8.0).cos();
            }
        }
        b
    })
}

/// Orthonormal 2D DCT-II of the patch, coefficients in row-major order.
pub fn dct_features(patch: &Patch) -> [f64; 16] {
    let c = dct_basis();
    // rows: t = C * P
    let mut t = [[0.0; 4]; 4];
    for k in 0..4 {
        for n in 0..4 {
            t[k][n] = (0..4).map(|m| c[k][m] * patch[m][n]).sum();
        }
    }
    // columns: out = T * C^T
    let mut out = [0.0; 16];
    for k in 0..4 {
        for l in 0..4 {
            out[k * 4 + l] = (0..4).map(|n| t[k][n] * c[l][n]).sum();
        }
    }
    out
}

/// Singular values in non-increasing order, by one-sided Jacobi rotations.
pub fn svd_features(patch: &Patch) -> [f64; 4] {
    // Work on columns.
    let mut a = *patch;
    let frob: f64 = a.iter().flatten().map(|v| v * v).sum();
    if frob == 0.0 {
        return [0.0; 4];
    }
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..3 {
            for j in i + 1..4 {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for row in &a {
                    alpha += row[i] * row[i];
                    beta += row[j] * row[j];
                    gamma += row[i] * row[j];
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in a.iter_mut() {
                    let (ai, aj) = (row[i], row[j]);
                    row[i] = c * ai - s * aj;
                    row[j] = s * ai + c * aj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv = [0.0; 4];
    for (j, s) in sv.iter_mut().enumerate() {
        *s = a.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt();
    }
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_patch() {
        let p = [[2.5; 4]; 4];
        let d = dct_features(&p);
        assert!((d[0] - 10.0).abs() < 1e-12);
        assert!(d[1..].iter().all(|v| v.abs() < 1e-12));
        let s = svd_features(&p);
        assert!((s[0] - 10.0).abs() < 1e-12);
        assert!(s[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn identity_singular_values() {
        let mut p = [[0.0; 4]; 4];
        for (i, row) in p.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        assert_eq!(svd_features(&p), [1.0; 4]);
        assert_eq!(svd_features(&[[0.0; 4]; 4]), [0.0; 4]);
    }

    #[test]
    fn diagonal_is_sorted() {
        let mut p = [[0.0; 4]; 4];
        p[0][0] = 1.0;
        p[1][1] = -7.0;
        p[2][2] = 3.0;
        assert_eq!(svd_features(&p), [7.0, 3.0, 1.0, 0.0]);
    }

    #[test]
    fn dct_preserves_energy() {
        let p = [
            [1.0, -2.0, 3.5, 0.25],
            [4.0, 4.0, -1.0, 9.0],
            [0.0, 2.0, 2.0, 2.0],
            [7.5, -3.0, 1.0, 0.5],
        ];
        let e_in: f64 = p.iter().flatten().map(|v| v * v).sum();
        let e_out: f64 = dct_features(&p).iter().map(|v| v * v).sum();
        assert!((e_in - e_out).abs() < 1e-10);
    }
}
