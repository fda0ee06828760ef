//! Orthonormal 2-D DCT-II on `m x m` row-major arrays.

use nalgebra::DMatrix;

/// `C[k][i] = a_k · cos(π (2i + 1) k / 2m)`, rows orthonormal.
fn dct_matrix(m: usize) -> DMatrix<f64> {
    let scale0 = (1.0 / m as f64).sqrt();
    let scale = (2.0 / m as f64).sqrt();
    DMatrix::from_fn(m, m, |k, i| {
        let a = if k == 0 { scale0 } else { scale };
        a * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * m) as f64).cos()
    })
}

/// Forward transform `C · X · Cᵀ`.
pub fn dct2(x: &[f64], m: usize) -> Vec<f64> {
    let c = dct_matrix(m);
    let xm = DMatrix::from_row_slice(m, m, x);
    let out = &c * xm * c.transpose();
    out.transpose().as_slice().to_vec()
}

/// Inverse transform `Cᵀ · A · C`.
pub fn idct2(a: &[f64], m: usize) -> Vec<f64> {
    let c = dct_matrix(m);
    let am = DMatrix::from_row_slice(m, m, a);
    let out = c.transpose() * am * &c;
    out.transpose().as_slice().to_vec()
}

/// `N x N` synthesis matrix (`N = m²`): `x = Ψ·α` equals `idct2(α)` for
/// row-major `x` and `α`.
pub fn dct_basis(m: usize) -> DMatrix<f64> {
    let c = dct_matrix(m);
    let n = m * m;
    DMatrix::from_fn(n, n, |row, col| {
        let (i, j) = (row / m, row % m);
        let (p, q) = (col / m, col % m);
        c[(p, i)] * c[(q, j)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dct_of_constant_is_dc_only() {
        let m = 5;
        let a = dct2(&vec![2.0; m * m], m);
        assert!((a[0] - 2.0 * m as f64).abs() < 1e-12);
        assert!(a[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn roundtrip_and_basis_agree() {
        let m = 6;
        let x: Vec<f64> = (0..m * m).map(|k| ((k * 7) % 11) as f64 - 3.0).collect();
        let back = idct2(&dct2(&x, m), m);
        assert!(x.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
        let alpha = dct2(&x, m);
        let psi = dct_basis(m);
        let via_basis = &psi * nalgebra::DVector::from_vec(alpha);
        assert!(x.iter().zip(via_basis.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        let gram = psi.transpose() * &psi;
        assert!((gram - DMatrix::identity(m * m, m * m)).amax() < 1e-12);
    }

    #[test]
    fn matches_direct_cosine_sum() {
        let m = 4;
        let x: Vec<f64> = (0..16).map(|k| (k as f64).sin()).collect();
        let a = dct2(&x, m);
        let pi = std::f64::consts::PI;
        for p in 0..m {
            for q in 0..m {
                let ap = if p == 0 { 0.5 } else { (0.5f64).sqrt() };
                let aq = if q == 0 { 0.5 } else { (0.5f64).sqrt() };
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        s += x[i * m + j]
                            * (pi * (2 * i + 1) as f64 * p as f64 / 8.0).cos()
                            * (pi * (2 * j + 1) as f64 * q as f64 / 8.0).cos();
                    }
                }
                assert!((a[p * m + q] - ap * aq * s).abs() < 1e-12);
            }
        }
    }
}
