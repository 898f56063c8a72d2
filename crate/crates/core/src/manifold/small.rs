//! Row-major dense helpers for the `k x k` matrices of chart geometry.
//! Sizes up to three use closed forms; larger ones go through faer.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};

fn to_mat(a: &[f64], k: usize) -> Mat<f64> {
    Mat::<f64>::from_fn(k, k, |i, j| a[i * k + j])
}

fn from_mat(m: &Mat<f64>) -> Vec<f64> {
    let k = m.nrows();
    (0..k * k).map(|ij| m[(ij / k, ij % k)]).collect()
}

pub(crate) fn det(a: &[f64], k: usize) -> f64 {
    match k {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => to_mat(a, k).determinant(),
    }
}

pub(crate) fn inverse(a: &[f64], k: usize) -> Vec<f64> {
    let d = det(a, k);
    match k {
        1 => vec![1.0 / a[0]],
        2 => vec![a[3] / d, -a[1] / d, -a[2] / d, a[0] / d],
        3 => {
            let c = |i: usize, j: usize| a[i * 3 + j];
            let mut out = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    // adjugate: transpose of the cofactor matrix
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    out[i * 3 + j] = (c(r0, c0) * c(r1, c1) - c(r0, c1) * c(r1, c0)) / d;
                }
            }
            out
        }
        _ => from_mat(&to_mat(a, k).partial_piv_lu().inverse()),
    }
}

pub(crate) fn matmul(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for l in 0..k {
            let x = a[i * k + l];
            for j in 0..k {
                out[i * k + j] += x * b[l * k + j];
            }
        }
    }
    out
}

/// Eigenvalues, ascending, of `g^{-1} s` with `g` symmetric positive
/// definite and `s` symmetric; `mixed = g^{-1} s` is passed precomputed.
pub(crate) fn generalized_eigenvalues(g: &[f64], s: &[f64], mixed: &[f64], k: usize) -> Vec<f64> {
    match k {
        1 => vec![mixed[0]],
        2 => {
            let half = 0.5 * (mixed[0] + mixed[3]);
            let skew = 0.5 * (mixed[0] - mixed[3]);
            let disc = (skew * skew + mixed[1] * mixed[2]).max(0.0).sqrt();
            vec![half - disc, half + disc]
        }
        _ => {
            let evd = to_mat(g, k).self_adjoint_eigen(Side::Lower).expect("metric eigendecomposition");
            let (u, w) = (evd.U(), evd.S().column_vector());
            let root = Mat::<f64>::from_fn(k, k, |i, j| (0..k).map(|l| u[(i, l)] * u[(j, l)] / w[l].sqrt()).sum());
            let sym = &root * to_mat(s, k) * &root;
            let mut e = sym.self_adjoint_eigenvalues(Side::Lower).expect("shape operator eigenvalues");
            e.sort_by(f64::total_cmp);
            e
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_agree_with_faer() {
        let a = [2.0, 0.3, -0.1, 0.4, 1.5, 0.2, -0.3, 0.1, 3.0];
        let m = to_mat(&a, 3);
        assert!((det(&a, 3) - m.determinant()).abs() < 1e-13);
        let inv = inverse(&a, 3);
        let id = matmul(&a, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                assert!((id[i * 3 + j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        let g = [2.0, 0.5, 0.5, 1.0];
        let s = [1.0, 0.2, 0.2, -0.5];
        let mixed = matmul(&inverse(&g, 2), &s, 2);
        let closed = generalized_eigenvalues(&g, &s, &mixed, 2);
        let g3 = [2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0];
        let s3 = [1.0, 0.2, 0.0, 0.2, -0.5, 0.0, 0.0, 0.0, 7.0];
        let mixed3 = matmul(&inverse(&g3, 3), &s3, 3);
        let general = generalized_eigenvalues(&g3, &s3, &mixed3, 3);
        assert!((closed[0] - general[0]).abs() < 1e-13 && (closed[1] - general[1]).abs() < 1e-13);
        assert!((general[2] - 7.0).abs() < 1e-13);
    }
}
