//! Minimum-norm least squares via the eigendecomposition of the normal
//! matrix. Column counts here never exceed 12, so forming AᵀA is fine.

use super::{sym_eig, tol, Matrix};

/// x minimizing ‖Ax − b‖; the minimum-norm solution when A is rank
/// deficient.
pub fn lstsq(a: &Matrix, b: &[f64]) -> Vec<f64> {
    assert_eq!(a.rows(), b.len(), "rhs length must match rows");
    let normal = a.ata();
    let rhs = a.atb(b);
    let (values, vectors) = sym_eig(&normal).expect("normal matrix is symmetric");
    let lam_max = values.last().copied().unwrap_or(0.0).max(0.0);
    let cutoff = lam_max * tol::LSTSQ_RANK_RTOL;
    let n = a.cols();
    let mut x = vec![0.0; n];
    for (k, &lam) in values.iter().enumerate() {
        if lam <= cutoff || lam <= 0.0 {
            continue;
        }
        let v = vectors.col(k);
        let proj: f64 = v.iter().zip(&rhs).map(|(vi, ri)| vi * ri).sum();
        let c = proj / lam;
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += c * vi;
        }
    }
    x
}
