//! Symmetric eigendecomposition via cyclic Jacobi rotations.

use super::{tol, Matrix, NumericsError};

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
/// symmetric matrix. Unconditionally convergent for the n <= 12 systems the
/// solvers build.
pub fn sym_eig(a: &Matrix) -> Result<(Vec<f64>, Matrix), NumericsError> {
    if a.rows() != a.cols() {
        return Err(NumericsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    if a.asymmetry() > tol::SYM_EIG_ASYMMETRY_RTOL {
        return Err(NumericsError::NotSymmetric(tol::SYM_EIG_ASYMMETRY_RTOL));
    }

    let n = a.rows();
    let mut w = a.clone();
    // symmetrize so rotations see an exactly symmetric matrix
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (w[(i, j)] + w[(j, i)]);
            w[(i, j)] = m;
            w[(j, i)] = m;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = w.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..tol::JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += w[(i, j)] * w[(i, j)];
            }
        }
        if off.sqrt() <= f64::EPSILON * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq.abs() <= f64::EPSILON * scale * 1e-3 {
                    continue;
                }
                let theta = 0.5 * (w[(q, q)] - w[(p, p)]) / apq;
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                let app = w[(p, p)];
                let aqq = w[(q, q)];
                w[(p, p)] = app - t * apq;
                w[(q, q)] = aqq + t * apq;
                w[(p, q)] = 0.0;
                w[(q, p)] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = w[(k, p)];
                        let akq = w[(k, q)];
                        w[(k, p)] = c * akp - s * akq;
                        w[(p, k)] = w[(k, p)];
                        w[(k, q)] = s * akp + c * akq;
                        w[(q, k)] = w[(k, q)];
                    }
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(i, i)].partial_cmp(&w[(j, j)]).unwrap());
    let values = order.iter().map(|&i| w[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, new_col)] = v[(r, old_col)];
        }
    }
    Ok((values, vectors))
}
