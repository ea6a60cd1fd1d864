//! 3x3 singular value decomposition via one-sided Jacobi.

use super::vec3::{cross, normalize, Mat3};
use super::tol;

#[derive(Debug, Clone)]
pub struct Svd3 {
    /// Left singular vectors, columns.
    pub u: Mat3,
    /// Singular values, non-negative, descending.
    pub sigma: [f64; 3],
    /// Right singular vectors, columns.
    pub v: Mat3,
}

/// M = U diag(sigma) Vᵀ with orthonormal U, V and sigma >= 0 descending.
pub fn svd3(m: &Mat3) -> Svd3 {
    // work on columns of b; right rotations accumulate into v
    let mut b = [[0.0; 3]; 3]; // b[j] = column j
    for j in 0..3 {
        for i in 0..3 {
            b[j][i] = m[i][j];
        }
    }
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]; // columns

    let scale = b
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |s, x| s + x * x)
        .sqrt()
        .max(f64::MIN_POSITIVE);

    for _ in 0..tol::JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..2 {
            for q in (p + 1)..3 {
                let alpha: f64 = b[p].iter().map(|x| x * x).sum();
                let beta: f64 = b[q].iter().map(|x| x * x).sum();
                let gamma: f64 = b[p].iter().zip(&b[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= f64::EPSILON * scale * scale {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..3 {
                    let bp = b[p][i];
                    let bq = b[q][i];
                    b[p][i] = c * bp - s * bq;
                    b[q][i] = s * bp + c * bq;
                    let vp = v[p][i];
                    let vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma = [0.0; 3];
    for j in 0..3 {
        sigma[j] = b[j].iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());

    let mut u_cols = [[0.0; 3]; 3];
    let mut v_cols = [[0.0; 3]; 3];
    let mut s_sorted = [0.0; 3];
    let smax = sigma[order[0]];
    for (k, &j) in order.iter().enumerate() {
        s_sorted[k] = sigma[j];
        v_cols[k] = v[j];
        if sigma[j] > tol::SVD3_RANK_RTOL * smax && sigma[j] > 0.0 {
            for i in 0..3 {
                u_cols[k][i] = b[j][i] / sigma[j];
            }
        } else {
            s_sorted[k] = sigma[j]; // keep tiny value, but synthesize direction
            u_cols[k] = [0.0; 3];
        }
    }
    // complete missing left directions orthogonally
    for k in 0..3 {
        if u_cols[k] != [0.0; 3] {
            continue;
        }
        u_cols[k] = match k {
            0 => [1.0, 0.0, 0.0],
            1 => {
                let a = u_cols[0];
                let pick = if a[0].abs() < 0.9 {
                    [1.0, 0.0, 0.0]
                } else {
                    [0.0, 1.0, 0.0]
                };
                normalize(cross(a, pick))
            }
            _ => cross(u_cols[0], u_cols[1]),
        };
    }

    // repack as row-major matrices with vectors in columns
    let mut u = [[0.0; 3]; 3];
    let mut vv = [[0.0; 3]; 3];
    for j in 0..3 {
        for i in 0..3 {
            u[i][j] = u_cols[j][i];
            vv[i][j] = v_cols[j][i];
        }
    }
    Svd3 {
        u,
        sigma: s_sorted,
        v: vv,
    }
}
