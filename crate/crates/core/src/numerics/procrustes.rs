//! Rigid alignment of two point sets (Kabsch).

use super::svd::svd3;
use super::vec3::{det, mat_mul, mat_vec, sub, transpose, Mat3, Vec3};
use super::{tol, NumericsError};

/// Rotation plus translation mapping one point set onto another.
#[derive(Debug, Clone)]
pub struct RigidMotion {
    pub rotation: Mat3,
    pub translation: Vec3,
}

/// Least-squares rigid motion: minimizes Σ‖R·p_i + t − q_i‖².
///
/// Reflections are suppressed by sign-flipping the smallest singular
/// direction, so `rotation` always has determinant +1. Collinear input is a
/// degeneracy error (a rotation about the common line is unobservable).
pub fn procrustes(p: &[Vec3], q: &[Vec3]) -> Result<RigidMotion, NumericsError> {
    if p.len() != q.len() {
        return Err(NumericsError::DimensionMismatch(
            "point sets must have equal length",
        ));
    }
    if p.len() < 3 {
        return Err(NumericsError::Degenerate("need at least 3 points"));
    }
    let n = p.len() as f64;
    let mut pc = [0.0; 3];
    let mut qc = [0.0; 3];
    for (a, b) in p.iter().zip(q) {
        for k in 0..3 {
            pc[k] += a[k] / n;
            qc[k] += b[k] / n;
        }
    }
    // cross-covariance H = Σ (q - qc)(p - pc)ᵀ
    let mut h = [[0.0; 3]; 3];
    for (a, b) in p.iter().zip(q) {
        let dp = sub(*a, pc);
        let dq = sub(*b, qc);
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] += dq[i] * dp[j];
            }
        }
    }
    let s = svd3(&h);
    if s.sigma[1] <= tol::PROCRUSTES_COLLINEAR_RTOL * s.sigma[0] {
        return Err(NumericsError::Degenerate("point sets are collinear"));
    }
    let d = det(&mat_mul(&s.u, &transpose(&s.v)));
    let mut u = s.u;
    if d < 0.0 {
        for row in &mut u {
            row[2] = -row[2];
        }
    }
    let rotation = mat_mul(&u, &transpose(&s.v));
    let translation = sub(qc, mat_vec(&rotation, pc));
    Ok(RigidMotion {
        rotation,
        translation,
    })
}
