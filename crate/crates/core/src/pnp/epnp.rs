//! Control-point PnP: world points become barycentric combinations of
//! principal-axis control points, whose camera-frame positions live in the
//! null space of a 2n x 12 (planar: 2n x 9) system. Candidate null-space
//! dimensions N = 1..3 are each closed with the inter-control-point distance
//! constraints and a rigid alignment; the best reprojection wins.

use super::{
    reproj_rms_norm, validate, Correspondence, PnPSolution, PnpError, SolverKind,
    EPNP_PLANAR_EIG_RTOL,
};
use crate::numerics::vec3::{self, Vec3};
use crate::numerics::{lstsq, procrustes, sym_eig, Matrix};

/// Behaviour switches for [`epnp_with`].
#[derive(Debug, Clone, Copy)]
pub struct EpnpOptions {
    /// Run the internal Gauss-Newton pass on the null-space weights
    /// (distance-consistency objective).
    pub beta_gauss_newton: bool,
}

impl Default for EpnpOptions {
    fn default() -> Self {
        EpnpOptions {
            beta_gauss_newton: true,
        }
    }
}

pub fn epnp(corr: &[Correspondence], h_ap_mm: f64) -> Result<PnPSolution, PnpError> {
    epnp_with(corr, h_ap_mm, EpnpOptions::default())
}

pub fn epnp_with(
    corr: &[Correspondence],
    h_ap_mm: f64,
    opts: EpnpOptions,
) -> Result<PnPSolution, PnpError> {
    validate(corr)?;
    let n = corr.len();

    // principal-axis control points from the world-point covariance
    let mut cen = [0.0; 3];
    for c in corr {
        cen = vec3::add(cen, vec3::scale(c.world, 1.0 / n as f64));
    }
    let mut cov = Matrix::zeros(3, 3);
    for c in corr {
        let d = vec3::sub(c.world, cen);
        for i in 0..3 {
            for j in 0..3 {
                cov[(i, j)] += d[i] * d[j] / n as f64;
            }
        }
    }
    let (evals, evecs) = sym_eig(&cov).expect("covariance is symmetric");
    let planar = evals[0] <= EPNP_PLANAR_EIG_RTOL * evals[2].max(f64::MIN_POSITIVE);

    // control points: centroid plus scaled principal axes (descending)
    let axis = |k: usize| -> Vec3 { [evecs[(0, k)], evecs[(1, k)], evecs[(2, k)]] };
    let mut control_w: Vec<Vec3> = vec![cen];
    let order = [2usize, 1, 0]; // descending eigenvalues
    let n_cp = if planar { 3 } else { 4 };
    for &k in order.iter().take(n_cp - 1) {
        control_w.push(vec3::add(cen, vec3::scale(axis(k), evals[k].max(0.0).sqrt())));
    }

    // barycentric coordinates: least-squares in the control-point basis
    // (exact when the basis spans the points)
    let dim = n_cp - 1;
    let mut basis = Matrix::zeros(3, dim);
    for (j, cp) in control_w.iter().skip(1).enumerate() {
        let d = vec3::sub(*cp, cen);
        for i in 0..3 {
            basis[(i, j)] = d[i];
        }
    }
    let mut alphas: Vec<Vec<f64>> = Vec::with_capacity(n);
    for c in corr {
        let d = vec3::sub(c.world, cen);
        let coeff = lstsq(&basis, &d);
        let mut a = Vec::with_capacity(n_cp);
        a.push(1.0 - coeff.iter().sum::<f64>());
        a.extend_from_slice(&coeff);
        alphas.push(a);
    }
    if !planar {
        // the basis must actually reproduce every point
        for (c, a) in corr.iter().zip(&alphas) {
            let mut rec = [0.0; 3];
            for (j, cp) in control_w.iter().enumerate() {
                rec = vec3::add(rec, vec3::scale(*cp, a[j]));
            }
            if vec3::norm(vec3::sub(rec, c.world)) > 1e-6 {
                return Err(PnpError::Degenerate(
                    "barycentric basis does not span the world points".into(),
                ));
            }
        }
    }

    // null-space system
    let cols = 3 * n_cp;
    let mut m = Matrix::zeros(2 * n, cols);
    for (i, c) in corr.iter().enumerate() {
        let (u, v) = (c.image[0], c.image[1]);
        for (j, &a) in alphas[i].iter().enumerate() {
            m[(2 * i, 3 * j)] = a;
            m[(2 * i, 3 * j + 2)] = -u * a;
            m[(2 * i + 1, 3 * j + 1)] = a;
            m[(2 * i + 1, 3 * j + 2)] = -v * a;
        }
    }
    let (_, kernel_vecs) = sym_eig(&m.ata()).expect("normal matrix is symmetric");

    // inter-control-point distance constraints
    let mut pairs = Vec::new();
    for i in 0..n_cp {
        for j in (i + 1)..n_cp {
            pairs.push((i, j));
        }
    }
    let d2w: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| {
            let d = vec3::sub(control_w[i], control_w[j]);
            vec3::dot(d, d)
        })
        .collect();

    let cp_of = |x: &[f64], j: usize| -> Vec3 { [x[3 * j], x[3 * j + 1], x[3 * j + 2]] };
    let pair_diff = |x: &[f64], i: usize, j: usize| vec3::sub(cp_of(x, i), cp_of(x, j));

    let max_n = if planar { 2 } else { 3 };
    let mut best: Option<PnPSolution> = None;
    for n_kernel in 1..=max_n {
        let kernel: Vec<Vec<f64>> = (0..n_kernel).map(|k| kernel_vecs.col(k)).collect();

        // least-squares on the beta products
        let mut prods = Vec::new();
        for k in 0..n_kernel {
            for l in k..n_kernel {
                prods.push((k, l));
            }
        }
        let mut lmat = Matrix::zeros(pairs.len(), prods.len());
        for (row, &(i, j)) in pairs.iter().enumerate() {
            let dvs: Vec<Vec3> = kernel.iter().map(|v| pair_diff(v, i, j)).collect();
            for (col, &(k, l)) in prods.iter().enumerate() {
                let w = if k == l { 1.0 } else { 2.0 };
                lmat[(row, col)] = w * vec3::dot(dvs[k], dvs[l]);
            }
        }
        let b = lstsq(&lmat, &d2w);
        let b11 = b[prods.iter().position(|&p| p == (0, 0)).unwrap()];
        let mut beta = vec![0.0; n_kernel];
        beta[0] = b11.abs().sqrt();
        for k in 1..n_kernel {
            let b1k = b[prods.iter().position(|&p| p == (0, k)).unwrap()];
            beta[k] = if beta[0] > 1e-12 { b1k / beta[0] } else { 0.0 };
        }

        if opts.beta_gauss_newton {
            gauss_newton_beta(&mut beta, &kernel, &pairs, &d2w, &pair_diff);
        }

        // assemble camera-frame control points and the point cloud
        let mut x = vec![0.0; 3 * n_cp];
        for (bk, v) in beta.iter().zip(&kernel) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += bk * vi;
            }
        }
        let mut cam_pts: Vec<Vec3> = alphas
            .iter()
            .map(|a| {
                let mut p = [0.0; 3];
                for (j, &aj) in a.iter().enumerate() {
                    p = vec3::add(p, vec3::scale(cp_of(&x, j), aj));
                }
                p
            })
            .collect();
        let depth_sum: f64 = cam_pts.iter().map(|p| p[2]).sum();
        if depth_sum < 0.0 {
            for p in &mut cam_pts {
                *p = vec3::scale(*p, -1.0);
            }
        }
        if cam_pts.iter().map(|p| vec3::norm(*p)).sum::<f64>() < 1e-9 {
            continue;
        }

        let world: Vec<Vec3> = corr.iter().map(|c| c.world).collect();
        let Ok(motion) = procrustes(&world, &cam_pts) else {
            continue;
        };
        let Ok(rotation) = crate::geometry::RotationMatrix::try_new(motion.rotation) else {
            continue;
        };
        let Some(rms) = reproj_rms_norm(&rotation, motion.translation, corr) else {
            continue;
        };
        let cand = PnPSolution {
            rotation,
            translation: motion.translation,
            reproj_rms_mm: rms * h_ap_mm,
            method: SolverKind::Epnp,
            refined: false,
        };
        if best
            .as_ref()
            .map(|b| cand.reproj_rms_mm < b.reproj_rms_mm)
            .unwrap_or(true)
        {
            best = Some(cand);
        }
    }
    best.ok_or(PnpError::NoValidSolution)
}

/// Gauss-Newton on the distance-consistency residuals over the null-space
/// weights.
fn gauss_newton_beta(
    beta: &mut [f64],
    kernel: &[Vec<f64>],
    pairs: &[(usize, usize)],
    d2w: &[f64],
    pair_diff: &impl Fn(&[f64], usize, usize) -> Vec3,
) {
    let nb = beta.len();
    let dim = kernel[0].len();
    for _ in 0..15 {
        let mut x = vec![0.0; dim];
        for (bk, v) in beta.iter().zip(kernel) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += bk * vi;
            }
        }
        let mut jac = Matrix::zeros(pairs.len(), nb);
        let mut res = vec![0.0; pairs.len()];
        for (row, &(i, j)) in pairs.iter().enumerate() {
            let d = pair_diff(&x, i, j);
            res[row] = d2w[row] - vec3::dot(d, d);
            for (col, v) in kernel.iter().enumerate() {
                jac[(row, col)] = 2.0 * vec3::dot(d, pair_diff(v, i, j));
            }
        }
        let step = lstsq(&jac, &res);
        let norm: f64 = step.iter().map(|s| s * s).sum::<f64>().sqrt();
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
        }
        if norm < 1e-12 {
            break;
        }
    }
}
