//! Gauss-Newton refinement of a pose on the reprojection cost.

use super::{
    reproj_rms_norm, Correspondence, PnPSolution, REFINE_MAX_ITERS, REFINE_STEP_TOL,
};
use crate::geometry::RotationMatrix;
use crate::numerics::vec3::{self, Vec3};
use crate::numerics::{lstsq, Matrix};

fn residuals(rotation: &RotationMatrix, t: Vec3, corr: &[Correspondence]) -> Option<Vec<f64>> {
    let mut r = Vec::with_capacity(2 * corr.len());
    for c in corr {
        let q = vec3::add(rotation.apply(c.world), t);
        if q[2] <= 0.0 {
            return None;
        }
        r.push(q[0] / q[2] - c.image[0]);
        r.push(q[1] / q[2] - c.image[1]);
    }
    Some(r)
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Iterative descent on the reprojection cost from a solver initialization.
/// The rotation moves through axis-angle increments (re-orthonormalized each
/// step); steps that fail to decrease the cost are halved, and the result is
/// never worse than the input. Returns the input unchanged when no
/// improvement is possible.
pub fn refine_gauss_newton(
    initial: &PnPSolution,
    corr: &[Correspondence],
    h_ap_mm: f64,
) -> PnPSolution {
    let mut rotation = initial.rotation;
    let mut t = initial.translation;
    let Some(mut res) = residuals(&rotation, t, corr) else {
        return initial.clone();
    };
    let mut current = cost(&res);
    let initial_cost = current;

    for _ in 0..REFINE_MAX_ITERS {
        // Jacobian: 2 rows per point, columns = (axis-angle increment, t)
        let n = corr.len();
        let mut jac = Matrix::zeros(2 * n, 6);
        for (i, c) in corr.iter().enumerate() {
            let y = rotation.apply(c.world);
            let q = vec3::add(y, t);
            let iz = 1.0 / q[2];
            // d(u,v)/dq
            let du = [iz, 0.0, -q[0] * iz * iz];
            let dv = [0.0, iz, -q[1] * iz * iz];
            // dq/dw = -[y]_x for the left-applied increment exp([w]x) R
            let dq_dw = [
                [0.0, y[2], -y[1]],
                [-y[2], 0.0, y[0]],
                [y[1], -y[0], 0.0],
            ];
            for k in 0..3 {
                let col = [dq_dw[0][k], dq_dw[1][k], dq_dw[2][k]];
                jac[(2 * i, k)] = vec3::dot(du, col);
                jac[(2 * i + 1, k)] = vec3::dot(dv, col);
                // translation block is the identity in q
                jac[(2 * i, 3 + k)] = du[k];
                jac[(2 * i + 1, 3 + k)] = dv[k];
            }
        }
        let neg_res: Vec<f64> = res.iter().map(|r| -r).collect();
        let step = lstsq(&jac, &neg_res);
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let w = [step[0] * scale, step[1] * scale, step[2] * scale];
            let angle = vec3::norm(w);
            let delta_r = if angle > 0.0 {
                vec3::axis_angle(vec3::scale(w, 1.0 / angle), angle)
            } else {
                vec3::identity()
            };
            let cand_r = RotationMatrix::try_new(vec3::mat_mul(&delta_r, rotation.matrix()))
                .unwrap_or(rotation);
            let cand_t = [
                t[0] + step[3] * scale,
                t[1] + step[4] * scale,
                t[2] + step[5] * scale,
            ];
            if let Some(cand_res) = residuals(&cand_r, cand_t, corr) {
                let cand_cost = cost(&cand_res);
                if cand_cost < current {
                    rotation = cand_r;
                    t = cand_t;
                    res = cand_res;
                    current = cand_cost;
                    improved = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
        let norm: f64 = step.iter().map(|s| s * s * scale * scale).sum::<f64>().sqrt();
        if norm < REFINE_STEP_TOL {
            break;
        }
    }

    if current >= initial_cost {
        return initial.clone();
    }
    let rms = reproj_rms_norm(&rotation, t, corr).expect("cheirality preserved by refinement");
    PnPSolution {
        rotation,
        translation: t,
        reproj_rms_mm: rms * h_ap_mm,
        method: initial.method,
        refined: true,
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use crate::geometry::{BeaconSet, Pose};
    use crate::pnp::solution_to_pose;

    #[test]
    fn exact_initialization_is_returned_unchanged() {
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let pose = Pose::new(0.3, 0.3, 0.0, 0.0, 0.0, 0.4);
        let corr = project_exact(&pose, &beacons);
        let init = {
            let mut s = solution_from_pose(&pose, crate::pnp::SolverKind::Ippe);
            s.reproj_rms_mm = 0.0;
            s
        };
        let refined = refine_gauss_newton(&init, &corr, H_AP_MM);
        assert!(!refined.refined);
        let (dp, _) = pose_error(&refined, &pose);
        assert!(dp < 1e-12);
    }

    #[test]
    fn perturbed_initialization_converges_back() {
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let pose = Pose::new(-0.4, 0.6, 0.0, 0.0, 0.0, -1.1);
        let corr = project_exact(&pose, &beacons);
        // 1 cm, 1 degree off
        let off = Pose::new(
            pose.x + 0.01,
            pose.y - 0.01,
            pose.z + 0.01,
            pose.alpha,
            pose.beta,
            pose.gamma + 1f64.to_radians(),
        );
        let init = solution_from_pose(&off, crate::pnp::SolverKind::Epnp);
        let refined = refine_gauss_newton(&init, &corr, H_AP_MM);
        assert!(refined.refined);
        let (dp, da) = pose_error(&refined, &pose);
        assert!(dp < 1e-8, "position error {dp}");
        assert!(da < 1e-8, "angle error {da}");
    }

    #[test]
    fn cost_never_increases_on_noisy_data() {
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let pose = Pose::new(0.2, -0.8, 0.0, 0.0, 0.0, 2.2);
        let mut corr = project_exact(&pose, &beacons);
        // deterministic image perturbation
        for (i, c) in corr.iter_mut().enumerate() {
            c.image[0] += 0.002 * ((i * 7 + 1) as f64).sin();
            c.image[1] -= 0.002 * ((i * 13 + 2) as f64).cos();
        }
        let init = solution_from_pose(&pose, crate::pnp::SolverKind::Rpnp);
        let init_rms = {
            let r = reproj_rms_norm(&init.rotation, init.translation, &corr).unwrap();
            r * H_AP_MM
        };
        let refined = refine_gauss_newton(&init, &corr, H_AP_MM);
        assert!(refined.reproj_rms_mm <= init_rms + 1e-15);
        // refinement changed the pose (the data is noisy)
        let moved = solution_to_pose(&refined);
        assert!((moved.x - pose.x).abs() > 0.0);
    }
}
