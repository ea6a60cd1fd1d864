//! Plane-based pose from the first-order behaviour of the homography.
//!
//! The homography's value and Jacobian at the world-plane origin pin the
//! pose up to a two-fold tilt ambiguity; both candidates are returned,
//! ordered by reprojection residual. Exact for noise-free input.

use super::homography::homography_dlt;
use super::{
    reproj_rms_norm, translation_for, validate, Correspondence, PnPSolution, PnpError,
    SolverKind, IPPE_PLANARITY_RTOL,
};
use crate::geometry::RotationMatrix;
use crate::numerics::svd3;
use crate::numerics::vec3::{self, Mat3, Vec3};

/// The two candidate poses of a planar solve, ordered by reprojection
/// residual. `alternate` is absent when the reflected candidate puts a
/// beacon behind the camera.
#[derive(Debug, Clone)]
pub struct IppeSolutions {
    pub best: PnPSolution,
    pub alternate: Option<PnPSolution>,
}

/// Rotation taking the unit vector `k` onto the +z axis.
fn align_to_z(k: Vec3) -> Mat3 {
    let e3 = [0.0, 0.0, 1.0];
    let axis = vec3::cross(k, e3);
    let s = vec3::norm(axis);
    let c = vec3::dot(k, e3);
    if s < 1e-14 {
        if c > 0.0 {
            return vec3::identity();
        }
        return vec3::axis_angle([1.0, 0.0, 0.0], std::f64::consts::PI);
    }
    vec3::axis_angle(vec3::scale(axis, 1.0 / s), s.atan2(c))
}

/// Projects a near-rotation onto SO(3).
fn polar_rotation(m: &Mat3) -> Mat3 {
    let s = svd3(m);
    let d = vec3::det(&vec3::mat_mul(&s.u, &vec3::transpose(&s.v)));
    let mut u = s.u;
    if d < 0.0 {
        for row in &mut u {
            row[2] = -row[2];
        }
    }
    vec3::mat_mul(&u, &vec3::transpose(&s.v))
}

/// Plane-based PnP on coplanar (or quasi-planar) world points.
pub fn ippe(corr: &[Correspondence], h_ap_mm: f64) -> Result<IppeSolutions, PnpError> {
    validate(corr)?;
    let n = corr.len() as f64;

    // fit the world plane
    let mut cen = [0.0; 3];
    for c in corr {
        cen = vec3::add(cen, vec3::scale(c.world, 1.0 / n));
    }
    let mut cov = [[0.0; 3]; 3];
    for c in corr {
        let d = vec3::sub(c.world, cen);
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    let s = svd3(&cov);
    if s.sigma[2] > (IPPE_PLANARITY_RTOL * IPPE_PLANARITY_RTOL) * s.sigma[0] {
        return Err(PnpError::NotPlanar);
    }
    let ex = [s.u[0][0], s.u[1][0], s.u[2][0]];
    let ey = [s.u[0][1], s.u[1][1], s.u[2][1]];
    let ez = vec3::cross(ex, ey);

    // homography from centered plane coordinates to normalized image
    let plane: Vec<[f64; 2]> = corr
        .iter()
        .map(|c| {
            let d = vec3::sub(c.world, cen);
            [vec3::dot(ex, d), vec3::dot(ey, d)]
        })
        .collect();
    let image: Vec<[f64; 2]> = corr.iter().map(|c| c.image).collect();
    let h = homography_dlt(&plane, &image)?;
    if h[2][2].abs() <= 1e-12 {
        return Err(PnpError::Degenerate("homography has vanishing scale".into()));
    }

    // value and Jacobian of the plane-to-image map at the plane origin
    let u0 = h[0][2] / h[2][2];
    let v0 = h[1][2] / h[2][2];
    let j = [
        [
            (h[0][0] - u0 * h[2][0]) / h[2][2],
            (h[0][1] - u0 * h[2][1]) / h[2][2],
        ],
        [
            (h[1][0] - v0 * h[2][0]) / h[2][2],
            (h[1][1] - v0 * h[2][1]) / h[2][2],
        ],
    ];

    let khat = vec3::normalize([u0, v0, 1.0]);
    let rv = align_to_z(khat);
    // B = [I | -v] Rvᵀ has a vanishing third column; invert the 2x2 block
    let rvt = vec3::transpose(&rv);
    let b = [
        [rvt[0][0] - u0 * rvt[2][0], rvt[0][1] - u0 * rvt[2][1]],
        [rvt[1][0] - v0 * rvt[2][0], rvt[1][1] - v0 * rvt[2][1]],
    ];
    let det_b = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    if det_b.abs() < 1e-14 {
        return Err(PnpError::Degenerate("singular view correction".into()));
    }
    // A = B^-1 J
    let a = [
        [
            (b[1][1] * j[0][0] - b[0][1] * j[1][0]) / det_b,
            (b[1][1] * j[0][1] - b[0][1] * j[1][1]) / det_b,
        ],
        [
            (b[0][0] * j[1][0] - b[1][0] * j[0][0]) / det_b,
            (b[0][0] * j[1][1] - b[1][0] * j[0][1]) / det_b,
        ],
    ];
    // largest singular value of A fixes the depth of the plane origin
    let aat = [
        a[0][0] * a[0][0] + a[0][1] * a[0][1],
        a[0][0] * a[1][0] + a[0][1] * a[1][1],
        a[1][0] * a[1][0] + a[1][1] * a[1][1],
    ];
    let gamma = (0.5
        * (aat[0] + aat[2] + ((aat[0] - aat[2]).powi(2) + 4.0 * aat[1] * aat[1]).sqrt()))
    .sqrt();
    if !(gamma > 0.0) {
        return Err(PnpError::Degenerate("vanishing homography Jacobian".into()));
    }
    let r22 = [
        [a[0][0] / gamma, a[0][1] / gamma],
        [a[1][0] / gamma, a[1][1] / gamma],
    ];
    // bottom row of the first two rotation columns, up to a joint sign
    let m00 = 1.0 - (r22[0][0] * r22[0][0] + r22[1][0] * r22[1][0]);
    let m11 = 1.0 - (r22[0][1] * r22[0][1] + r22[1][1] * r22[1][1]);
    let m01 = -(r22[0][0] * r22[0][1] + r22[1][0] * r22[1][1]);
    let aa = m00.max(0.0).sqrt();
    let bb = m11.max(0.0).sqrt() * if m01 < 0.0 { -1.0 } else { 1.0 };

    let plane_axes = [ex, ey, ez]; // rows: plane frame in world coordinates
    let mut cands = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let c1 = [r22[0][0], r22[1][0], sign * aa];
        let c2 = [r22[0][1], r22[1][1], sign * bb];
        let c3 = vec3::cross(c1, c2);
        let q = [
            [c1[0], c2[0], c3[0]],
            [c1[1], c2[1], c3[1]],
            [c1[2], c2[2], c3[2]],
        ];
        let r_plane = polar_rotation(&vec3::mat_mul(&rvt, &q));
        let r_world = vec3::mat_mul(&r_plane, &plane_axes);
        let rotation = match RotationMatrix::try_new(r_world) {
            Ok(r) => r,
            Err(_) => continue,
        };
        // translation from all correspondences, then un-center
        let centered: Vec<Correspondence> = corr
            .iter()
            .map(|c| Correspondence {
                world: vec3::sub(c.world, cen),
                image: c.image,
            })
            .collect();
        let t_cen = translation_for(&rotation, &centered);
        let t = vec3::sub(t_cen, rotation.apply(cen));
        if let Some(rms) = reproj_rms_norm(&rotation, t, corr) {
            cands.push(PnPSolution {
                rotation,
                translation: t,
                reproj_rms_mm: rms * h_ap_mm,
                method: SolverKind::Ippe,
                refined: false,
            });
        }
    }
    cands.sort_by(|x, y| x.reproj_rms_mm.partial_cmp(&y.reproj_rms_mm).unwrap());
    let mut it = cands.into_iter();
    let best = it.next().ok_or(PnpError::NoValidSolution)?;
    Ok(IppeSolutions {
        best,
        alternate: it.next(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use crate::geometry::{BeaconSet, Pose};

    #[test]
    fn recovers_reference_scenario_pose() {
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let pose = Pose::new(1.0, 1.0, 0.0, 0.0, 0.0, 120f64.to_radians());
        let corr = project_exact(&pose, &beacons);
        let sols = ippe(&corr, H_AP_MM).unwrap();
        let (dp, da) = pose_error(&sols.best, &pose);
        assert!(dp < 1e-8, "position error {dp}");
        assert!(da < 1e-8, "angle error {da}");
        assert!(sols.best.reproj_rms_mm < 1e-9);
    }

    #[test]
    fn fronto_parallel_candidates_coincide() {
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let pose = Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.9);
        let corr = project_exact(&pose, &beacons);
        let sols = ippe(&corr, H_AP_MM).unwrap();
        let alt = sols.alternate.expect("both candidates valid");
        assert!((sols.best.reproj_rms_mm - alt.reproj_rms_mm).abs() < 1e-9);
        // the ambiguity point has square-root noise amplification, so the
        // recovery tolerance is looser than at generic poses
        let (dp, _) = pose_error(&sols.best, &pose);
        assert!(dp < 1e-6, "position error {dp}");
    }

    #[test]
    fn exact_recovery_over_random_poses() {
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let mut state = 0x51ab_u64;
        for _ in 0..200 {
            let pose = sample_pose(&mut state);
            let corr = project_exact(&pose, &beacons);
            let sols = ippe(&corr, H_AP_MM).unwrap();
            let (dp, da) = pose_error(&sols.best, &pose);
            assert!(dp < 1e-6, "position error {dp} at {pose:?}");
            assert!(da < 1e-6, "angle error {da} at {pose:?}");
        }
    }

    #[test]
    fn non_planar_input_rejected() {
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let pose = Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let mut corr = project_exact(&pose, &beacons);
        corr[0].world[2] += 0.8; // far outside the quasi-planar band
        assert!(matches!(ippe(&corr, H_AP_MM), Err(PnpError::NotPlanar)));
    }

    #[test]
    fn quasi_planar_input_accepted() {
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let pose = Pose::new(0.3, -0.5, 0.0, 0.0, 0.0, 1.0);
        let mut corr = project_exact(&pose, &beacons);
        corr[0].world[2] += 0.01; // centimeter-scale perturbation
        let sols = ippe(&corr, H_AP_MM).unwrap();
        let (dp, _) = pose_error(&sols.best, &pose);
        assert!(dp < 0.1, "quasi-planar solve drifted {dp} m");
    }
}
