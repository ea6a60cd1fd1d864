//! Perspective-n-Point solvers.
//!
//! Three independent algorithms recover the camera pose from world/image
//! correspondences: a plane-based homography decomposition ([`ippe`]), a
//! control-point null-space method ([`epnp`]) and a polynomial depth-ratio
//! method ([`rpnp`]). All of them work in normalized image coordinates
//! (detector millimeters divided by the aperture height), so the solvers
//! themselves are intrinsics-free; the aperture height enters only to report
//! reprojection residuals in detector millimeters.

mod epnp;
mod homography;
mod ippe;
mod refine;
mod rpnp;

pub use epnp::{epnp, epnp_with, EpnpOptions};
pub use homography::{apply_homography, homography_dlt};
pub use ippe::{ippe, IppeSolutions};
pub use refine::refine_gauss_newton;
pub use rpnp::rpnp;

use crate::geometry::{euler_from_rot, wrap_angle, Pose, RotationMatrix};
use crate::numerics::vec3::{self, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative covariance eigenvalue below which EPnP treats the world points
/// as planar.
pub const EPNP_PLANAR_EIG_RTOL: f64 = 1e-9;
/// Out-of-plane over in-plane spread ratio IPPE still accepts as
/// quasi-planar.
pub const IPPE_PLANARITY_RTOL: f64 = 0.05;
/// Reprojection difference (mm) under which two solutions count as tied.
pub const TIE_BREAK_RMS_MM: f64 = 1e-12;
/// Gauss-Newton refinement iteration cap.
pub const REFINE_MAX_ITERS: usize = 50;
/// Gauss-Newton refinement step-norm termination.
pub const REFINE_STEP_TOL: f64 = 1e-12;
/// Sanity bound on normalized image coordinates.
pub const IMAGE_COORD_BOUND: f64 = 10.0;

#[derive(Debug, Error)]
pub enum PnpError {
    #[error("need at least {need} correspondences, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("non-finite or out-of-range correspondence at index {0}")]
    BadCorrespondence(usize),
    #[error("world points are not coplanar enough for a plane-based solve")]
    NotPlanar,
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("no candidate satisfied cheirality")]
    NoValidSolution,
}

/// One 3D-2D correspondence: world meters against normalized (dimensionless)
/// image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub world: Vec3,
    pub image: [f64; 2],
}

/// Which solver produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Epnp,
    Ippe,
    Rpnp,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Epnp => "epnp",
            SolverKind::Ippe => "ippe",
            SolverKind::Rpnp => "rpnp",
        })
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "epnp" => Ok(SolverKind::Epnp),
            "ippe" => Ok(SolverKind::Ippe),
            "rpnp" => Ok(SolverKind::Rpnp),
            other => Err(format!("unknown solver {other:?}")),
        }
    }
}

/// Camera-frame pose estimate: X_cam = R * X_world + t.
#[derive(Debug, Clone)]
pub struct PnPSolution {
    pub rotation: RotationMatrix,
    /// Camera-frame translation, meters.
    pub translation: Vec3,
    /// Root-mean-square image residual, detector millimeters.
    pub reproj_rms_mm: f64,
    pub method: SolverKind,
    pub refined: bool,
}

impl PnPSolution {
    /// Receiver position in the world frame: C = -Rᵀ t.
    pub fn receiver_position(&self) -> Vec3 {
        let c = self.rotation.transpose().apply(self.translation);
        [-c[0], -c[1], -c[2]]
    }
}

/// World-frame pose from a camera-frame solution.
pub fn solution_to_pose(sol: &PnPSolution) -> Pose {
    let c = sol.receiver_position();
    let e = euler_from_rot(&sol.rotation);
    Pose::new(c[0], c[1], c[2], e.alpha, e.beta, e.gamma)
}

pub(crate) fn validate(corr: &[Correspondence]) -> Result<(), PnpError> {
    if corr.len() < 4 {
        return Err(PnpError::TooFewPoints {
            need: 4,
            got: corr.len(),
        });
    }
    for (i, c) in corr.iter().enumerate() {
        let finite =
            c.world.iter().all(|v| v.is_finite()) && c.image.iter().all(|v| v.is_finite());
        let bounded =
            c.image[0].abs() < IMAGE_COORD_BOUND && c.image[1].abs() < IMAGE_COORD_BOUND;
        if !finite || !bounded {
            return Err(PnpError::BadCorrespondence(i));
        }
    }
    Ok(())
}

/// Normalized-coordinate reprojection rms; `None` when a point lands behind
/// the camera (cheirality failure).
pub(crate) fn reproj_rms_norm(
    rotation: &RotationMatrix,
    translation: Vec3,
    corr: &[Correspondence],
) -> Option<f64> {
    let mut acc = 0.0;
    for c in corr {
        let q = vec3::add(rotation.apply(c.world), translation);
        if q[2] <= 0.0 {
            return None;
        }
        let du = q[0] / q[2] - c.image[0];
        let dv = q[1] / q[2] - c.image[1];
        acc += du * du + dv * dv;
    }
    Some((acc / corr.len() as f64).sqrt())
}

/// Least-squares translation for a fixed rotation, from the homogeneous
/// projection equations (linear in t).
pub(crate) fn translation_for(rotation: &RotationMatrix, corr: &[Correspondence]) -> Vec3 {
    use crate::numerics::{lstsq, Matrix};
    let n = corr.len();
    let mut a = Matrix::zeros(2 * n, 3);
    let mut b = vec![0.0; 2 * n];
    for (i, c) in corr.iter().enumerate() {
        let y = rotation.apply(c.world);
        let (u, v) = (c.image[0], c.image[1]);
        a[(2 * i, 0)] = 1.0;
        a[(2 * i, 2)] = -u;
        b[2 * i] = u * y[2] - y[0];
        a[(2 * i + 1, 1)] = 1.0;
        a[(2 * i + 1, 2)] = -v;
        b[2 * i + 1] = v * y[2] - y[1];
    }
    let t = lstsq(&a, &b);
    [t[0], t[1], t[2]]
}

/// Orders candidates by reprojection residual; residual ties break toward
/// the yaw closest to a tracked previous estimate when one is supplied, and
/// toward the smaller |pitch| otherwise.
pub fn rank_candidates(cands: &mut [PnPSolution], tracking_gamma: Option<f64>) {
    let tie_key = |s: &PnPSolution| -> f64 {
        let e = euler_from_rot(&s.rotation);
        match tracking_gamma {
            Some(prev) => wrap_angle(e.gamma - prev).abs(),
            None => e.beta.abs(),
        }
    };
    cands.sort_by(|a, b| {
        if (a.reproj_rms_mm - b.reproj_rms_mm).abs() < TIE_BREAK_RMS_MM {
            tie_key(a).partial_cmp(&tie_key(b)).unwrap()
        } else {
            a.reproj_rms_mm.partial_cmp(&b.reproj_rms_mm).unwrap()
        }
    });
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::geometry::{project, world_to_cam, BeaconSet, Pose};

    pub const H_AP_MM: f64 = 2.55;

    /// Exact correspondences for a pose against a beacon set.
    pub fn project_exact(pose: &Pose, beacons: &BeaconSet) -> Vec<Correspondence> {
        beacons
            .beacons()
            .iter()
            .map(|b| {
                let cam = world_to_cam(pose, b.position);
                let img = project(cam, H_AP_MM).unwrap();
                Correspondence {
                    world: b.position,
                    image: [img.x_mm / H_AP_MM, img.y_mm / H_AP_MM],
                }
            })
            .collect()
    }

    pub fn pose_error(sol: &PnPSolution, truth: &Pose) -> (f64, f64) {
        let est = solution_to_pose(sol);
        let dp = [
            est.x - truth.x,
            est.y - truth.y,
            est.z - truth.z,
        ];
        let pos = (dp[0] * dp[0] + dp[1] * dp[1] + dp[2] * dp[2]).sqrt();
        let ang = [
            wrap_angle(est.alpha - truth.alpha).abs(),
            wrap_angle(est.beta - truth.beta).abs(),
            wrap_angle(est.gamma - truth.gamma).abs(),
        ]
        .into_iter()
        .fold(0.0f64, f64::max);
        (pos, ang)
    }

    /// Deterministic pseudo-random pose on the floor of the reference room.
    pub fn sample_pose(state: &mut u64) -> Pose {
        let mut next = || {
            *state ^= *state << 13;
            *state ^= *state >> 7;
            *state ^= *state << 17;
            *state as f64 / u64::MAX as f64
        };
        let x = next() * 2.0 - 1.0;
        let y = next() * 2.0 - 1.0;
        let g = (next() * 2.0 - 1.0) * std::f64::consts::PI;
        Pose::new(x, y, 0.0, 0.0, 0.0, g)
    }

    pub fn solution_from_pose(pose: &Pose, method: SolverKind) -> PnPSolution {
        let r = pose.rotation();
        let rc = r.apply(pose.position());
        PnPSolution {
            rotation: r,
            translation: [-rc[0], -rc[1], -rc[2]],
            reproj_rms_mm: 0.0,
            method,
            refined: false,
        }
    }
}
