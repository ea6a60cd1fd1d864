//! World/camera frames, Euler angles and the pin-hole projection.
//!
//! Conventions: the receiver pose holds its world position C and intrinsic
//! rotation R = Rx(alpha) * Ry(beta) * Rz(gamma). Camera coordinates of a
//! world point are X_cam = R * (X - C), so the camera z axis points from the
//! floor receiver toward the ceiling beacons when the orientation is
//! identity. Projection maps meters to millimeters on the detector plane
//! through the aperture height h_ap.

use crate::numerics::vec3::{self, Mat3, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Orthonormality / determinant tolerance for [`RotationMatrix`].
pub const ROTATION_TOL: f64 = 1e-10;
/// |cos(beta)| below this means gimbal lock in [`euler_from_rot`].
pub const GIMBAL_LOCK_COS: f64 = 1e-9;
/// Beacon sets flagged planar must have equal z within this (meters).
pub const PLANAR_Z_TOL_M: f64 = 1e-9;
/// z_cam below this (meters) is a near-singular projection.
pub const PROJECT_MIN_Z_M: f64 = 1e-9;
/// Default detector half-extent (mm) used for image-point sanity checks.
pub const DETECTOR_HALF_EXTENT_MM: f64 = 10.0;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("rotation matrix is not orthonormal with det +1")]
    InvalidRotation,
    #[error("beacon behind camera (z_cam = {0} m)")]
    BehindCamera(f64),
    #[error("projection nearly singular (z_cam = {0} m)")]
    NearSingular(f64),
    #[error("beacon ids must be unique")]
    DuplicateBeaconId,
    #[error("planar beacon set has unequal z coordinates")]
    NotPlanar,
    #[error("need at least {need} beacons, got {got}")]
    TooFewBeacons { need: usize, got: usize },
    #[error("length mismatch between beacons and observations")]
    LengthMismatch,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Receiver state: world position in meters, orientation in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, alpha: f64, beta: f64, gamma: f64) -> Self {
        Pose {
            x,
            y,
            z,
            alpha: wrap_angle(alpha),
            beta: wrap_angle(beta),
            gamma: wrap_angle(gamma),
        }
    }

    pub fn position(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    pub fn rotation(&self) -> RotationMatrix {
        rot_from_euler(self.alpha, self.beta, self.gamma)
    }
}

/// A validated member of SO(3), row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub fn try_new(m: Mat3) -> Result<Self, GeometryError> {
        let rt = vec3::transpose(&m);
        let p = vec3::mat_mul(&rt, &m);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                if (p[i][j] - want).abs() > ROTATION_TOL {
                    return Err(GeometryError::InvalidRotation);
                }
            }
        }
        if (vec3::det(&m) - 1.0).abs() > ROTATION_TOL {
            return Err(GeometryError::InvalidRotation);
        }
        Ok(RotationMatrix(m))
    }

    pub fn identity() -> Self {
        RotationMatrix(vec3::identity())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        vec3::mat_vec(&self.0, v)
    }

    pub fn transpose(&self) -> RotationMatrix {
        RotationMatrix(vec3::transpose(&self.0))
    }

    pub fn compose(&self, other: &RotationMatrix) -> RotationMatrix {
        RotationMatrix(vec3::mat_mul(&self.0, &other.0))
    }
}

/// One infrared transmitter at a known world position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beacon {
    pub id: u32,
    pub position: Vec3,
}

/// The ordered transmitter constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct BeaconSet {
    beacons: Vec<Beacon>,
    planar: bool,
}

impl BeaconSet {
    pub fn new(beacons: Vec<Beacon>) -> Result<Self, GeometryError> {
        if beacons.len() < 4 {
            return Err(GeometryError::TooFewBeacons {
                need: 4,
                got: beacons.len(),
            });
        }
        for b in &beacons {
            if !b.position.iter().all(|v| v.is_finite()) {
                return Err(GeometryError::NonFinite("beacon position"));
            }
        }
        let mut ids: Vec<u32> = beacons.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != beacons.len() {
            return Err(GeometryError::DuplicateBeaconId);
        }
        let z0 = beacons[0].position[2];
        let planar = beacons
            .iter()
            .all(|b| (b.position[2] - z0).abs() <= PLANAR_Z_TOL_M);
        Ok(BeaconSet { beacons, planar })
    }

    /// Square constellation of side `side` centered on (0, 0) at `height`,
    /// ids 0..3 counter-clockwise from the (-,-) corner.
    pub fn ceiling_square(side: f64, height: f64) -> Self {
        let h = side / 2.0;
        BeaconSet::new(vec![
            Beacon {
                id: 0,
                position: [-h, -h, height],
            },
            Beacon {
                id: 1,
                position: [h, -h, height],
            },
            Beacon {
                id: 2,
                position: [h, h, height],
            },
            Beacon {
                id: 3,
                position: [-h, h, height],
            },
        ])
        .expect("square constellation is valid")
    }

    pub fn beacons(&self) -> &[Beacon] {
        &self.beacons
    }

    pub fn len(&self) -> usize {
        self.beacons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beacons.is_empty()
    }

    pub fn is_planar(&self) -> bool {
        self.planar
    }

    pub fn by_id(&self, id: u32) -> Option<&Beacon> {
        self.beacons.iter().find(|b| b.id == id)
    }
}

/// Light-spot position on the detector plane, millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub x_mm: f64,
    pub y_mm: f64,
}

/// R = Rx(alpha) * Ry(beta) * Rz(gamma); gamma is the rotation about the
/// world z axis, the only one exercised by a floor-mounted receiver.
pub fn rot_from_euler(alpha: f64, beta: f64, gamma: f64) -> RotationMatrix {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    RotationMatrix([
        [cb * cg, -cb * sg, sb],
        [ca * sg + sa * sb * cg, ca * cg - sa * sb * sg, -sa * cb],
        [sa * sg - ca * sb * cg, sa * cg + ca * sb * sg, ca * cb],
    ])
}

/// Euler angles recovered from a rotation matrix.
#[derive(Debug, Clone, Copy)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Set when |cos(beta)| < GIMBAL_LOCK_COS; alpha is pinned to 0 there.
    pub gimbal_lock: bool,
}

pub fn euler_from_rot(r: &RotationMatrix) -> EulerAngles {
    let m = r.matrix();
    let sb = m[0][2].clamp(-1.0, 1.0);
    let beta = sb.asin();
    if beta.cos().abs() < GIMBAL_LOCK_COS {
        // alpha and gamma degenerate; pin alpha = 0
        EulerAngles {
            alpha: 0.0,
            beta,
            gamma: m[1][0].atan2(m[1][1]),
            gimbal_lock: true,
        }
    } else {
        EulerAngles {
            alpha: (-m[1][2]).atan2(m[2][2]),
            beta,
            gamma: (-m[0][1]).atan2(m[0][0]),
            gimbal_lock: false,
        }
    }
}

/// X_cam = R * (p - C).
pub fn world_to_cam(pose: &Pose, p: Vec3) -> Vec3 {
    pose.rotation().apply(vec3::sub(p, pose.position()))
}

/// Pin-hole projection: (x_r, y_r) = h_ap * (x_cam, y_cam) / z_cam, in mm.
pub fn project(p_cam: Vec3, h_ap_mm: f64) -> Result<ImagePoint, GeometryError> {
    let z = p_cam[2];
    if z <= 0.0 {
        return Err(GeometryError::BehindCamera(z));
    }
    if z < PROJECT_MIN_Z_M {
        return Err(GeometryError::NearSingular(z));
    }
    Ok(ImagePoint {
        x_mm: h_ap_mm * p_cam[0] / z,
        y_mm: h_ap_mm * p_cam[1] / z,
    })
}

/// Root-mean-square image residual (mm) of a camera-frame solution
/// X_cam = R * X_world + t against observed image points.
pub fn reproj_rms(
    rotation: &RotationMatrix,
    translation: Vec3,
    beacons: &BeaconSet,
    observed: &[ImagePoint],
    h_ap_mm: f64,
) -> Result<f64, GeometryError> {
    if beacons.len() != observed.len() {
        return Err(GeometryError::LengthMismatch);
    }
    let mut acc = 0.0;
    for (b, obs) in beacons.beacons().iter().zip(observed) {
        let cam = vec3::add(rotation.apply(b.position), translation);
        let proj = project(cam, h_ap_mm)?;
        let dx = proj.x_mm - obs.x_mm;
        let dy = proj.y_mm - obs.y_mm;
        acc += dx * dx + dy * dy;
    }
    Ok((acc / beacons.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn euler_identity() {
        let r = rot_from_euler(0.0, 0.0, 0.0);
        assert_eq!(r, RotationMatrix::identity());
        let e = euler_from_rot(&r);
        assert_eq!((e.alpha, e.beta, e.gamma), (0.0, 0.0, 0.0));
    }

    #[test]
    fn z_quarter_turn_sends_x_to_y() {
        let r = rot_from_euler(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let v = r.apply([1.0, 0.0, 0.0]);
        assert_relative_eq!(v[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(v[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn pure_z_rotation_extracts_gamma_only() {
        let g = 1.234;
        let e = euler_from_rot(&rot_from_euler(0.0, 0.0, g));
        assert_relative_eq!(e.alpha, 0.0, epsilon = 1e-12);
        assert_relative_eq!(e.beta, 0.0, epsilon = 1e-12);
        assert_relative_eq!(e.gamma, g, epsilon = 1e-12);
    }

    #[test]
    fn gimbal_lock_flagged_and_consistent() {
        let r = rot_from_euler(0.4, std::f64::consts::FRAC_PI_2, 0.3);
        let e = euler_from_rot(&r);
        assert!(e.gimbal_lock);
        assert_eq!(e.alpha, 0.0);
        let back = rot_from_euler(e.alpha, e.beta, e.gamma);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(back.matrix()[i][j], r.matrix()[i][j], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn world_to_cam_basics() {
        let pose = Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(world_to_cam(&pose, [0.0, 0.0, 3.4]), [0.0, 0.0, 3.4]);

        let pose = Pose::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        let c = world_to_cam(&pose, [1.6, 1.0, 3.4]);
        assert_relative_eq!(c[0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(c[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(c[2], 3.4, epsilon = 1e-15);
    }

    #[test]
    fn yaw_rotates_camera_points() {
        let g = 120f64.to_radians();
        let pose0 = Pose::new(0.3, -0.2, 0.0, 0.0, 0.0, 0.0);
        let pose1 = Pose::new(0.3, -0.2, 0.0, 0.0, 0.0, g);
        let p = [0.6, 0.6, 3.4];
        let rz = rot_from_euler(0.0, 0.0, g);
        let want = rz.apply(world_to_cam(&pose0, p));
        let got = world_to_cam(&pose1, p);
        for k in 0..3 {
            assert_relative_eq!(got[k], want[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn projection_cases() {
        let p = project([0.0, 0.0, 3.4], 2.55).unwrap();
        assert_eq!((p.x_mm, p.y_mm), (0.0, 0.0));

        // direct evaluation: 2.55 * 0.6 / 3.4 = 0.45
        let p = project([0.6, 0.0, 3.4], 2.55).unwrap();
        assert_relative_eq!(p.x_mm, 0.45, epsilon = 1e-12);
        assert_relative_eq!(p.y_mm, 0.0, epsilon = 1e-12);

        // doubling z halves both coordinates
        let a = project([0.5, -0.3, 2.0], 2.55).unwrap();
        let b = project([0.5, -0.3, 4.0], 2.55).unwrap();
        assert_relative_eq!(a.x_mm, 2.0 * b.x_mm, epsilon = 1e-12);
        assert_relative_eq!(a.y_mm, 2.0 * b.y_mm, epsilon = 1e-12);

        assert!(matches!(
            project([0.1, 0.1, -1.0], 2.55),
            Err(GeometryError::BehindCamera(_))
        ));
        assert!(matches!(
            project([0.1, 0.1, 1e-12], 2.55),
            Err(GeometryError::NearSingular(_))
        ));
    }

    #[test]
    fn reproj_rms_cases() {
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let pose = Pose::new(0.2, -0.1, 0.0, 0.0, 0.0, 0.5);
        let r = pose.rotation();
        let t = {
            let c = pose.position();
            let rc = r.apply(c);
            [-rc[0], -rc[1], -rc[2]]
        };
        let obs: Vec<ImagePoint> = beacons
            .beacons()
            .iter()
            .map(|b| project(world_to_cam(&pose, b.position), 2.55).unwrap())
            .collect();
        let rms = reproj_rms(&r, t, &beacons, &obs, 2.55).unwrap();
        assert!(rms < 1e-12);

        // shifting every observation by +1 mm in x gives exactly 1 mm rms
        let shifted: Vec<ImagePoint> = obs
            .iter()
            .map(|p| ImagePoint {
                x_mm: p.x_mm + 1.0,
                y_mm: p.y_mm,
            })
            .collect();
        let rms = reproj_rms(&r, t, &beacons, &shifted, 2.55).unwrap();
        assert_relative_eq!(rms, 1.0, epsilon = 1e-12);

        // hand-computed rms for an asymmetric perturbation
        let perturbed: Vec<ImagePoint> = obs
            .iter()
            .enumerate()
            .map(|(i, p)| ImagePoint {
                x_mm: p.x_mm + 0.1 * (i as f64 + 1.0),
                y_mm: p.y_mm - 0.05 * (i as f64),
            })
            .collect();
        let rms = reproj_rms(&r, t, &beacons, &perturbed, 2.55).unwrap();
        let mut acc = 0.0;
        for i in 0..4 {
            let dx = 0.1 * (i as f64 + 1.0);
            let dy = -0.05 * (i as f64);
            acc += dx * dx + dy * dy;
        }
        assert_relative_eq!(rms, (acc / 4.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn beacon_set_validation() {
        assert!(matches!(
            BeaconSet::new(vec![Beacon {
                id: 0,
                position: [0.0, 0.0, 3.4]
            }]),
            Err(GeometryError::TooFewBeacons { .. })
        ));
        let dup = vec![
            Beacon {
                id: 0,
                position: [0.0, 0.0, 3.4],
            },
            Beacon {
                id: 0,
                position: [1.0, 0.0, 3.4],
            },
            Beacon {
                id: 1,
                position: [0.0, 1.0, 3.4],
            },
            Beacon {
                id: 2,
                position: [1.0, 1.0, 3.4],
            },
        ];
        assert!(matches!(
            BeaconSet::new(dup),
            Err(GeometryError::DuplicateBeaconId)
        ));
        let set = BeaconSet::ceiling_square(1.2, 3.4);
        assert!(set.is_planar());
        assert_eq!(set.len(), 4);
    }

    proptest! {
        #[test]
        fn euler_round_trip(
            a in -1.4f64..1.4,
            b in -1.4f64..1.4,
            g in -3.1f64..3.1,
        ) {
            let r = rot_from_euler(a, b, g);
            let e = euler_from_rot(&r);
            prop_assert!(!e.gimbal_lock);
            prop_assert!((e.alpha - a).abs() < 1e-10);
            prop_assert!((e.beta - b).abs() < 1e-10);
            prop_assert!((e.gamma - g).abs() < 1e-10);
        }

        #[test]
        fn z_rotations_compose_additively(g1 in -3.0f64..3.0, g2 in -3.0f64..3.0) {
            let r = rot_from_euler(0.0, 0.0, g1).compose(&rot_from_euler(0.0, 0.0, g2));
            let rs = rot_from_euler(0.0, 0.0, g1 + g2);
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((r.matrix()[i][j] - rs.matrix()[i][j]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn rigid_transform_preserves_distances(
            x in -1.0f64..1.0, y in -1.0f64..1.0,
            a in -0.5f64..0.5, b in -0.5f64..0.5, g in -3.0f64..3.0,
        ) {
            let pose = Pose::new(x, y, 0.0, a, b, g);
            let p = [0.6, -0.6, 3.4];
            let q = [-0.6, 0.6, 3.4];
            let d_world = vec3::norm(vec3::sub(p, q));
            let d_cam = vec3::norm(vec3::sub(world_to_cam(&pose, p), world_to_cam(&pose, q)));
            prop_assert!((d_world - d_cam).abs() < 1e-12);
        }

        #[test]
        fn projection_scale_invariance(
            xc in -0.5f64..0.5, yc in -0.5f64..0.5, k in 0.1f64..10.0,
        ) {
            let p1 = project([xc, yc, 3.4], 2.55).unwrap();
            let p2 = project([xc * k, yc * k, 3.4 * k], 2.55).unwrap();
            prop_assert!((p1.x_mm - p2.x_mm).abs() < 1e-12);
            prop_assert!((p1.y_mm - p2.y_mm).abs() < 1e-12);
        }
    }
}
