//! Indoor positioning with infrared LED beacons and a quadrant-photodiode
//! receiver behind a square aperture.
//!
//! The receiver behaves as a pin-hole camera: each ceiling beacon projects a
//! light spot whose position on the four-quadrant detector is recovered from
//! coded-signal correlation ratios. With four known beacon positions the
//! receiver pose (x, y, z, roll/pitch/yaw) follows from a Perspective-n-Point
//! solve. The crate covers the whole chain:
//!
//! - [`numerics`]: dense linear algebra and polynomial root finding used by
//!   the solvers (no external math dependencies).
//! - [`geometry`]: frames, Euler angles, pin-hole projection.
//! - [`qada`]: the quadrant detector model, its calibrated distortion and the
//!   exact inverse.
//! - [`signals`]: CDMA code generation, capture synthesis, matched filtering
//!   and ratio extraction.
//! - [`pnp`]: EPnP, IPPE and RPnP solvers plus Gauss-Newton refinement.
//! - [`calib`]: receiver calibration from ratio observations at known poses.
//! - [`experiments`]: grid / nine-point / robustness Monte Carlo studies and
//!   their CSV reports.
//! - [`pipeline`]: glue running capture -> image points -> pose.

pub mod calib;
pub mod experiments;
pub mod geometry;
pub mod numerics;
pub mod pipeline;
pub mod pnp;
pub mod qada;
pub mod signals;
