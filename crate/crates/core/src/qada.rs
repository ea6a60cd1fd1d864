//! Quadrant-photodiode aperture model.
//!
//! A square light spot of side `l` lands on a four-quadrant detector; the
//! fraction of power per quadrant encodes the spot position. Measured
//! correlation-peak ratios map to detector-plane image points through a
//! calibrated linear distortion (focal adjustment, aperture misalignment and
//! optical-center offset), and that map has an exact algebraic inverse used
//! by the simulator.
//!
//! Sign map: `p_x` is left-minus-right, `p_y` is bottom-minus-top, both
//! normalized by the sum channel; with an ideal receiver this makes
//! `p_x = -2 x_r / l` and `p_y = -2 y_r / l`.

use crate::geometry::ImagePoint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QadaError {
    #[error("spot center ({x_mm}, {y_mm}) mm is outside the detector field")]
    OutOfField { x_mm: f64, y_mm: f64 },
    #[error("invalid calibration: {0}")]
    InvalidParams(String),
}

/// Receiver constants of the ratio-to-image-point map.
///
/// Serialized as a flat `key = value` block with exactly these field names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    /// Aperture height over the detector; plays the focal length (mm).
    pub h_ap_mm: f64,
    /// Focal adjustment ratio (actual / nominal aperture height).
    pub lambda: f64,
    /// Aperture misalignment (radians).
    pub delta_rad: f64,
    /// Aperture side length (mm).
    pub l_mm: f64,
    /// Optical-center offset (mm).
    pub c_x_mm: f64,
    /// Optical-center offset (mm).
    pub c_y_mm: f64,
}

impl CalibrationParams {
    /// Undistorted receiver: unit focal adjustment, no misalignment,
    /// centered optics.
    pub fn ideal(h_ap_mm: f64, l_mm: f64) -> Self {
        CalibrationParams {
            h_ap_mm,
            lambda: 1.0,
            delta_rad: 0.0,
            l_mm,
            c_x_mm: 0.0,
            c_y_mm: 0.0,
        }
    }

    /// Constants of the calibrated reference receiver.
    pub fn reference() -> Self {
        CalibrationParams {
            h_ap_mm: 2.55,
            lambda: 1.25,
            delta_rad: 0.1,
            l_mm: 2.75,
            c_x_mm: 0.055,
            c_y_mm: -0.035,
        }
    }

    pub fn validate(&self) -> Result<(), QadaError> {
        if !(self.h_ap_mm > 0.0) {
            return Err(QadaError::InvalidParams(format!(
                "h_ap_mm must be positive, got {}",
                self.h_ap_mm
            )));
        }
        if !(self.l_mm > 0.0) {
            return Err(QadaError::InvalidParams(format!(
                "l_mm must be positive, got {}",
                self.l_mm
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(QadaError::InvalidParams(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.delta_rad.abs() < 0.5) {
            return Err(QadaError::InvalidParams(format!(
                "|delta_rad| must be below 0.5, got {}",
                self.delta_rad
            )));
        }
        if ![self.c_x_mm, self.c_y_mm].iter().all(|v| v.is_finite()) {
            return Err(QadaError::InvalidParams("non-finite center".into()));
        }
        Ok(())
    }

    /// `key = value` text block.
    pub fn to_config_block(&self) -> String {
        toml::to_string(self).expect("calibration serializes")
    }

    pub fn from_config_block(text: &str) -> Result<Self, QadaError> {
        let params: CalibrationParams =
            toml::from_str(text).map_err(|e| QadaError::InvalidParams(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }
}

/// Correlation-peak ratio pair; nominal range [-1, 1] each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPair {
    pub p_x: f64,
    pub p_y: f64,
}

impl RatioPair {
    /// True when either ratio leaves the nominal range, meaning the spot
    /// overflows the detector quadrants.
    pub fn is_overflow(&self) -> bool {
        self.p_x.abs() > 1.0 || self.p_y.abs() > 1.0
    }
}

/// Power fraction per quadrant, ordered top-right, top-left, bottom-left,
/// bottom-right. Fractions are in [0, 1] and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrantFractions {
    pub f: [f64; 4],
    /// Set when the spot hangs over the quadrant boundary and the fractions
    /// were clamped (saturation).
    pub clamped: bool,
}

/// Power split of a uniform square spot of side `l_mm` centered at
/// `spot_center`. Centers beyond l/2 clamp with a saturation flag; beyond a
/// full side length the spot has left the detector and that is an error.
pub fn quadrant_fractions(
    spot_center: ImagePoint,
    l_mm: f64,
) -> Result<QuadrantFractions, QadaError> {
    let (x, y) = (spot_center.x_mm, spot_center.y_mm);
    if x.abs() > l_mm || y.abs() > l_mm {
        return Err(QadaError::OutOfField { x_mm: x, y_mm: y });
    }
    let half = l_mm / 2.0;
    let clamped = x.abs() > half || y.abs() > half;
    let f_right = ((half + x) / l_mm).clamp(0.0, 1.0);
    let f_top = ((half + y) / l_mm).clamp(0.0, 1.0);
    Ok(QuadrantFractions {
        f: [
            f_right * f_top,
            (1.0 - f_right) * f_top,
            (1.0 - f_right) * (1.0 - f_top),
            f_right * (1.0 - f_top),
        ],
        clamped,
    })
}

/// Ratio pair an ideal receiver would report for the given quadrant split:
/// left-minus-right and bottom-minus-top over the (unit) sum.
pub fn ideal_ratios(q: &QuadrantFractions) -> RatioPair {
    let [f1, f2, f3, f4] = q.f;
    RatioPair {
        p_x: (f2 + f3) - (f1 + f4),
        p_y: (f3 + f4) - (f1 + f2),
    }
}

/// Calibrated ratio-to-image-point map:
/// (x_r, y_r) = (-l/2) * lambda * M * (p_x, p_y) + (c_x, c_y)
/// with M = [[1, delta], [-delta, 1]].
pub fn image_point_from_ratios(p: RatioPair, cal: &CalibrationParams) -> ImagePoint {
    let g = -cal.l_mm / 2.0 * cal.lambda;
    ImagePoint {
        x_mm: g * (p.p_x + cal.delta_rad * p.p_y) + cal.c_x_mm,
        y_mm: g * (-cal.delta_rad * p.p_x + p.p_y) + cal.c_y_mm,
    }
}

/// Exact inverse of [`image_point_from_ratios`]; the simulator uses it to
/// decide what ratios the receiver hardware would have produced for a true
/// image point.
pub fn ratios_from_image_point(point: ImagePoint, cal: &CalibrationParams) -> RatioPair {
    let dx = point.x_mm - cal.c_x_mm;
    let dy = point.y_mm - cal.c_y_mm;
    let g = -2.0 / (cal.l_mm * cal.lambda);
    let d = cal.delta_rad;
    let det = 1.0 + d * d;
    // inv([[1, d], [-d, 1]]) = [[1, -d], [d, 1]] / (1 + d^2)
    RatioPair {
        p_x: g * (dx - d * dy) / det,
        p_y: g * (d * dx + dy) / det,
    }
}
