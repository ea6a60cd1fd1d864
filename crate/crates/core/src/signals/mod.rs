//! Coded-emission synthesis and matched-filter reception.
//!
//! Each beacon transmits a dedicated +/-1 spreading code (Kasami or Gold
//! family). The receiver acquires three channels (sum, bottom-minus-top,
//! left-minus-right), correlates each against the known codes and takes the
//! channel ratios at the sum-channel correlation peak. Those ratios feed the
//! calibrated map in [`crate::qada`].

mod codes;
mod correlate;
mod io;
mod synth;

pub use codes::{gen_codes, normalized_cross_correlation, CodeBook, CodeFamily};
pub use correlate::{correlate, extract_ratios, CorrelationTriple, RatioEstimate, RatioRule};
pub use io::{read_capture, write_capture, CaptureMeta, CodeBookDescriptor};
pub use synth::{synthesize_capture, AmplitudeModel};

use thiserror::Error;

/// Peak-dominance ratio below which a detection is flagged low-confidence.
pub const PEAK_DOMINANCE_MIN: f64 = 1.2;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("capture shorter than one code period ({capture} < {period} samples)")]
    TooShort { capture: usize, period: usize },
    #[error("correlation sequences have mismatched lengths")]
    LengthMismatch,
    #[error("detection failure: {0}")]
    DetectionFailure(&'static str),
    #[error("no code assigned to beacon id {0}")]
    MissingCode(u32),
    #[error("beacon set is empty")]
    NoBeacons,
    #[error("beacon {id} behind camera (z_cam = {z} m)")]
    BehindCamera { id: u32, z: f64 },
    #[error("capture i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("capture file malformed: {0}")]
    Malformed(String),
}

/// Three sampled receiver channels plus the synthesis provenance needed to
/// replay them.
#[derive(Debug, Clone, PartialEq)]
pub struct QadaCapture {
    pub v_sum: Vec<f64>,
    pub v_bt: Vec<f64>,
    pub v_lr: Vec<f64>,
    /// Configured signal-to-noise ratio on `v_sum`; infinite means no noise.
    pub snr_db: f64,
    /// Seed of the noise stream that produced this capture.
    pub seed: u64,
    /// Beacons whose spot overflowed the detector and were clamped.
    pub out_of_field: Vec<u32>,
}

impl QadaCapture {
    pub fn sample_count(&self) -> usize {
        self.v_sum.len()
    }
}
