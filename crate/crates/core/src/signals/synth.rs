//! Capture synthesis: beacons emit their codes, the quadrant receiver turns
//! each spot into channel gains, and Gaussian noise sets the configured SNR.

use super::{CodeBook, QadaCapture, SignalError};
use crate::geometry::{project, world_to_cam, Beacon, Pose};
use crate::qada::{ratios_from_image_point, CalibrationParams};
use crate::numerics::vec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Received optical amplitude per beacon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "model")]
pub enum AmplitudeModel {
    /// Every beacon arrives at unit amplitude.
    Unit,
    /// cos^m(emission) * cos(incidence) / d^2, normalized so the strongest
    /// beacon has unit amplitude.
    Lambertian { order: f64 },
}

impl Default for AmplitudeModel {
    fn default() -> Self {
        AmplitudeModel::Lambertian { order: 1.0 }
    }
}

/// Synthesizes the three receiver channels for the given emitting beacons.
///
/// Per beacon: project the true image point, invert the calibrated ratio map
/// to get the ratios the hardware would produce, and add the code waveform
/// with channel gains (1, p_y, p_x) scaled by the received amplitude. Ratios
/// beyond the nominal range are clamped and the beacon is flagged
/// out-of-field. White Gaussian noise is added per channel so that the
/// noiseless `v_sum` power over the noise power equals `snr_db`
/// (`f64::INFINITY` disables noise). Deterministic for a fixed seed.
pub fn synthesize_capture(
    beacons: &[Beacon],
    pose: &Pose,
    cal: &CalibrationParams,
    book: &CodeBook,
    snr_db: f64,
    amp_model: AmplitudeModel,
    seed: u64,
) -> Result<QadaCapture, SignalError> {
    if beacons.is_empty() {
        return Err(SignalError::NoBeacons);
    }
    let n = book.period_samples();

    // received amplitudes, normalized to a unit maximum
    let mut amps = Vec::with_capacity(beacons.len());
    for b in beacons {
        let cam = world_to_cam(pose, b.position);
        if cam[2] <= 0.0 {
            return Err(SignalError::BehindCamera {
                id: b.id,
                z: cam[2],
            });
        }
        let a = match amp_model {
            AmplitudeModel::Unit => 1.0,
            AmplitudeModel::Lambertian { order } => {
                let d = vec3::norm(cam);
                let dz_world = b.position[2] - pose.z;
                let cos_emission = (dz_world / d).max(0.0);
                let cos_incidence = (cam[2] / d).max(0.0);
                cos_emission.powf(order) * cos_incidence / (d * d)
            }
        };
        amps.push((a, cam));
    }
    let a_max = amps.iter().fold(0.0f64, |m, (a, _)| m.max(*a));
    if a_max <= 0.0 {
        return Err(SignalError::DetectionFailure("no received power"));
    }

    let mut v_sum = vec![0.0; n];
    let mut v_bt = vec![0.0; n];
    let mut v_lr = vec![0.0; n];
    let mut out_of_field = Vec::new();

    for (b, (a, cam)) in beacons.iter().zip(&amps) {
        let wave = book
            .upsampled(b.id)
            .ok_or(SignalError::MissingCode(b.id))?;
        let amp = a / a_max;
        let point = project(*cam, cal.h_ap_mm).map_err(|_| SignalError::BehindCamera {
            id: b.id,
            z: cam[2],
        })?;
        let mut ratios = ratios_from_image_point(point, cal);
        if ratios.is_overflow() {
            out_of_field.push(b.id);
            ratios.p_x = ratios.p_x.clamp(-1.0, 1.0);
            ratios.p_y = ratios.p_y.clamp(-1.0, 1.0);
        }
        for (i, &w) in wave.iter().enumerate() {
            v_sum[i] += amp * w;
            v_bt[i] += amp * ratios.p_y * w;
            v_lr[i] += amp * ratios.p_x * w;
        }
    }

    if snr_db.is_finite() {
        let p_signal = v_sum.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let sigma = (p_signal / 10f64.powf(snr_db / 10.0)).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for channel in [&mut v_sum, &mut v_bt, &mut v_lr] {
            for v in channel.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v += sigma * g;
            }
        }
    }

    Ok(QadaCapture {
        v_sum,
        v_bt,
        v_lr,
        snr_db,
        seed,
        out_of_field,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{correlate, extract_ratios, gen_codes, CodeFamily, RatioRule};
    use crate::geometry::BeaconSet;

    fn small_book() -> CodeBook {
        gen_codes(CodeFamily::Kasami, 63, 4, 11)
            .unwrap()
            .with_samples_per_chip(4)
            .unwrap()
    }

    #[test]
    fn noiseless_loopback_recovers_ratios() {
        let book = small_book();
        let cal = CalibrationParams::reference();
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let pose = Pose::new(0.2, -0.3, 0.0, 0.0, 0.0, 0.7);
        for b in beacons.beacons() {
            let capture = synthesize_capture(
                std::slice::from_ref(b),
                &pose,
                &cal,
                &book,
                f64::INFINITY,
                AmplitudeModel::default(),
                0,
            )
            .unwrap();
            let tri = correlate(&capture, book.code(b.id).unwrap(), book.samples_per_chip).unwrap();
            let est = extract_ratios(&tri, book.samples_per_chip, RatioRule::SignedPeak).unwrap();
            let truth = ratios_from_image_point(
                project(world_to_cam(&pose, b.position), cal.h_ap_mm).unwrap(),
                &cal,
            );
            assert!((est.ratios.p_x - truth.p_x).abs() < 1e-10);
            assert!((est.ratios.p_y - truth.p_y).abs() < 1e-10);
            assert!(!est.low_confidence);
        }
    }

    #[test]
    fn centered_single_beacon_leaves_difference_channels_silent() {
        let book = small_book();
        let cal = CalibrationParams::ideal(2.55, 2.75);
        let beacon = Beacon {
            id: 0,
            position: [0.0, 0.0, 3.4],
        };
        let pose = Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let capture = synthesize_capture(
            &[beacon],
            &pose,
            &cal,
            &book,
            f64::INFINITY,
            AmplitudeModel::Unit,
            0,
        )
        .unwrap();
        for v in capture.v_bt.iter().chain(&capture.v_lr) {
            assert!(v.abs() < 1e-14);
        }
        assert!(capture.v_sum.iter().any(|v| v.abs() > 0.5));
    }

    #[test]
    fn empirical_snr_matches_configuration() {
        let book = gen_codes(CodeFamily::Kasami, 255, 4, 11)
            .unwrap()
            .with_samples_per_chip(16)
            .unwrap();
        let cal = CalibrationParams::reference();
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let pose = Pose::new(0.1, 0.2, 0.0, 0.0, 0.0, 0.0);
        let clean = synthesize_capture(
            beacons.beacons(),
            &pose,
            &cal,
            &book,
            f64::INFINITY,
            AmplitudeModel::default(),
            5,
        )
        .unwrap();
        let noisy = synthesize_capture(
            beacons.beacons(),
            &pose,
            &cal,
            &book,
            10.0,
            AmplitudeModel::default(),
            5,
        )
        .unwrap();
        let n = clean.sample_count() as f64;
        let p_sig = clean.v_sum.iter().map(|v| v * v).sum::<f64>() / n;
        let p_noise = clean
            .v_sum
            .iter()
            .zip(&noisy.v_sum)
            .map(|(c, d)| (c - d) * (c - d))
            .sum::<f64>()
            / n;
        let snr_db = 10.0 * (p_sig / p_noise).log10();
        assert!((snr_db - 10.0).abs() < 0.2, "empirical snr {snr_db}");
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let book = small_book();
        let cal = CalibrationParams::reference();
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let pose = Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let a = synthesize_capture(
            beacons.beacons(),
            &pose,
            &cal,
            &book,
            10.0,
            AmplitudeModel::default(),
            99,
        )
        .unwrap();
        let b = synthesize_capture(
            beacons.beacons(),
            &pose,
            &cal,
            &book,
            10.0,
            AmplitudeModel::default(),
            99,
        )
        .unwrap();
        assert_eq!(a, b);
        let c = synthesize_capture(
            beacons.beacons(),
            &pose,
            &cal,
            &book,
            10.0,
            AmplitudeModel::default(),
            100,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn behind_camera_rejected() {
        let book = small_book();
        let cal = CalibrationParams::reference();
        let beacon = Beacon {
            id: 0,
            position: [0.0, 0.0, -1.0],
        };
        let pose = Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(matches!(
            synthesize_capture(
                &[beacon],
                &pose,
                &cal,
                &book,
                10.0,
                AmplitudeModel::Unit,
                0
            ),
            Err(SignalError::BehindCamera { .. })
        ));
        assert!(matches!(
            synthesize_capture(&[], &pose, &cal, &book, 10.0, AmplitudeModel::Unit, 0),
            Err(SignalError::NoBeacons)
        ));
    }
}
