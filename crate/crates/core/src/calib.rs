//! Receiver calibration: fit the ratio-to-image-point constants from
//! measured ratios at known ground-truth poses.
//!
//! The focal adjustment and the aperture length enter the map only through
//! their product, so the aperture length stays gauge-fixed at its configured
//! physical value and only the adjustment is estimated. A deterministic
//! coarse grid over (lambda, delta) seeds a Gauss-Newton descent over all
//! free parameters; the optical center is linear given the rest and is
//! solved in closed form at every grid node.

use crate::geometry::{project, world_to_cam, BeaconSet, Pose};
use crate::numerics::{lstsq, Matrix};
use crate::qada::{CalibrationParams, RatioPair};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("unidentifiable data: {0}")]
    Unidentifiable(&'static str),
    #[error("observation references unknown beacon id {0}")]
    UnknownBeacon(u32),
    #[error("ground-truth projection failed: {0}")]
    Projection(#[from] crate::geometry::GeometryError),
}

/// Measured ratios at one known pose.
#[derive(Debug, Clone)]
pub struct CalibObservation {
    pub pose: Pose,
    /// (beacon id, measured ratio pair); at least the full constellation.
    pub ratios: Vec<(u32, RatioPair)>,
}

/// Coarse-grid search ranges (min, max, step).
#[derive(Debug, Clone, Copy)]
pub struct CalibBounds {
    pub lambda: (f64, f64, f64),
    pub delta: (f64, f64, f64),
}

impl Default for CalibBounds {
    fn default() -> Self {
        CalibBounds {
            lambda: (0.5, 2.0, 0.05),
            delta: (-0.3, 0.3, 0.01),
        }
    }
}

/// Fit result with optimizer provenance.
#[derive(Debug, Clone)]
pub struct CalibrationFit {
    pub params: CalibrationParams,
    /// Final sum of squared image residuals (mm^2).
    pub objective: f64,
    /// Objective at the best coarse-grid seed.
    pub seed_objective: f64,
    /// (lambda, delta) of the winning grid node.
    pub grid_seed: (f64, f64),
    pub iterations: usize,
}

struct Sample {
    p: RatioPair,
    /// True image point (mm per unit h_ap; multiply by h_ap for mm).
    target_per_hap: [f64; 2],
}

/// Estimates (lambda, delta, c_x, c_y) — plus h_ap when `free_h_ap` — from
/// ratio observations at known poses. `nominal` supplies the gauge-fixed
/// aperture length and the (fixed or initial) aperture height.
pub fn estimate_calibration(
    observations: &[CalibObservation],
    beacons: &BeaconSet,
    nominal: &CalibrationParams,
    bounds: &CalibBounds,
    free_h_ap: bool,
) -> Result<CalibrationFit, CalibError> {
    // identifiability: several distinct poses with varied yaw
    let mut poses: Vec<(i64, i64, i64)> = observations
        .iter()
        .map(|o| {
            (
                (o.pose.x * 1e9) as i64,
                (o.pose.y * 1e9) as i64,
                (o.pose.gamma * 1e9) as i64,
            )
        })
        .collect();
    poses.sort_unstable();
    poses.dedup();
    if poses.len() < 3 {
        return Err(CalibError::Unidentifiable(
            "need at least 3 distinct observation poses",
        ));
    }
    let mut gammas: Vec<i64> = observations
        .iter()
        .map(|o| (o.pose.gamma * 1e9) as i64)
        .collect();
    gammas.sort_unstable();
    gammas.dedup();
    if gammas.len() < 2 {
        return Err(CalibError::Unidentifiable(
            "observations need at least 2 distinct yaw angles",
        ));
    }

    // flatten to (ratios, target image point / h_ap) samples
    let mut samples = Vec::new();
    for o in observations {
        for &(id, p) in &o.ratios {
            let b = beacons.by_id(id).ok_or(CalibError::UnknownBeacon(id))?;
            let cam = world_to_cam(&o.pose, b.position);
            let img = project(cam, 1.0)?; // per unit focal length
            samples.push(Sample {
                p,
                target_per_hap: [img.x_mm, img.y_mm],
            });
        }
    }

    let l_mm = nominal.l_mm;
    let h0 = nominal.h_ap_mm;

    // residuals (mm) for parameters theta = (lambda, delta, cx, cy, h_ap)
    let residuals = |lambda: f64, delta: f64, cx: f64, cy: f64, h: f64| -> Vec<f64> {
        let g = -l_mm / 2.0 * lambda;
        let mut r = Vec::with_capacity(2 * samples.len());
        for s in &samples {
            r.push(g * (s.p.p_x + delta * s.p.p_y) + cx - h * s.target_per_hap[0]);
            r.push(g * (-delta * s.p.p_x + s.p.p_y) + cy - h * s.target_per_hap[1]);
        }
        r
    };
    let sse = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();

    // coarse grid over (lambda, delta) with the optimal center in closed form
    let mut best_seed = (nominal.lambda, nominal.delta_rad);
    let mut best_seed_obj = f64::INFINITY;
    let mut best_center = (nominal.c_x_mm, nominal.c_y_mm);
    let (l_min, l_max, l_step) = bounds.lambda;
    let (d_min, d_max, d_step) = bounds.delta;
    let n = samples.len() as f64;
    let mut lambda = l_min;
    while lambda <= l_max + 1e-12 {
        let mut delta = d_min;
        while delta <= d_max + 1e-12 {
            let g = -l_mm / 2.0 * lambda;
            let mut cx = 0.0;
            let mut cy = 0.0;
            for s in &samples {
                cx += h0 * s.target_per_hap[0] - g * (s.p.p_x + delta * s.p.p_y);
                cy += h0 * s.target_per_hap[1] - g * (-delta * s.p.p_x + s.p.p_y);
            }
            cx /= n;
            cy /= n;
            let obj = sse(&residuals(lambda, delta, cx, cy, h0));
            if obj < best_seed_obj {
                best_seed_obj = obj;
                best_seed = (lambda, delta);
                best_center = (cx, cy);
            }
            delta += d_step;
        }
        lambda += l_step;
    }

    // Gauss-Newton from the winning seed
    let mut theta = [
        best_seed.0,
        best_seed.1,
        best_center.0,
        best_center.1,
        h0,
    ];
    let n_par = if free_h_ap { 5 } else { 4 };
    let mut current = sse(&residuals(theta[0], theta[1], theta[2], theta[3], theta[4]));
    let mut iterations = 0;
    for _ in 0..50 {
        iterations += 1;
        let mut jac = Matrix::zeros(2 * samples.len(), n_par);
        let mut rhs = vec![0.0; 2 * samples.len()];
        let (lambda, delta) = (theta[0], theta[1]);
        let h = theta[4];
        for (i, s) in samples.iter().enumerate() {
            let gx = s.p.p_x + delta * s.p.p_y;
            let gy = -delta * s.p.p_x + s.p.p_y;
            let half_l = -l_mm / 2.0;
            // x row
            jac[(2 * i, 0)] = half_l * gx;
            jac[(2 * i, 1)] = half_l * lambda * s.p.p_y;
            jac[(2 * i, 2)] = 1.0;
            if free_h_ap {
                jac[(2 * i, 4)] = -s.target_per_hap[0];
            }
            // y row
            jac[(2 * i + 1, 0)] = half_l * gy;
            jac[(2 * i + 1, 1)] = half_l * lambda * (-s.p.p_x);
            jac[(2 * i + 1, 3)] = 1.0;
            if free_h_ap {
                jac[(2 * i + 1, 4)] = -s.target_per_hap[1];
            }
            let rx = half_l * lambda * gx + theta[2] - h * s.target_per_hap[0];
            let ry = half_l * lambda * gy + theta[3] - h * s.target_per_hap[1];
            rhs[2 * i] = -rx;
            rhs[2 * i + 1] = -ry;
        }
        let step = lstsq(&jac, &rhs);
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..10 {
            let mut cand = theta;
            for k in 0..n_par {
                cand[k] += scale * step[k];
            }
            let obj = sse(&residuals(cand[0], cand[1], cand[2], cand[3], cand[4]));
            if obj < current {
                theta = cand;
                current = obj;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        let norm: f64 = step[..n_par].iter().map(|s| s * s).sum::<f64>().sqrt();
        if !improved || norm < 1e-14 {
            break;
        }
    }

    let params = CalibrationParams {
        h_ap_mm: theta[4],
        lambda: theta[0],
        delta_rad: theta[1],
        l_mm,
        c_x_mm: theta[2],
        c_y_mm: theta[3],
    };
    Ok(CalibrationFit {
        params,
        objective: current,
        seed_objective: best_seed_obj,
        grid_seed: best_seed,
        iterations,
    })
}

/// Writes observations as CSV: pose columns (meters, degrees) followed by
/// per-beacon ratio pairs `px_<id>, py_<id>`.
pub fn write_observations(
    path: &std::path::Path,
    observations: &[CalibObservation],
) -> Result<(), std::io::Error> {
    let mut ids: Vec<u32> = observations
        .iter()
        .flat_map(|o| o.ratios.iter().map(|&(id, _)| id))
        .collect();
    ids.sort_unstable();
    ids.dedup();
    let mut out = String::from("x_m,y_m,z_m,alpha_deg,beta_deg,gamma_deg");
    for id in &ids {
        out.push_str(&format!(",px_{id},py_{id}"));
    }
    out.push('\n');
    for o in observations {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            o.pose.x,
            o.pose.y,
            o.pose.z,
            o.pose.alpha.to_degrees(),
            o.pose.beta.to_degrees(),
            o.pose.gamma.to_degrees()
        ));
        for id in &ids {
            match o.ratios.iter().find(|(i, _)| i == id) {
                Some((_, p)) => out.push_str(&format!(",{},{}", p.p_x, p.p_y)),
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)
}

/// Reads an observations CSV written by [`write_observations`].
pub fn read_observations(
    path: &std::path::Path,
) -> Result<Vec<CalibObservation>, CalibReadError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or(CalibReadError::Empty)?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 8 || cols[0] != "x_m" {
        return Err(CalibReadError::Malformed(format!(
            "unexpected header {header:?}"
        )));
    }
    let mut ids = Vec::new();
    for pair in cols[6..].chunks(2) {
        let id: u32 = pair[0]
            .strip_prefix("px_")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CalibReadError::Malformed(format!("bad ratio column {:?}", pair[0])))?;
        ids.push(id);
    }
    let mut observations = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != cols.len() {
            return Err(CalibReadError::Malformed(format!(
                "line {}: expected {} columns, got {}",
                lineno + 2,
                cols.len(),
                vals.len()
            )));
        }
        let f = |i: usize| -> Result<f64, CalibReadError> {
            vals[i].parse().map_err(|_| {
                CalibReadError::Malformed(format!("line {}: bad float {:?}", lineno + 2, vals[i]))
            })
        };
        let pose = Pose::new(
            f(0)?,
            f(1)?,
            f(2)?,
            f(3)?.to_radians(),
            f(4)?.to_radians(),
            f(5)?.to_radians(),
        );
        let mut ratios = Vec::new();
        for (k, &id) in ids.iter().enumerate() {
            let px = vals[6 + 2 * k];
            let py = vals[7 + 2 * k];
            if px.is_empty() && py.is_empty() {
                continue;
            }
            ratios.push((
                id,
                RatioPair {
                    p_x: f(6 + 2 * k)?,
                    p_y: f(7 + 2 * k)?,
                },
            ));
        }
        observations.push(CalibObservation { pose, ratios });
    }
    Ok(observations)
}

#[derive(Debug, Error)]
pub enum CalibReadError {
    #[error("observation file is empty")]
    Empty,
    #[error("malformed observations: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qada::ratios_from_image_point;

    fn observation_poses() -> Vec<Pose> {
        let mut out = Vec::new();
        for (x, y) in [(-0.6, -0.5), (0.0, 0.3), (0.7, -0.2), (0.4, 0.6)] {
            for g in [0.0f64, 90.0, 210.0] {
                out.push(Pose::new(x, y, 0.0, 0.0, 0.0, g.to_radians()));
            }
        }
        out
    }

    fn synth_observations(cal: &CalibrationParams, beacons: &BeaconSet) -> Vec<CalibObservation> {
        observation_poses()
            .into_iter()
            .map(|pose| {
                let ratios = beacons
                    .beacons()
                    .iter()
                    .map(|b| {
                        let img = project(world_to_cam(&pose, b.position), cal.h_ap_mm).unwrap();
                        (b.id, ratios_from_image_point(img, cal))
                    })
                    .collect();
                CalibObservation { pose, ratios }
            })
            .collect()
    }

    #[test]
    fn recovers_reference_parameters() {
        let truth = CalibrationParams::reference();
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let obs = synth_observations(&truth, &beacons);
        let fit = estimate_calibration(
            &obs,
            &beacons,
            &CalibrationParams::ideal(truth.h_ap_mm, truth.l_mm),
            &CalibBounds::default(),
            false,
        )
        .unwrap();
        assert!(
            (fit.params.lambda - truth.lambda).abs() / truth.lambda < 1e-6,
            "lambda {}",
            fit.params.lambda
        );
        assert!(
            (fit.params.delta_rad - truth.delta_rad).abs() / truth.delta_rad < 1e-6,
            "delta {}",
            fit.params.delta_rad
        );
        assert!((fit.params.c_x_mm - truth.c_x_mm).abs() / truth.c_x_mm.abs() < 1e-6);
        assert!((fit.params.c_y_mm - truth.c_y_mm).abs() / truth.c_y_mm.abs() < 1e-6);
        assert!(fit.objective <= fit.seed_objective);
    }

    #[test]
    fn recovers_identity_distortion() {
        let truth = CalibrationParams::ideal(2.55, 2.75);
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let obs = synth_observations(&truth, &beacons);
        let fit = estimate_calibration(
            &obs,
            &beacons,
            &truth,
            &CalibBounds::default(),
            false,
        )
        .unwrap();
        assert!((fit.params.lambda - 1.0).abs() < 1e-9);
        assert!(fit.params.delta_rad.abs() < 1e-9);
        assert!(fit.params.c_x_mm.abs() < 1e-9);
        assert!(fit.params.c_y_mm.abs() < 1e-9);
    }

    #[test]
    fn noisy_ratios_still_improve_on_seed() {
        let truth = CalibrationParams::reference();
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let mut obs = synth_observations(&truth, &beacons);
        let mut state = 0xd00d_u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        for o in &mut obs {
            for (_, p) in &mut o.ratios {
                p.p_x += 0.01 * next();
                p.p_y += 0.01 * next();
            }
        }
        let fit = estimate_calibration(
            &obs,
            &beacons,
            &CalibrationParams::ideal(truth.h_ap_mm, truth.l_mm),
            &CalibBounds::default(),
            false,
        )
        .unwrap();
        assert!(fit.objective < fit.seed_objective);
        // parameters should still land near the truth
        assert!((fit.params.lambda - truth.lambda).abs() < 0.05);
        assert!((fit.params.delta_rad - truth.delta_rad).abs() < 0.05);
    }

    #[test]
    fn observation_csv_round_trip() {
        let truth = CalibrationParams::reference();
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let obs = synth_observations(&truth, &beacons);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        write_observations(&path, &obs).unwrap();
        let back = read_observations(&path).unwrap();
        assert_eq!(back.len(), obs.len());
        for (a, b) in obs.iter().zip(&back) {
            assert!((a.pose.x - b.pose.x).abs() < 1e-12);
            assert!((a.pose.gamma - b.pose.gamma).abs() < 1e-12);
            for ((ia, pa), (ib, pb)) in a.ratios.iter().zip(&b.ratios) {
                assert_eq!(ia, ib);
                assert!((pa.p_x - pb.p_x).abs() < 1e-15);
                assert!((pa.p_y - pb.p_y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identical_poses_are_unidentifiable() {
        let truth = CalibrationParams::reference();
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let one = synth_observations(&truth, &beacons)[0].clone();
        let obs = vec![one.clone(), one.clone(), one];
        assert!(matches!(
            estimate_calibration(
                &obs,
                &beacons,
                &truth,
                &CalibBounds::default(),
                false
            ),
            Err(CalibError::Unidentifiable(_))
        ));
    }

    #[test]
    fn single_yaw_is_unidentifiable() {
        let truth = CalibrationParams::reference();
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let obs: Vec<CalibObservation> = synth_observations(&truth, &beacons)
            .into_iter()
            .filter(|o| o.pose.gamma.abs() < 1e-12)
            .collect();
        assert!(obs.len() >= 3);
        assert!(matches!(
            estimate_calibration(
                &obs,
                &beacons,
                &truth,
                &CalibBounds::default(),
                false
            ),
            Err(CalibError::Unidentifiable(_))
        ));
    }

    #[test]
    fn freed_aperture_height_recovers_identifiable_combinations() {
        // ratios constrain only (lambda*l/h, delta, c/h): a joint scale of
        // (lambda, c, h) is a gauge freedom, so compare those combinations
        let mut truth = CalibrationParams::reference();
        truth.h_ap_mm = 2.7; // differs from the nominal 2.55
        let beacons = BeaconSet::ceiling_square(1.2, 3.4);
        let obs = synth_observations(&truth, &beacons);
        let nominal = CalibrationParams::ideal(2.55, truth.l_mm);
        let fit =
            estimate_calibration(&obs, &beacons, &nominal, &CalibBounds::default(), true)
                .unwrap();
        let got = &fit.params;
        let combo = |p: &CalibrationParams| {
            (
                p.lambda * p.l_mm / p.h_ap_mm,
                p.delta_rad,
                p.c_x_mm / p.h_ap_mm,
                p.c_y_mm / p.h_ap_mm,
            )
        };
        let (a1, b1, c1, d1) = combo(got);
        let (a2, b2, c2, d2) = combo(&truth);
        assert!((a1 - a2).abs() / a2 < 1e-6, "scale combo {a1} vs {a2}");
        assert!((b1 - b2).abs() < 1e-6);
        assert!((c1 - c2).abs() < 1e-8);
        assert!((d1 - d2).abs() < 1e-8);
        assert!(fit.objective < 1e-15);
    }
}
