//! End-to-end positioning: capture acquisition, per-beacon image-point
//! recovery, and the PnP solve. The experiments harness and the CLI both sit
//! on top of this module.

use crate::geometry::{BeaconSet, ImagePoint, Pose};
use crate::pnp::{
    self, ippe, rank_candidates, refine_gauss_newton, solution_to_pose, Correspondence,
    PnPSolution, PnpError, SolverKind,
};
use crate::qada::{image_point_from_ratios, CalibrationParams, QadaError, RatioPair};
use crate::signals::{
    correlate, extract_ratios, synthesize_capture, AmplitudeModel, CodeBook, QadaCapture,
    RatioRule, SignalError,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Pnp(#[from] PnpError),
    #[error(transparent)]
    Qada(#[from] QadaError),
    #[error("fewer than 4 usable beacon observations ({0})")]
    TooFewObservations(usize),
}

/// Whether beacons emit one at a time or all at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmissionMode {
    /// One capture per beacon; each matched filter sees only its own code.
    #[default]
    Sequential,
    /// One capture with every code superimposed; matched filtering separates
    /// them at the cost of residual code cross-talk.
    Simultaneous,
}

/// A set of captures tied to the beacons they contain.
#[derive(Debug, Clone)]
pub struct Acquisition {
    /// (emitting beacon ids, capture) pairs.
    pub captures: Vec<(Vec<u32>, QadaCapture)>,
}

/// Splits a master seed into independent per-purpose streams.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut x = master ^ 0x9E3779B97F4A7C15;
    for &p in parts {
        x ^= p
            .wrapping_add(0x9E3779B97F4A7C15)
            .wrapping_add(x << 6)
            .wrapping_add(x >> 2);
        // splitmix64 finalizer
        x = x.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        x = z ^ (z >> 31);
    }
    x
}

/// Synthesizes captures for one measurement at the given pose.
#[allow(clippy::too_many_arguments)]
pub fn acquire(
    beacons: &BeaconSet,
    pose: &Pose,
    cal: &CalibrationParams,
    book: &CodeBook,
    snr_db: f64,
    amp_model: AmplitudeModel,
    mode: EmissionMode,
    seed: u64,
) -> Result<Acquisition, PipelineError> {
    let captures = match mode {
        EmissionMode::Simultaneous => {
            let capture =
                synthesize_capture(beacons.beacons(), pose, cal, book, snr_db, amp_model, seed)?;
            vec![(beacons.beacons().iter().map(|b| b.id).collect(), capture)]
        }
        EmissionMode::Sequential => beacons
            .beacons()
            .iter()
            .map(|b| {
                let cap_seed = derive_seed(seed, &[b.id as u64]);
                synthesize_capture(
                    std::slice::from_ref(b),
                    pose,
                    cal,
                    book,
                    snr_db,
                    amp_model,
                    cap_seed,
                )
                .map(|c| (vec![b.id], c))
            })
            .collect::<Result<_, _>>()?,
    };
    Ok(Acquisition { captures })
}

/// One beacon's recovered observation.
#[derive(Debug, Clone, Copy)]
pub struct BeaconObservation {
    pub beacon_id: u32,
    pub ratios: RatioPair,
    pub image_point: ImagePoint,
    pub low_confidence: bool,
}

/// Matched-filters every capture and recovers per-beacon image points.
pub fn extract_observations(
    acq: &Acquisition,
    book: &CodeBook,
    cal: &CalibrationParams,
    rule: RatioRule,
) -> Result<Vec<BeaconObservation>, PipelineError> {
    let mut obs = Vec::new();
    for (ids, capture) in &acq.captures {
        for &id in ids {
            let code = book.code(id).ok_or(SignalError::MissingCode(id))?;
            let tri = correlate(capture, code, book.samples_per_chip)?;
            let est = extract_ratios(&tri, book.samples_per_chip, rule)?;
            obs.push(BeaconObservation {
                beacon_id: id,
                ratios: est.ratios,
                image_point: image_point_from_ratios(est.ratios, cal),
                low_confidence: est.low_confidence,
            });
        }
    }
    obs.sort_by_key(|o| o.beacon_id);
    Ok(obs)
}

/// A solver's answer for one measurement.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub solution: PnPSolution,
    pub pose: Pose,
}

/// Correspondences from observations, keyed against the assumed beacon
/// positions (which the robustness study may perturb away from the emitter
/// truth).
pub fn correspondences(
    observations: &[BeaconObservation],
    assumed: &BeaconSet,
    cal: &CalibrationParams,
) -> Result<Vec<Correspondence>, PipelineError> {
    let mut corr = Vec::with_capacity(observations.len());
    for o in observations {
        if let Some(b) = assumed.by_id(o.beacon_id) {
            corr.push(Correspondence {
                world: b.position,
                image: [
                    o.image_point.x_mm / cal.h_ap_mm,
                    o.image_point.y_mm / cal.h_ap_mm,
                ],
            });
        }
    }
    if corr.len() < 4 {
        return Err(PipelineError::TooFewObservations(corr.len()));
    }
    Ok(corr)
}

/// Runs one solver on prepared correspondences.
pub fn run_solver(
    kind: SolverKind,
    corr: &[Correspondence],
    h_ap_mm: f64,
    refine: bool,
    tracking_gamma: Option<f64>,
) -> Result<PnPSolution, PnpError> {
    let solution = match kind {
        SolverKind::Ippe => {
            let sols = ippe(corr, h_ap_mm)?;
            let mut cands = vec![sols.best];
            cands.extend(sols.alternate);
            rank_candidates(&mut cands, tracking_gamma);
            cands.into_iter().next().unwrap()
        }
        SolverKind::Epnp => pnp::epnp(corr, h_ap_mm)?,
        SolverKind::Rpnp => pnp::rpnp(corr, h_ap_mm)?,
    };
    Ok(if refine {
        refine_gauss_newton(&solution, corr, h_ap_mm)
    } else {
        solution
    })
}

/// Full measurement-to-pose run for a set of solvers.
#[allow(clippy::too_many_arguments)]
pub fn locate(
    acq: &Acquisition,
    assumed_beacons: &BeaconSet,
    book: &CodeBook,
    cal: &CalibrationParams,
    solvers: &[SolverKind],
    rule: RatioRule,
    refine: bool,
    tracking_gamma: Option<f64>,
) -> Result<(Vec<BeaconObservation>, Vec<(SolverKind, SolverReport)>), PipelineError> {
    let observations = extract_observations(acq, book, cal, rule)?;
    let corr = correspondences(&observations, assumed_beacons, cal)?;
    let mut reports = Vec::with_capacity(solvers.len());
    for &kind in solvers {
        let solution = run_solver(kind, &corr, cal.h_ap_mm, refine, tracking_gamma)?;
        let pose = solution_to_pose(&solution);
        reports.push((kind, SolverReport { solution, pose }));
    }
    Ok((observations, reports))
}
