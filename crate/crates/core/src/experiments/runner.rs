//! The Monte Carlo runners. Trials are independent given their derived
//! seeds, execute in parallel, and report in a canonical order regardless of
//! scheduling.

use super::scenario::ScenarioConfig;
use super::stats::{cdf, mark_outliers, CdfSeries, Coordinate, ErrorRecord, McReport, PointSummary, PooledSummary};
use super::ExperimentError;
use crate::geometry::{Beacon, BeaconSet, Pose};
use crate::pipeline::{acquire, correspondences, derive_seed, extract_observations, run_solver};
use crate::pnp::{solution_to_pose, SolverKind};
use crate::qada::CalibrationParams;
use crate::signals::{gen_codes, CodeBook};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// A built scenario: constellation, codebook and receiver constants.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub beacons: BeaconSet,
    pub book: CodeBook,
    pub cal: CalibrationParams,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        let beacons = BeaconSet::ceiling_square(
            config.room.beacon_square_side_m,
            config.room.height_m,
        );
        let book = gen_codes(
            config.codebook.family,
            config.codebook.chip_length,
            beacons.len(),
            config.codebook.code_seed,
        )?
        .with_samples_per_chip(config.codebook.samples_per_chip)?;
        Ok(Scenario {
            config: config.clone(),
            beacons,
            book,
            cal: config.calibration,
        })
    }
}

/// One evaluated (position, yaw) combination.
#[derive(Debug, Clone, Copy)]
struct Cell {
    point_id: usize,
    x: f64,
    y: f64,
    gamma_rad: f64,
}

fn grid_cells(cfg: &ScenarioConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    let hx = cfg.room.x_extent_m / 2.0;
    let hy = cfg.room.y_extent_m / 2.0;
    let step = cfg.mc.grid_step_m;
    let nx = (cfg.room.x_extent_m / step).round() as usize;
    let ny = (cfg.room.y_extent_m / step).round() as usize;
    let mut id = 0;
    for i in 0..=nx {
        let x = -hx + i as f64 * step;
        if x > hx + 1e-9 {
            break;
        }
        for j in 0..=ny {
            let y = -hy + j as f64 * step;
            if y > hy + 1e-9 {
                break;
            }
            for &g in &cfg.mc.gammas_deg {
                cells.push(Cell {
                    point_id: id,
                    x,
                    y,
                    gamma_rad: g.to_radians(),
                });
                id += 1;
            }
        }
    }
    cells
}

/// The nine floor points of the single-quadrant study.
pub const NINE_POINTS: [(f64, f64); 9] = [
    (0.0, 0.0),
    (0.0, 0.5),
    (0.0, 1.0),
    (0.5, 0.0),
    (0.5, 0.5),
    (0.5, 1.0),
    (1.0, 0.0),
    (1.0, 0.5),
    (1.0, 1.0),
];

fn nine_point_cells(cfg: &ScenarioConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    let mut id = 0;
    let step = cfg.mc.nine_gamma_step_deg;
    for &(x, y) in NINE_POINTS.iter() {
        let mut g = 0.0;
        while g < 360.0 - 1e-9 {
            cells.push(Cell {
                point_id: id,
                x,
                y,
                gamma_rad: (g as f64).to_radians(),
            });
            id += 1;
            g += step;
        }
    }
    cells
}

#[derive(Debug, Clone, Copy)]
struct Perturbation {
    beacon_id: u32,
    sigma_m: f64,
    redraw_per_trial: bool,
}

/// Draws the solver-side (assumed) constellation for one trial.
fn assumed_beacons(
    truth: &BeaconSet,
    perturbation: Option<&Perturbation>,
    master_seed: u64,
    cell_id: usize,
    trial: usize,
) -> BeaconSet {
    let Some(p) = perturbation else {
        return truth.clone();
    };
    if p.sigma_m == 0.0 {
        return truth.clone();
    }
    let seed = if p.redraw_per_trial {
        derive_seed(master_seed, &[0xbeac, cell_id as u64, trial as u64])
    } else {
        derive_seed(master_seed, &[0xbeac])
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beacons: Vec<Beacon> = truth
        .beacons()
        .iter()
        .map(|b| {
            if b.id == p.beacon_id {
                let mut pos = b.position;
                for v in &mut pos {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *v += p.sigma_m * g;
                }
                Beacon {
                    id: b.id,
                    position: pos,
                }
            } else {
                *b
            }
        })
        .collect();
    BeaconSet::new(beacons).expect("perturbed constellation stays valid")
}

fn evaluate(
    scenario: &Scenario,
    cells: &[Cell],
    perturbation: Option<Perturbation>,
) -> Result<McReport, ExperimentError> {
    let cfg = &scenario.config;
    let trials = cfg.mc.trials;
    let master = cfg.seed;

    struct TrialOutcome {
        cell_idx: usize,
        records: Vec<ErrorRecord>,
        skipped: bool,
        failures: Vec<SolverKind>,
    }

    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..trials).map(move |t| (c, t)))
        .collect();

    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(cell_idx, trial)| {
            let cell = cells[cell_idx];
            let truth = Pose::new(cell.x, cell.y, 0.0, 0.0, 0.0, cell.gamma_rad);
            let capture_seed =
                derive_seed(master, &[0xca9, cell.point_id as u64, trial as u64]);
            let assumed = assumed_beacons(
                &scenario.beacons,
                perturbation.as_ref(),
                master,
                cell.point_id,
                trial,
            );
            let acq = match acquire(
                &scenario.beacons,
                &truth,
                &scenario.cal,
                &scenario.book,
                cfg.snr_db,
                cfg.signal.amplitude,
                cfg.signal.emission,
                capture_seed,
            ) {
                Ok(a) => a,
                Err(_) => {
                    return TrialOutcome {
                        cell_idx,
                        records: Vec::new(),
                        skipped: true,
                        failures: Vec::new(),
                    }
                }
            };
            let observations =
                match extract_observations(&acq, &scenario.book, &scenario.cal, cfg.signal.ratio_rule)
                {
                    Ok(o) => o,
                    Err(_) => {
                        return TrialOutcome {
                            cell_idx,
                            records: Vec::new(),
                            skipped: true,
                            failures: Vec::new(),
                        }
                    }
                };
            let corr = match correspondences(&observations, &assumed, &scenario.cal) {
                Ok(c) => c,
                Err(_) => {
                    return TrialOutcome {
                        cell_idx,
                        records: Vec::new(),
                        skipped: true,
                        failures: Vec::new(),
                    }
                }
            };
            let mut records = Vec::with_capacity(cfg.mc.solvers.len());
            let mut failures = Vec::new();
            for &solver in &cfg.mc.solvers {
                match run_solver(solver, &corr, scenario.cal.h_ap_mm, cfg.mc.refine, None) {
                    Ok(sol) => {
                        let pose = solution_to_pose(&sol);
                        records.push(ErrorRecord::new(
                            solver,
                            cell.point_id,
                            trial,
                            truth,
                            pose,
                        ));
                    }
                    Err(_) => failures.push(solver),
                }
            }
            TrialOutcome {
                cell_idx,
                records,
                skipped: false,
                failures,
            }
        })
        .collect();

    // canonical ordering: by cell, then trial, then configured solver order
    let mut skipped: BTreeMap<usize, usize> = BTreeMap::new();
    let mut failure_counts: BTreeMap<SolverKind, usize> = BTreeMap::new();
    for o in &outcomes {
        if o.skipped {
            *skipped.entry(cells[o.cell_idx].point_id).or_insert(0) += 1;
        }
        for f in &o.failures {
            *failure_counts.entry(*f).or_insert(0) += 1;
        }
    }
    let mut records: Vec<ErrorRecord> =
        outcomes.into_iter().flat_map(|o| o.records).collect();
    let solver_rank = |s: SolverKind| {
        cfg.mc
            .solvers
            .iter()
            .position(|&k| k == s)
            .unwrap_or(usize::MAX)
    };
    records.sort_by_key(|r| (r.point_id, r.trial, solver_rank(r.solver)));

    if records.is_empty() {
        return Err(ExperimentError::Empty("no trial produced a record"));
    }

    // per-cell 3-sigma pass feeding the pooled statistics
    let mut per_point = Vec::new();
    {
        let mut by_cell: BTreeMap<(usize, SolverKind), Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            by_cell.entry((r.point_id, r.solver)).or_default().push(i);
        }
        for ((point_id, solver), idxs) in by_cell {
            let mut group: Vec<ErrorRecord> = idxs.iter().map(|&i| records[i].clone()).collect();
            let outliers = mark_outliers(&mut group);
            for (&i, g) in idxs.iter().zip(&group) {
                records[i].outlier = g.outlier;
            }
            let survivors: Vec<&ErrorRecord> = group.iter().filter(|r| !r.outlier).collect();
            if survivors.is_empty() {
                continue;
            }
            let cell = cells
                .iter()
                .find(|c| c.point_id == point_id)
                .expect("cell exists");
            let mut mean_abs = [0.0; 6];
            for s in &survivors {
                for k in 0..6 {
                    mean_abs[k] += s.abs_errors[k] / survivors.len() as f64;
                }
            }
            per_point.push(PointSummary {
                solver,
                point_id,
                x_m: cell.x,
                y_m: cell.y,
                gamma_deg: cell.gamma_rad.to_degrees(),
                n: survivors.len(),
                outliers,
                mean_abs,
            });
        }
    }

    // pooled statistics and CDFs over survivors
    let mut pooled = Vec::new();
    let mut cdfs = Vec::new();
    for &solver in &cfg.mc.solvers {
        let survivors: Vec<&ErrorRecord> = records
            .iter()
            .filter(|r| r.solver == solver && !r.outlier)
            .collect();
        let outliers = records
            .iter()
            .filter(|r| r.solver == solver && r.outlier)
            .count();
        if survivors.is_empty() {
            continue;
        }
        let mut mean = [0.0; 6];
        let mut median = [0.0; 6];
        let mut std = [0.0; 6];
        for k in 0..6 {
            let mut vals: Vec<f64> = survivors.iter().map(|r| r.abs_errors[k]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            mean[k] = m;
            median[k] = if vals.len() % 2 == 1 {
                vals[vals.len() / 2]
            } else {
                0.5 * (vals[vals.len() / 2 - 1] + vals[vals.len() / 2])
            };
            std[k] = if vals.len() > 1 {
                (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                    / (vals.len() - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            cdfs.push(CdfSeries {
                solver,
                coordinate: Coordinate::ALL[k],
                points: cdf(&vals)?,
            });
        }
        pooled.push(PooledSummary {
            solver,
            n: survivors.len(),
            outliers,
            mean,
            median,
            std,
        });
    }

    Ok(McReport {
        records,
        per_point,
        pooled,
        cdfs,
        skipped_points: skipped.keys().copied().collect(),
        solver_failures: failure_counts.into_iter().collect(),
    })
}

/// Floor-grid study: every grid point x configured yaw x trial.
pub fn run_grid(cfg: &ScenarioConfig) -> Result<McReport, ExperimentError> {
    let scenario = Scenario::build(cfg)?;
    let cells = grid_cells(cfg);
    evaluate(&scenario, &cells, None)
}

/// Nine representative first-quadrant points over the full yaw sweep.
pub fn run_nine_points(cfg: &ScenarioConfig) -> Result<McReport, ExperimentError> {
    let scenario = Scenario::build(cfg)?;
    let cells = nine_point_cells(cfg);
    evaluate(&scenario, &cells, None)
}

/// Grid study with one transmitter's assumed position perturbed per trial.
/// The perturbation feeds the solver, not the synthesizer.
pub fn run_robustness(cfg: &ScenarioConfig, sigma_cm: f64) -> Result<McReport, ExperimentError> {
    if sigma_cm < 0.0 {
        return Err(ExperimentError::Config(
            "sigma_cm must be non-negative".into(),
        ));
    }
    let scenario = Scenario::build(cfg)?;
    let cells = grid_cells(cfg);
    let perturbation = Perturbation {
        beacon_id: cfg.robustness.perturbed_beacon,
        sigma_m: sigma_cm / 100.0,
        redraw_per_trial: cfg.robustness.redraw_per_trial,
    };
    evaluate(&scenario, &cells, Some(perturbation))
}
