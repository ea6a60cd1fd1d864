//! Error records and their reductions: per-cell 3-sigma trimming, pooled
//! statistics and cumulative distributions.

use super::ExperimentError;
use crate::geometry::{wrap_angle, Pose};
use crate::pnp::SolverKind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Error coordinate; positions in centimeters, angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coordinate {
    X,
    Y,
    Z,
    Alpha,
    Beta,
    Gamma,
}

impl Coordinate {
    pub const ALL: [Coordinate; 6] = [
        Coordinate::X,
        Coordinate::Y,
        Coordinate::Z,
        Coordinate::Alpha,
        Coordinate::Beta,
        Coordinate::Gamma,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Coordinate::X => "x",
            Coordinate::Y => "y",
            Coordinate::Z => "z",
            Coordinate::Alpha => "alpha",
            Coordinate::Beta => "beta",
            Coordinate::Gamma => "gamma",
        }
    }
}

/// One trial's outcome for one solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub solver: SolverKind,
    /// Identifies the evaluated (position, yaw) cell.
    pub point_id: usize,
    pub trial: usize,
    pub truth: Pose,
    pub estimate: Pose,
    /// |dx|, |dy|, |dz| in cm and |dalpha|, |dbeta|, |dgamma| in degrees.
    pub abs_errors: [f64; 6],
    /// Set by the per-cell 3-sigma pass; outliers are excluded from pooled
    /// statistics and CDFs but stay in the record list.
    pub outlier: bool,
}

impl ErrorRecord {
    pub fn new(
        solver: SolverKind,
        point_id: usize,
        trial: usize,
        truth: Pose,
        estimate: Pose,
    ) -> Self {
        let abs_errors = [
            (estimate.x - truth.x).abs() * 100.0,
            (estimate.y - truth.y).abs() * 100.0,
            (estimate.z - truth.z).abs() * 100.0,
            wrap_angle(estimate.alpha - truth.alpha).abs().to_degrees(),
            wrap_angle(estimate.beta - truth.beta).abs().to_degrees(),
            wrap_angle(estimate.gamma - truth.gamma).abs().to_degrees(),
        ];
        ErrorRecord {
            solver,
            point_id,
            trial,
            truth,
            estimate,
            abs_errors,
            outlier: false,
        }
    }

    pub fn error(&self, c: Coordinate) -> f64 {
        self.abs_errors[c as usize]
    }
}

/// Per-cell averages (after outlier removal).
#[derive(Debug, Clone)]
pub struct PointSummary {
    pub solver: SolverKind,
    pub point_id: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub gamma_deg: f64,
    pub n: usize,
    pub outliers: usize,
    pub mean_abs: [f64; 6],
}

/// Pooled statistics per solver (after outlier removal).
#[derive(Debug, Clone)]
pub struct PooledSummary {
    pub solver: SolverKind,
    pub n: usize,
    pub outliers: usize,
    pub mean: [f64; 6],
    pub median: [f64; 6],
    pub std: [f64; 6],
}

/// Sorted error values with cumulative fractions.
#[derive(Debug, Clone)]
pub struct CdfSeries {
    pub solver: SolverKind,
    pub coordinate: Coordinate,
    pub points: Vec<(f64, f64)>,
}

impl CdfSeries {
    /// Smallest recorded value whose cumulative fraction reaches `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        for &(v, f) in &self.points {
            if f >= q {
                return v;
            }
        }
        self.points.last().map(|&(v, _)| v).unwrap_or(f64::NAN)
    }
}

/// Full study output.
#[derive(Debug, Clone)]
pub struct McReport {
    pub records: Vec<ErrorRecord>,
    pub per_point: Vec<PointSummary>,
    pub pooled: Vec<PooledSummary>,
    pub cdfs: Vec<CdfSeries>,
    /// Cells where no beacon observation survived (skipped, not fatal).
    pub skipped_points: Vec<usize>,
    /// (solver, count) of trials where a solver failed outright.
    pub solver_failures: Vec<(SolverKind, usize)>,
}

impl McReport {
    pub fn pooled_for(&self, solver: SolverKind) -> Option<&PooledSummary> {
        self.pooled.iter().find(|p| p.solver == solver)
    }

    pub fn cdf_for(&self, solver: SolverKind, coordinate: Coordinate) -> Option<&CdfSeries> {
        self.cdfs
            .iter()
            .find(|c| c.solver == solver && c.coordinate == coordinate)
    }

    /// Pooled quantile of an error coordinate.
    pub fn percentile(&self, solver: SolverKind, coordinate: Coordinate, q: f64) -> Option<f64> {
        self.cdf_for(solver, coordinate).map(|c| c.quantile(q))
    }
}

/// Empirical distribution: sorted values with fractions i/n.
pub fn cdf(errors: &[f64]) -> Result<Vec<(f64, f64)>, ExperimentError> {
    if errors.is_empty() {
        return Err(ExperimentError::Empty("cdf input"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i + 1) as f64 / n))
        .collect())
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn std_of(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    var.sqrt()
}

fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Marks records whose error on any coordinate sits beyond 3 sigma of that
/// coordinate's distribution over the given group. One pass only.
pub fn mark_outliers(records: &mut [ErrorRecord]) -> usize {
    if records.len() < 2 {
        return 0;
    }
    let mut bounds = [(0.0, 0.0); 6];
    for (k, b) in bounds.iter_mut().enumerate() {
        let vals: Vec<f64> = records.iter().map(|r| r.abs_errors[k]).collect();
        let m = mean_of(&vals);
        *b = (m, std_of(&vals, m));
    }
    let mut count = 0;
    for r in records.iter_mut() {
        let is_out = bounds
            .iter()
            .enumerate()
            .any(|(k, &(m, s))| (r.abs_errors[k] - m).abs() > 3.0 * s && s > 0.0);
        if is_out {
            r.outlier = true;
            count += 1;
        }
    }
    count
}

/// Rebuilds a full report (per-cell trimming, pooled statistics, CDFs) from
/// bare records, e.g. after reading `records.csv` back.
pub fn reduce_records(records: Vec<ErrorRecord>) -> Result<McReport, ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::Empty("no records to reduce"));
    }
    let mut records = records;
    for r in &mut records {
        r.outlier = false;
    }
    let mut solvers: Vec<SolverKind> = records.iter().map(|r| r.solver).collect();
    solvers.sort_unstable();
    solvers.dedup();

    // per-cell trim
    let mut by_cell: BTreeMap<(usize, SolverKind), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_cell.entry((r.point_id, r.solver)).or_default().push(i);
    }
    let mut per_point = Vec::new();
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
        let mut mean_abs = [0.0; 6];
        for s in &survivors {
            for k in 0..6 {
                mean_abs[k] += s.abs_errors[k] / survivors.len() as f64;
            }
        }
        let t = &survivors[0].truth;
        per_point.push(PointSummary {
            solver,
            point_id,
            x_m: t.x,
            y_m: t.y,
            gamma_deg: t.gamma.to_degrees(),
            n: survivors.len(),
            outliers,
            mean_abs,
        });
    }

    let mut pooled = Vec::new();
    let mut cdfs = Vec::new();
    for &solver in &solvers {
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
            mean[k] = mean_of(&vals);
            median[k] = median_of(&vals);
            std[k] = std_of(&vals, mean[k]);
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
        skipped_points: Vec::new(),
        solver_failures: Vec::new(),
    })
}

/// Pooled mean/median/std per coordinate per solver after a one-pass
/// 3-sigma exclusion over the given record set.
pub fn summarize(records: &[ErrorRecord]) -> Result<Vec<PooledSummary>, ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::Empty("summarize input"));
    }
    let mut by_solver: BTreeMap<SolverKind, Vec<ErrorRecord>> = BTreeMap::new();
    for r in records {
        by_solver
            .entry(r.solver)
            .or_default()
            .push(ErrorRecord {
                outlier: false,
                ..r.clone()
            });
    }
    let mut out = Vec::new();
    for (solver, mut group) in by_solver {
        let outliers = mark_outliers(&mut group);
        let survivors: Vec<&ErrorRecord> = group.iter().filter(|r| !r.outlier).collect();
        if survivors.is_empty() {
            continue;
        }
        let mut mean = [0.0; 6];
        let mut median = [0.0; 6];
        let mut std = [0.0; 6];
        for k in 0..6 {
            let mut vals: Vec<f64> = survivors.iter().map(|r| r.abs_errors[k]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            mean[k] = mean_of(&vals);
            median[k] = median_of(&vals);
            std[k] = std_of(&vals, mean[k]);
        }
        out.push(PooledSummary {
            solver,
            n: survivors.len(),
            outliers,
            mean,
            median,
            std,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(solver: SolverKind, errs: [f64; 6]) -> ErrorRecord {
        let pose = Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        ErrorRecord {
            solver,
            point_id: 0,
            trial: 0,
            truth: pose,
            estimate: pose,
            abs_errors: errs,
            outlier: false,
        }
    }

    #[test]
    fn cdf_basics() {
        assert!(cdf(&[]).is_err());
        let c = cdf(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(c.last().unwrap().1, 1.0);
        assert!(c.iter().all(|&(v, _)| v == 2.0));

        let c = cdf(&[3.0, 1.0, 4.0, 2.0]).unwrap();
        let fractions: Vec<f64> = c.iter().map(|&(_, f)| f).collect();
        assert_eq!(fractions, vec![0.25, 0.5, 0.75, 1.0]);
        let values: Vec<f64> = c.iter().map(|&(v, _)| v).collect();
        assert_eq!(values, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn cdf_matches_sort_oracle() {
        let mut state = 0xc0ffee_u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state as f64 / u64::MAX as f64
        };
        let values: Vec<f64> = (0..97).map(|_| next() * 10.0).collect();
        let c = cdf(&values).unwrap();
        // monotone, ends at 1, and each value's fraction equals its rank
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, &(v, f)) in c.iter().enumerate() {
            assert_eq!(v, sorted[i]);
            assert!((f - (i + 1) as f64 / 97.0).abs() < 1e-15);
            if i > 0 {
                assert!(c[i].0 >= c[i - 1].0 && c[i].1 > c[i - 1].1);
            }
        }
        assert_eq!(c.last().unwrap().1, 1.0);
    }

    #[test]
    fn all_equal_records_have_no_outliers() {
        let records: Vec<ErrorRecord> = (0..10)
            .map(|_| record(SolverKind::Ippe, [1.0; 6]))
            .collect();
        let s = summarize(&records).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].outliers, 0);
        assert_eq!(s[0].std, [0.0; 6]);
        assert_eq!(s[0].mean, [1.0; 6]);
    }

    #[test]
    fn spike_is_excluded_once() {
        let mut records: Vec<ErrorRecord> = (0..40)
            .map(|i| {
                record(
                    SolverKind::Rpnp,
                    [1.0 + 0.01 * ((i % 7) as f64), 1.0, 1.0, 0.1, 0.1, 0.1],
                )
            })
            .collect();
        // one 10-sigma spike in x
        records.push(record(SolverKind::Rpnp, [5.0, 1.0, 1.0, 0.1, 0.1, 0.1]));
        let s = summarize(&records).unwrap();
        assert_eq!(s[0].outliers, 1);
        assert_eq!(s[0].n, 40);
        assert!(s[0].mean[0] < 1.1);
    }

    #[test]
    fn summarize_matches_hand_computation() {
        let records = vec![
            record(SolverKind::Epnp, [1.0, 2.0, 3.0, 0.0, 0.0, 0.0]),
            record(SolverKind::Epnp, [2.0, 4.0, 6.0, 0.0, 0.0, 0.0]),
            record(SolverKind::Epnp, [3.0, 6.0, 9.0, 0.0, 0.0, 0.0]),
        ];
        let s = summarize(&records).unwrap();
        assert_eq!(s[0].mean[0], 2.0);
        assert_eq!(s[0].median[1], 4.0);
        assert!((s[0].std[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn record_wraps_angle_errors() {
        let truth = Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, 3.1);
        let estimate = Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, -3.1);
        let r = ErrorRecord::new(SolverKind::Ippe, 0, 0, truth, estimate);
        // the short way around is 2*pi - 6.2 rad, about 4.78 degrees
        assert!(r.abs_errors[5] < 5.0, "gamma error {}", r.abs_errors[5]);
    }
}
