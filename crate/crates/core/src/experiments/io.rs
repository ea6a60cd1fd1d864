//! CSV emission of study results. All files are written atomically
//! (temporary file + rename) with stable, documented columns.

use super::stats::{Coordinate, ErrorRecord, McReport};
use super::ExperimentError;
use crate::geometry::Pose;
use crate::pnp::SolverKind;
use std::path::{Path, PathBuf};

fn atomic_write(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// `records.csv`: one row per trial per solver, long form.
pub fn write_records(dir: &Path, report: &McReport) -> Result<PathBuf, ExperimentError> {
    let mut out = String::from(
        "solver,point_id,trial,true_x_m,true_y_m,true_z_m,true_alpha_deg,true_beta_deg,\
         true_gamma_deg,est_x_m,est_y_m,est_z_m,est_alpha_deg,est_beta_deg,est_gamma_deg,\
         abs_dx_cm,abs_dy_cm,abs_dz_cm,abs_dalpha_deg,abs_dbeta_deg,abs_dgamma_deg,outlier\n",
    );
    for r in &report.records {
        let t = &r.truth;
        let e = &r.estimate;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.solver,
            r.point_id,
            r.trial,
            t.x,
            t.y,
            t.z,
            t.alpha.to_degrees(),
            t.beta.to_degrees(),
            t.gamma.to_degrees(),
            e.x,
            e.y,
            e.z,
            e.alpha.to_degrees(),
            e.beta.to_degrees(),
            e.gamma.to_degrees(),
            r.abs_errors[0],
            r.abs_errors[1],
            r.abs_errors[2],
            r.abs_errors[3],
            r.abs_errors[4],
            r.abs_errors[5],
            u8::from(r.outlier),
        ));
    }
    let path = dir.join("records.csv");
    atomic_write(&path, &out)?;
    Ok(path)
}

/// Reads a `records.csv` back (for re-reduction).
pub fn read_records(path: &Path) -> Result<Vec<ErrorRecord>, ExperimentError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| ExperimentError::Malformed("empty records file".into()))?;
    if !header.starts_with("solver,point_id,trial") {
        return Err(ExperimentError::Malformed(format!(
            "unexpected header {header:?}"
        )));
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 22 {
            return Err(ExperimentError::Malformed(format!(
                "line {}: expected 22 columns, got {}",
                lineno + 2,
                cols.len()
            )));
        }
        let f = |i: usize| -> Result<f64, ExperimentError> {
            cols[i].parse().map_err(|_| {
                ExperimentError::Malformed(format!("line {}: bad float {:?}", lineno + 2, cols[i]))
            })
        };
        let solver: SolverKind = cols[0]
            .parse()
            .map_err(|e| ExperimentError::Malformed(format!("line {}: {e}", lineno + 2)))?;
        let truth = Pose::new(
            f(3)?,
            f(4)?,
            f(5)?,
            f(6)?.to_radians(),
            f(7)?.to_radians(),
            f(8)?.to_radians(),
        );
        let estimate = Pose::new(
            f(9)?,
            f(10)?,
            f(11)?,
            f(12)?.to_radians(),
            f(13)?.to_radians(),
            f(14)?.to_radians(),
        );
        let mut rec = ErrorRecord::new(
            solver,
            cols[1].parse().map_err(|_| {
                ExperimentError::Malformed(format!("line {}: bad point id", lineno + 2))
            })?,
            cols[2].parse().map_err(|_| {
                ExperimentError::Malformed(format!("line {}: bad trial", lineno + 2))
            })?,
            truth,
            estimate,
        );
        rec.outlier = cols[21] == "1";
        records.push(rec);
    }
    Ok(records)
}

/// `summary.csv`: pooled and per-point mean/median/std rows.
pub fn write_summary(dir: &Path, report: &McReport) -> Result<PathBuf, ExperimentError> {
    let mut out = String::from(
        "solver,scope,point_id,x_m,y_m,gamma_deg,n,outliers,\
         mean_dx_cm,mean_dy_cm,mean_dz_cm,mean_dalpha_deg,mean_dbeta_deg,mean_dgamma_deg,\
         median_dx_cm,median_dy_cm,median_dz_cm,median_dalpha_deg,median_dbeta_deg,median_dgamma_deg,\
         std_dx_cm,std_dy_cm,std_dz_cm,std_dalpha_deg,std_dbeta_deg,std_dgamma_deg\n",
    );
    for p in &report.pooled {
        out.push_str(&format!(
            "{},pooled,,,,,{},{}",
            p.solver, p.n, p.outliers
        ));
        for block in [&p.mean, &p.median, &p.std] {
            for v in block.iter() {
                out.push_str(&format!(",{v}"));
            }
        }
        out.push('\n');
    }
    for p in &report.per_point {
        out.push_str(&format!(
            "{},point,{},{},{},{},{},{}",
            p.solver, p.point_id, p.x_m, p.y_m, p.gamma_deg, p.n, p.outliers
        ));
        for v in p.mean_abs.iter() {
            out.push_str(&format!(",{v}"));
        }
        // per-point rows only carry means
        out.push_str(&",".repeat(12));
        out.push('\n');
    }
    let path = dir.join("summary.csv");
    atomic_write(&path, &out)?;
    Ok(path)
}

/// `cdf_<coordinate>.csv` files: solver, error value, cumulative fraction.
pub fn write_cdfs(dir: &Path, report: &McReport) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut paths = Vec::new();
    for coord in Coordinate::ALL {
        let unit = match coord {
            Coordinate::X | Coordinate::Y | Coordinate::Z => "cm",
            _ => "deg",
        };
        let mut out = format!("solver,abs_error_{unit},cum_fraction\n");
        for series in report.cdfs.iter().filter(|c| c.coordinate == coord) {
            for &(v, f) in &series.points {
                out.push_str(&format!("{},{},{}\n", series.solver, v, f));
            }
        }
        let path = dir.join(format!("cdf_{}.csv", coord.name()));
        atomic_write(&path, &out)?;
        paths.push(path);
    }
    Ok(paths)
}

/// `mean_maps.csv`: long-form per-point mean absolute errors for plotting.
pub fn write_mean_maps(dir: &Path, report: &McReport) -> Result<PathBuf, ExperimentError> {
    let mut out = String::from("x_m,y_m,gamma_deg,solver,coordinate,mean_abs_error\n");
    for p in &report.per_point {
        for (k, coord) in Coordinate::ALL.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.x_m,
                p.y_m,
                p.gamma_deg,
                p.solver,
                coord.name(),
                p.mean_abs[k]
            ));
        }
    }
    let path = dir.join("mean_maps.csv");
    atomic_write(&path, &out)?;
    Ok(path)
}
