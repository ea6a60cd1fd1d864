//! Capture persistence: CSV samples plus a structured-text sidecar header
//! so captures can be replayed across runs.

use super::{CodeBook, CodeFamily, QadaCapture, SignalError};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Everything needed to rebuild the codebook a capture was made with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeBookDescriptor {
    pub family: CodeFamily,
    pub chip_length: usize,
    pub samples_per_chip: usize,
    pub count: usize,
    pub seed: u64,
}

impl CodeBookDescriptor {
    pub fn of(book: &CodeBook, count: usize) -> Self {
        CodeBookDescriptor {
            family: book.family,
            chip_length: book.chip_length,
            samples_per_chip: book.samples_per_chip,
            count,
            seed: book.seed,
        }
    }

    pub fn build(&self) -> Result<CodeBook, SignalError> {
        super::gen_codes(self.family, self.chip_length, self.count, self.seed)?
            .with_samples_per_chip(self.samples_per_chip)
    }
}

/// Sidecar header for a capture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureMeta {
    pub sample_count: usize,
    pub snr_db: f64,
    pub seed: u64,
    /// Beacons emitting in this capture.
    pub beacon_ids: Vec<u32>,
    pub codebook: CodeBookDescriptor,
}

fn meta_path(capture_path: &Path) -> PathBuf {
    let mut os = capture_path.as_os_str().to_owned();
    os.push(".meta.toml");
    PathBuf::from(os)
}

/// Writes `<path>` as CSV (index, v_sum, v_bt, v_lr) and
/// `<path>.meta.toml` as the sidecar header.
pub fn write_capture(
    path: &Path,
    capture: &QadaCapture,
    meta: &CaptureMeta,
) -> Result<(), SignalError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(["index", "v_sum", "v_bt", "v_lr"])
        .map_err(csv_io)?;
    for i in 0..capture.sample_count() {
        w.write_record(&[
            i.to_string(),
            capture.v_sum[i].to_string(),
            capture.v_bt[i].to_string(),
            capture.v_lr[i].to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    let text =
        toml::to_string(meta).map_err(|e| SignalError::Malformed(e.to_string()))?;
    std::fs::write(meta_path(path), text)?;
    Ok(())
}

/// Reads a capture and its sidecar header back.
pub fn read_capture(path: &Path) -> Result<(QadaCapture, CaptureMeta), SignalError> {
    let meta_text = std::fs::read_to_string(meta_path(path))?;
    let meta: CaptureMeta =
        toml::from_str(&meta_text).map_err(|e| SignalError::Malformed(e.to_string()))?;
    let mut r = csv::Reader::from_path(path).map_err(csv_io)?;
    let mut v_sum = Vec::with_capacity(meta.sample_count);
    let mut v_bt = Vec::with_capacity(meta.sample_count);
    let mut v_lr = Vec::with_capacity(meta.sample_count);
    for rec in r.records() {
        let rec = rec.map_err(|e| SignalError::Malformed(e.to_string()))?;
        if rec.len() != 4 {
            return Err(SignalError::Malformed(format!(
                "expected 4 columns, got {}",
                rec.len()
            )));
        }
        let parse = |idx: usize| -> Result<f64, SignalError> {
            rec[idx]
                .parse()
                .map_err(|_| SignalError::Malformed(format!("bad float {:?}", &rec[idx])))
        };
        v_sum.push(parse(1)?);
        v_bt.push(parse(2)?);
        v_lr.push(parse(3)?);
    }
    if v_sum.len() != meta.sample_count {
        return Err(SignalError::Malformed(format!(
            "sample_count {} but {} rows",
            meta.sample_count,
            v_sum.len()
        )));
    }
    Ok((
        QadaCapture {
            v_sum,
            v_bt,
            v_lr,
            snr_db: meta.snr_db,
            seed: meta.seed,
            out_of_field: Vec::new(),
        },
        meta,
    ))
}

fn csv_io(e: csv::Error) -> SignalError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => SignalError::Io(io),
        other => SignalError::Malformed(format!("{other:?}")),
    }
}
