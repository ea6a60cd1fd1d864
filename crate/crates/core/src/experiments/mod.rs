//! Monte Carlo study harness: floor-grid accuracy maps, the nine-point yaw
//! sweep, transmitter-perturbation robustness, and the error-statistics
//! reductions (3-sigma trimmed summaries and CDFs) behind them.

mod io;
mod runner;
mod scenario;
mod stats;

pub use io::{
    read_records, write_cdfs, write_mean_maps, write_records, write_summary,
};
pub use runner::{run_grid, run_nine_points, run_robustness, Scenario};
pub use scenario::{
    CodebookConfig, McConfig, RobustnessConfig, RoomConfig, ScenarioConfig, SignalConfig,
};
pub use stats::{
    cdf, reduce_records, summarize, CdfSeries, Coordinate, ErrorRecord, McReport, PointSummary,
    PooledSummary,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Pipeline(#[from] crate::pipeline::PipelineError),
    #[error(transparent)]
    Signal(#[from] crate::signals::SignalError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("report i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed records file: {0}")]
    Malformed(String),
}
