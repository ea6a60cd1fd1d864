//! Study configuration, loadable from a TOML file. Every key has a desk
//! default except the master seed; unknown keys are rejected so typos fail
//! loudly.

use super::ExperimentError;
use crate::pipeline::EmissionMode;
use crate::pnp::SolverKind;
use crate::qada::CalibrationParams;
use crate::signals::{AmplitudeModel, CodeFamily, RatioRule};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoomConfig {
    /// Floor extent (m), centered on the beacon square.
    pub x_extent_m: f64,
    pub y_extent_m: f64,
    /// Beacon plane height above the floor (m).
    pub height_m: f64,
    /// Beacon square side (m), centered on the room axis.
    pub beacon_square_side_m: f64,
}

impl Default for RoomConfig {
    fn default() -> Self {
        RoomConfig {
            x_extent_m: 2.0,
            y_extent_m: 2.0,
            height_m: 3.4,
            beacon_square_side_m: 1.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookConfig {
    pub family: CodeFamily,
    pub chip_length: usize,
    pub samples_per_chip: usize,
    pub code_seed: u64,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        CodebookConfig {
            family: CodeFamily::Kasami,
            chip_length: 1023,
            samples_per_chip: 64,
            code_seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SignalConfig {
    pub amplitude: AmplitudeModel,
    pub ratio_rule: RatioRule,
    pub emission: EmissionMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    /// Floor grid pitch (m).
    pub grid_step_m: f64,
    /// Realizations per evaluated point.
    pub trials: usize,
    /// Yaw angles evaluated at every grid point (degrees).
    pub gammas_deg: Vec<f64>,
    /// Yaw sweep pitch for the nine-point study (degrees).
    pub nine_gamma_step_deg: f64,
    pub solvers: Vec<SolverKind>,
    /// Apply reprojection Gauss-Newton refinement to every solution.
    pub refine: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            grid_step_m: 0.25,
            trials: 20,
            gammas_deg: vec![0.0, 120.0, 240.0],
            nine_gamma_step_deg: 30.0,
            solvers: vec![SolverKind::Ippe, SolverKind::Rpnp, SolverKind::Epnp],
            refine: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessConfig {
    /// Per-axis position noise fed to the solver's assumed beacon (cm).
    pub sigma_cm: f64,
    /// Which transmitter is perturbed.
    pub perturbed_beacon: u32,
    /// Redraw the perturbation every trial; otherwise once per run.
    pub redraw_per_trial: bool,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            sigma_cm: 1.0,
            perturbed_beacon: 0,
            redraw_per_trial: true,
        }
    }
}

/// Full study description. `seed` is the only mandatory key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Master seed; every random stream in a run derives from it.
    pub seed: u64,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default)]
    pub room: RoomConfig,
    #[serde(default)]
    pub codebook: CodebookConfig,
    #[serde(default = "CalibrationParams::reference")]
    pub calibration: CalibrationParams,
    #[serde(default)]
    pub signal: SignalConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub robustness: RobustnessConfig,
}

fn default_snr() -> f64 {
    10.0
}

impl ScenarioConfig {
    pub fn desk_default(seed: u64) -> Self {
        ScenarioConfig {
            seed,
            snr_db: default_snr(),
            room: RoomConfig::default(),
            codebook: CodebookConfig::default(),
            calibration: CalibrationParams::reference(),
            signal: SignalConfig::default(),
            mc: McConfig::default(),
            robustness: RobustnessConfig::default(),
        }
    }

    /// Switches the desk-scale Monte Carlo knobs to the full study scale
    /// (10 cm grid, 50 trials per point, 10-degree nine-point sweep).
    pub fn at_paper_scale(mut self) -> Self {
        self.mc.grid_step_m = 0.10;
        self.mc.trials = 50;
        self.mc.nine_gamma_step_deg = 10.0;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.mc.grid_step_m > 0.0) {
            return Err(ExperimentError::Config(
                "mc.grid_step_m must be positive".into(),
            ));
        }
        if self.mc.trials == 0 {
            return Err(ExperimentError::Config("mc.trials must be at least 1".into()));
        }
        if self.mc.solvers.is_empty() {
            return Err(ExperimentError::Config("mc.solvers must not be empty".into()));
        }
        if self.mc.gammas_deg.is_empty() {
            return Err(ExperimentError::Config(
                "mc.gammas_deg must not be empty".into(),
            ));
        }
        if !(self.mc.nine_gamma_step_deg > 0.0) {
            return Err(ExperimentError::Config(
                "mc.nine_gamma_step_deg must be positive".into(),
            ));
        }
        if !(self.room.height_m > 0.0
            && self.room.x_extent_m > 0.0
            && self.room.y_extent_m > 0.0
            && self.room.beacon_square_side_m > 0.0)
        {
            return Err(ExperimentError::Config(
                "room extents must be positive".into(),
            ));
        }
        if self.robustness.sigma_cm < 0.0 {
            return Err(ExperimentError::Config(
                "robustness.sigma_cm must be non-negative".into(),
            ));
        }
        self.calibration
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }
}
