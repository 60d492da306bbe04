//! Supervisory controllers and their shared interface.
//!
//! A supervisory controller sees the return-air temperature once an hour,
//! the weather forecast over the lookahead horizon, and the occupant's
//! setpoint schedule, and answers with a thermostat setpoint command. The
//! command is the quantized predicted-optimal next state for the optimizing
//! controllers, or a constant for the baseline. Controllers that learn
//! online receive the outcome of every step plus a midnight hook carrying
//! the day's read-back-validated transitions.

mod baseline;
mod exogenous;
mod ibex;
mod identify;
mod imitation;
mod mpc;
mod schedule;

pub use baseline::BaselineController;
pub use exogenous::{gain_features, ExogenousGainModel, KernelRidgeConfig};
pub use ibex::{IbexController, ParamSnapshot};
pub use identify::{
    estimate_r_out, fit_rm_c, implied_exogenous_gain, IdentifyError, SteadySample,
    SteadyStateFilter, TransitionSample,
};
pub use imitation::{
    imitation_pretrain, EpochLosses, IbexHyper, ImitationSample, Optimizer, PretrainOutcome,
};
pub use mpc::{mpc_decide, mpc_plan, tune_comfort_weight, MpcController, MpcModel, MpcPlan};
pub use schedule::{ScheduleError, SetpointSchedule};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::WeatherPoint;
use crate::solver::Bounds;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
    #[error(transparent)]
    Lp(#[from] crate::lp::LpError),
    #[error(transparent)]
    Thermal(#[from] crate::thermal::ThermalError),
    #[error("comfort-weight candidate list is empty")]
    NoCandidates,
    #[error("forecast has {got} points, expected {expected}")]
    ShortForecast { got: usize, expected: usize },
    #[error("training diverged at epoch {epoch} (loss {loss:.3e})")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Comfort(#[from] crate::analysis::AnalysisError),
}

/// Economic prices entering the MPC objective and the learning controller's
/// reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconomicWeights {
    /// Peak demand price, $/kW.
    pub w_d: f64,
    /// Energy price, $/kWh.
    pub w_e: f64,
    /// Discomfort price, $/(°C·h).
    pub w_c: f64,
}

impl Default for EconomicWeights {
    fn default() -> Self {
        Self { w_d: 0.8, w_e: 0.15, w_c: 3.0 }
    }
}

/// Round to the nearest 0.5 °C; exact ties round up.
pub fn quantize_setpoint(x: f64) -> f64 {
    (2.0 * x + 0.5).floor() / 2.0
}

/// Quantize and clamp into the sanity band every command must satisfy.
pub fn command_setpoint(x: f64) -> f64 {
    quantize_setpoint(x).clamp(10.0, 30.0)
}

/// Per-input power bounds shared by the optimizing controllers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBounds {
    pub hp: Bounds,
    pub bh: Bounds,
}

impl PowerBounds {
    pub fn new(hp_max: f64, bh_max: f64) -> Self {
        Self { hp: Bounds::new(0.0, hp_max), bh: Bounds::new(0.0, bh_max) }
    }

    pub fn as_array(&self) -> [Bounds; 2] {
        [self.hp, self.bh]
    }
}

/// What a controller hands back each hour.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerDecision {
    /// Optimal electrical powers `[P_hp, P_bh]`, absent for the baseline.
    pub u_star: Option<[f64; 2]>,
    /// Predicted next return-air temperature, absent for the baseline.
    pub x_next_pred: Option<f64>,
    /// The thermostat command actually sent; multiple of 0.5 °C in [10, 30].
    pub setpoint_command: f64,
    pub diagnostics: DecisionDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecisionDiagnostics {
    pub objective: Option<f64>,
    pub solver_iterations: Option<usize>,
}

/// Hourly context assembled by the episode runner.
#[derive(Debug, Clone)]
pub struct DecisionContext<'a> {
    /// Hour index within the episode.
    pub step: usize,
    /// Local hour of day, 0..24.
    pub local_hour: u32,
    /// Return-air observation (held at the last good value during a sensor
    /// gap).
    pub observed_temp: f64,
    /// Schedule target for the current hour.
    pub target_now: f64,
    /// Forecast for the next `horizon` hours, front element = current hour.
    pub forecast: &'a [WeatherPoint],
    /// Schedule targets for the states x_{t+1}..x_{t+horizon}.
    pub targets: &'a [f64],
    pub bounds: PowerBounds,
}

/// Observed outcome of one step, delivered before the next decision.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub step: usize,
    /// Return-air observation at the following hour.
    pub x_next_observed: f64,
    /// Whether the setpoint command was confirmed to have taken effect.
    pub readback_ok: bool,
}

pub trait SupervisoryController {
    fn decide(&mut self, ctx: &DecisionContext) -> Result<ControllerDecision, ControlError>;

    /// Outcome of step `t`, delivered at the start of step `t + 1`.
    fn notify_outcome(&mut self, _outcome: &StepOutcome) -> Result<(), ControlError> {
        Ok(())
    }

    /// Fires once per local midnight with the day boundary already crossed.
    fn end_of_day(&mut self) -> Result<(), ControlError> {
        Ok(())
    }

    fn name(&self) -> &'static str;
}
