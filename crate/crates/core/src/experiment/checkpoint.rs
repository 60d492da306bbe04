//! Parameter checkpoints: versioned JSON, written atomically.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controllers::{EpochLosses, ExogenousGainModel, IbexHyper};
use crate::solver::QuadCostParams;
use crate::thermal::{CopCurve, PhysicalParams};

use super::{write_atomic, ExperimentError};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Identification quality summary stored alongside the fitted model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IdentifyReport {
    pub steady_samples: usize,
    pub transient_samples: usize,
    /// One-step prediction RMSE on the held-out split, °C.
    pub held_out_rmse_c: f64,
    /// Training RMSE of the exogenous-gain regressor, kW.
    pub gain_rmse_kw: f64,
}

/// One hyperparameter grid point of the imitation phase.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridResult {
    pub alpha_imit: f64,
    pub lambda: f64,
    pub final_state_loss: f64,
    pub final_action_loss: f64,
    pub diverged: bool,
    pub selected: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "controller", rename_all = "kebab-case")]
pub enum CheckpointKind {
    Mpc {
        qe_model: Option<ExogenousGainModel>,
        report: IdentifyReport,
    },
    Ibex {
        hyper: IbexHyper,
        grid: Vec<GridResult>,
        /// Per-epoch losses of the selected grid point.
        history: Vec<EpochLosses>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub params: PhysicalParams,
    /// Present for the learning controller.
    pub cost: Option<QuadCostParams>,
    pub cop: CopCurve,
    pub kind: CheckpointKind,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), ExperimentError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| ExperimentError::Data(e.to_string()))?;
        write_atomic(path, &text)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ExperimentError::Io { path: path.display().to_string(), source })?;
        let ckpt: Self =
            serde_json::from_str(&text).map_err(|e| ExperimentError::Data(e.to_string()))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(ExperimentError::Data(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }
}
