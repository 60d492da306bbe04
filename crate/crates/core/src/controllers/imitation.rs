//! Imitation pre-training of the learnable policy.
//!
//! Fits all nine learnable parameters — six physical, three cost weights —
//! by descending the imitation loss over logged expert behaviour:
//!
//! ```text
//! L_imit = (1/M)·Σ ‖x_{t+1} - x*_{t+1}(θ)‖² + λ·‖u_t - u*_t(θ)‖²
//! ```
//!
//! Each sample solves the policy over its own lookahead context and
//! back-propagates through the KKT conditions, so one batch step costs M
//! solves plus M adjoint solves. Positivity of the capacitance,
//! resistances, and cost weights is maintained by projection after every
//! step; the backup efficiency stays in (0, 2] and the solar aperture is
//! unconstrained.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::solver::{
    policy_forward_backward, PolicyInput, QuadCostParams, SolverConfig, Upstream,
};
use crate::thermal::{CopCurve, Disturbance, PhysicalParams};

use super::{ControlError, PowerBounds};

/// Loss floor for projected cost/physical parameters.
pub const PARAM_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// Hyperparameters of the learning controller, offline and online.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbexHyper {
    /// Imitation learning rate.
    pub alpha_imit: f64,
    /// Online dynamics-update rate.
    pub alpha_state: f64,
    /// Online cost-calibration rate.
    pub alpha_cost: f64,
    /// Action-loss weight λ.
    pub lambda: f64,
    /// Batch size M.
    pub batch_m: usize,
    pub epochs: usize,
    /// Fixed discomfort price in the online reward, $/(°C·h).
    pub fixed_w_c: f64,
    pub optimizer: Optimizer,
    /// Gradient passes over the day buffer at each midnight update.
    pub state_update_passes: usize,
}

impl Default for IbexHyper {
    fn default() -> Self {
        Self {
            alpha_imit: 0.05,
            alpha_state: 0.002,
            alpha_cost: 0.01,
            lambda: 1000.0,
            batch_m: 24,
            epochs: 50,
            fixed_w_c: 3.0,
            optimizer: Optimizer::Adam,
            state_update_passes: 1,
        }
    }
}

impl IbexHyper {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.alpha_imit > 0.0 && self.alpha_state > 0.0 && self.alpha_cost > 0.0)
            || self.batch_m == 0
            || self.lambda < 0.0
        {
            return Err(ControlError::NoCandidates);
        }
        Ok(())
    }
}

/// One expert demonstration: the observed state/action/next-state plus the
/// forecast context the policy would have seen.
#[derive(Debug, Clone)]
pub struct ImitationSample {
    pub x_t: f64,
    pub u_expert: [f64; 2],
    pub x_next: f64,
    pub disturbances: Vec<Disturbance>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    pub state_loss: f64,
    pub action_loss: f64,
    pub imitation_loss: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub params: PhysicalParams,
    pub cost: QuadCostParams,
    pub history: Vec<EpochLosses>,
}

/// Nine-parameter flat view used by the optimizers.
fn pack(p: &PhysicalParams, c: &QuadCostParams) -> [f64; 9] {
    [p.capacitance, p.r_mass, p.r_out, p.t_mass, p.eta_backup, p.a_eff, c.o_state, c.r_hp, c.r_bh]
}

fn unpack(v: &[f64; 9]) -> (PhysicalParams, QuadCostParams) {
    (
        PhysicalParams {
            capacitance: v[0],
            r_mass: v[1],
            r_out: v[2],
            t_mass: v[3],
            eta_backup: v[4],
            a_eff: v[5],
        },
        QuadCostParams { o_state: v[6], r_hp: v[7], r_bh: v[8] },
    )
}

/// Clamp a flat parameter vector onto the feasible set.
pub(crate) fn project(v: &mut [f64; 9]) {
    v[0] = v[0].max(PARAM_FLOOR); // capacitance
    v[1] = v[1].max(PARAM_FLOOR); // r_mass
    v[2] = v[2].max(PARAM_FLOOR); // r_out
    v[4] = v[4].clamp(PARAM_FLOOR, 2.0); // eta
    v[6] = v[6].max(PARAM_FLOOR); // o_state
    v[7] = v[7].max(PARAM_FLOOR); // r_hp
    v[8] = v[8].max(PARAM_FLOOR); // r_bh
}

struct AdamState {
    m: [f64; 9],
    v: [f64; 9],
    t: usize,
}

impl AdamState {
    fn new() -> Self {
        Self { m: [0.0; 9], v: [0.0; 9], t: 0 }
    }

    fn step(&mut self, theta: &mut [f64; 9], grad: &[f64; 9], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t as i32);
        let bc2 = 1.0 - B2.powi(self.t as i32);
        for i in 0..9 {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            theta[i] -= lr * (self.m[i] / bc1) / ((self.v[i] / bc2).sqrt() + EPS);
        }
    }
}

/// Run the full imitation phase and return the fitted parameters with the
/// per-epoch loss history.
#[allow(clippy::too_many_arguments)]
pub fn imitation_pretrain(
    dataset: &[ImitationSample],
    hyper: &IbexHyper,
    init_params: &PhysicalParams,
    init_cost: &QuadCostParams,
    curve: &CopCurve,
    bounds: &PowerBounds,
    solver_cfg: &SolverConfig,
    seed: u64,
) -> Result<PretrainOutcome, ControlError> {
    hyper.validate()?;
    if dataset.is_empty() {
        return Err(ControlError::ShortForecast { got: 0, expected: 1 });
    }
    let mut theta = pack(init_params, init_cost);
    project(&mut theta);
    let mut adam = AdamState::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut rng);

        let mut state_sum = 0.0;
        let mut action_sum = 0.0;
        for batch in order.chunks(hyper.batch_m) {
            let m = batch.len() as f64;
            let (params, cost) = unpack(&theta);
            let mut grad = [0.0; 9];
            for &idx in batch {
                let s = &dataset[idx];
                let out = policy_forward_backward(
                    &PolicyInput {
                        params: &params,
                        cost: &cost,
                        curve,
                        x0: s.x_t,
                        disturbances: &s.disturbances,
                        targets: &s.targets,
                        bounds: bounds.as_array(),
                        dt: 1.0,
                    },
                    solver_cfg,
                )?;
                let x1 = out.solution.x_star[0];
                let u0 = out.solution.u_star[0];
                let dx = x1 - s.x_next;
                let du = [u0[0] - s.u_expert[0], u0[1] - s.u_expert[1]];
                state_sum += dx * dx;
                action_sum += du[0] * du[0] + du[1] * du[1];

                let horizon = s.disturbances.len();
                let mut d_x = vec![0.0; horizon];
                let mut d_u = vec![[0.0; 2]; horizon];
                d_x[0] = 2.0 * dx / m;
                d_u[0] = [2.0 * hyper.lambda * du[0] / m, 2.0 * hyper.lambda * du[1] / m];
                let g = out.backward(&Upstream { d_x: &d_x, d_u: &d_u }, solver_cfg)?;
                grad[0] += g.state.d_capacitance;
                grad[1] += g.state.d_r_mass;
                grad[2] += g.state.d_r_out;
                grad[3] += g.state.d_t_mass;
                grad[4] += g.state.d_eta;
                grad[5] += g.state.d_a_eff;
                grad[6] += g.cost.d_o_state;
                grad[7] += g.cost.d_r_hp;
                grad[8] += g.cost.d_r_bh;
            }
            match hyper.optimizer {
                Optimizer::Sgd => {
                    for i in 0..9 {
                        theta[i] -= hyper.alpha_imit * grad[i];
                    }
                }
                Optimizer::Adam => adam.step(&mut theta, &grad, hyper.alpha_imit),
            }
            project(&mut theta);
        }

        let n = dataset.len() as f64;
        let state_loss = state_sum / n;
        let action_loss = action_sum / n;
        let imitation_loss = state_loss + hyper.lambda * action_loss;
        history.push(EpochLosses { epoch, state_loss, action_loss, imitation_loss });
        // Divergence watch on the unweighted components, so that an extreme
        // λ cannot trip it on a healthy run.
        if !imitation_loss.is_finite() || state_loss > 1e6 || action_loss > 1e6 {
            return Err(ControlError::Diverged { epoch, loss: imitation_loss });
        }
    }

    let (params, cost) = unpack(&theta);
    Ok(PretrainOutcome { params, cost, history })
}
