//! Economic model-predictive controller.
//!
//! Minimizes peak demand, energy, and discomfort over the horizon:
//!
//! ```text
//! w_d·max_l(u_hp,l + u_bh,l) + Δt·Σ_l [ w_e·(u_hp,l + u_bh,l) + w_c,l·|x_l - target_l| ]
//! ```
//!
//! The max and absolute values are lifted into a linear program with a
//! demand epigraph variable and per-step comfort slacks; the states are
//! eliminated through the affine dynamics, so variables are the powers, the
//! slacks, and the peak. Every 12 hours the discomfort price is re-tuned:
//! the lowest candidate whose predicted plan keeps time-average PPD under
//! the target wins, scaled up during the day and down overnight.

use crate::analysis::{pmv_ppd, ComfortAssumptions};
use crate::lp::LinearProgram;
use crate::plant::WeatherPoint;
use crate::solver::QuadCostParams;
use crate::thermal::{zoh_phi, CopCurve, PhysicalParams};

use super::{
    command_setpoint, ControlError, ControllerDecision, DecisionContext, DecisionDiagnostics,
    EconomicWeights, ExogenousGainModel, PowerBounds, SupervisoryController,
};

/// Identified prediction model: physical parameters (backup efficiency
/// assumed 1, solar handled by the gain regressor) plus the COP curve.
#[derive(Debug, Clone)]
pub struct MpcModel {
    pub params: PhysicalParams,
    pub curve: CopCurve,
    pub qe_model: Option<ExogenousGainModel>,
}

impl MpcModel {
    /// Per-step affine dynamics with the exogenous-gain forecast folded in.
    fn steps(&self, forecast: &[WeatherPoint], local_hour: u32) -> Result<Vec<AffineStep>, ControlError> {
        let mut steps = Vec::with_capacity(forecast.len());
        for (l, w) in forecast.iter().enumerate() {
            let cm = crate::thermal::continuous_matrices(&self.params, &self.curve, w.t_out)?;
            let m = crate::thermal::discretize_zoh(&cm, 1.0)?;
            let q_e = self
                .qe_model
                .as_ref()
                .map(|qe| qe.predict(w.t_out, w.i_sol, w.wind, (local_hour + l as u32) % 24))
                .unwrap_or(0.0);
            let gain = zoh_phi(cm.a_c, 1.0) / self.params.capacitance;
            steps.push(AffineStep {
                a: m.a,
                b_u: m.b_u,
                offset: m.b_d[0] * self.params.t_mass
                    + m.b_d[1] * w.t_out
                    + m.b_d[2] * w.i_sol
                    + gain * q_e,
            });
        }
        Ok(steps)
    }
}

#[derive(Debug, Clone, Copy)]
struct AffineStep {
    a: f64,
    b_u: [f64; 2],
    offset: f64,
}

/// Open-loop plan produced by one LP solve.
#[derive(Debug, Clone)]
pub struct MpcPlan {
    pub u: Vec<[f64; 2]>,
    pub x: Vec<f64>,
    pub objective: f64,
}

fn solve_epigraph_lp(
    steps: &[AffineStep],
    x0: f64,
    targets: &[f64],
    w_c: &[f64],
    weights: &EconomicWeights,
    bounds: &PowerBounds,
) -> Result<MpcPlan, ControlError> {
    let l = steps.len();
    assert_eq!(targets.len(), l);
    assert_eq!(w_c.len(), l);

    // Sensitivities of x_{k+1} to each flattened power variable, plus the
    // zero-control response.
    let nu = 2 * l;
    let mut sens = vec![vec![0.0; nu]; l];
    let mut free = vec![0.0; l];
    let mut x = x0;
    for (k, s) in steps.iter().enumerate() {
        if k > 0 {
            let (prev, cur) = {
                let (a, b) = sens.split_at_mut(k);
                (&a[k - 1], &mut b[0])
            };
            for i in 0..2 * k {
                cur[i] = s.a * prev[i];
            }
        }
        sens[k][2 * k] = s.b_u[0];
        sens[k][2 * k + 1] = s.b_u[1];
        x = s.a * x + s.offset;
        free[k] = x;
    }

    // Variables: [u_hp/bh interleaved (2L) | comfort slacks (L) | peak D].
    let n_vars = nu + l + 1;
    let d_col = nu + l;
    let mut objective = vec![0.0; n_vars];
    for i in 0..nu {
        objective[i] = weights.w_e; // Δt = 1 h
    }
    for (k, wc) in w_c.iter().enumerate() {
        objective[nu + k] = *wc;
    }
    objective[d_col] = weights.w_d;

    let mut rows = Vec::with_capacity(4 * l);
    let mut rhs = Vec::with_capacity(4 * l);
    for k in 0..l {
        // x_k - e_k ≤ target_k  and  -x_k - e_k ≤ -target_k.
        let mut up = vec![0.0; n_vars];
        let mut dn = vec![0.0; n_vars];
        for i in 0..2 * (k + 1) {
            up[i] = sens[k][i];
            dn[i] = -sens[k][i];
        }
        up[nu + k] = -1.0;
        dn[nu + k] = -1.0;
        rows.push(up);
        rhs.push(targets[k] - free[k]);
        rows.push(dn);
        rhs.push(free[k] - targets[k]);

        // u_hp + u_bh - D ≤ 0.
        let mut demand = vec![0.0; n_vars];
        demand[2 * k] = 1.0;
        demand[2 * k + 1] = 1.0;
        demand[d_col] = -1.0;
        rows.push(demand);
        rhs.push(0.0);

        // Upper power bounds (lower bounds are the simplex nonnegativity).
        let mut hp = vec![0.0; n_vars];
        hp[2 * k] = 1.0;
        rows.push(hp);
        rhs.push(bounds.hp.hi);
        let mut bh = vec![0.0; n_vars];
        bh[2 * k + 1] = 1.0;
        rows.push(bh);
        rhs.push(bounds.bh.hi);
    }

    let lp = LinearProgram { objective, rows, rhs };
    let sol = lp.solve()?;

    let u: Vec<[f64; 2]> = (0..l).map(|k| [sol.x[2 * k], sol.x[2 * k + 1]]).collect();
    let mut xs = Vec::with_capacity(l);
    let mut xk = x0;
    for (k, s) in steps.iter().enumerate() {
        xk = s.a * xk + s.b_u[0] * u[k][0] + s.b_u[1] * u[k][1] + s.offset;
        xs.push(xk);
    }
    Ok(MpcPlan { u, x: xs, objective: sol.objective })
}

/// Open-loop LP plan over the whole horizon.
#[allow(clippy::too_many_arguments)]
pub fn mpc_plan(
    x0: f64,
    forecast: &[WeatherPoint],
    targets: &[f64],
    local_hour: u32,
    model: &MpcModel,
    w_c: &[f64],
    weights: &EconomicWeights,
    bounds: &PowerBounds,
) -> Result<MpcPlan, ControlError> {
    if forecast.len() != targets.len() || forecast.is_empty() {
        return Err(ControlError::ShortForecast { got: forecast.len(), expected: targets.len().max(1) });
    }
    let steps = model.steps(forecast, local_hour)?;
    solve_epigraph_lp(&steps, x0, targets, w_c, weights, bounds)
}

/// Solve the receding-horizon step and wrap the first action as a decision.
#[allow(clippy::too_many_arguments)]
pub fn mpc_decide(
    x0: f64,
    forecast: &[WeatherPoint],
    targets: &[f64],
    local_hour: u32,
    model: &MpcModel,
    w_c: &[f64],
    weights: &EconomicWeights,
    bounds: &PowerBounds,
) -> Result<ControllerDecision, ControlError> {
    if forecast.len() != targets.len() || forecast.is_empty() {
        return Err(ControlError::ShortForecast { got: forecast.len(), expected: targets.len().max(1) });
    }
    let steps = model.steps(forecast, local_hour)?;
    let plan = solve_epigraph_lp(&steps, x0, targets, w_c, weights, bounds)?;
    Ok(ControllerDecision {
        u_star: Some(plan.u[0]),
        x_next_pred: Some(plan.x[0]),
        setpoint_command: command_setpoint(plan.x[0]),
        diagnostics: DecisionDiagnostics { objective: Some(plan.objective), solver_iterations: None },
    })
}

/// Sweep candidate discomfort prices (ascending); return the lowest whose
/// predicted plan keeps time-average PPD at or under `ppd_target`, scaled
/// by `scale`. Saturates at the largest candidate (flagged) when none pass.
#[allow(clippy::too_many_arguments)]
pub fn tune_comfort_weight(
    model: &MpcModel,
    x0: f64,
    forecast: &[WeatherPoint],
    targets: &[f64],
    local_hour: u32,
    candidates: &[f64],
    ppd_target: f64,
    scale: f64,
    weights: &EconomicWeights,
    bounds: &PowerBounds,
    assumptions: &ComfortAssumptions,
) -> Result<(f64, bool), ControlError> {
    if candidates.is_empty() {
        return Err(ControlError::NoCandidates);
    }
    let steps = model.steps(forecast, local_hour)?;
    for &candidate in candidates {
        let w_c = vec![candidate; targets.len()];
        let plan = solve_epigraph_lp(&steps, x0, targets, &w_c, weights, bounds)?;
        let mut sum = 0.0;
        for x in &plan.x {
            sum += pmv_ppd(x.clamp(0.0, 50.0), assumptions)?;
        }
        if sum / plan.x.len() as f64 <= ppd_target {
            return Ok((candidate * scale, false));
        }
    }
    Ok((candidates[candidates.len() - 1] * scale, true))
}

/// The receding-horizon controller with 12-hourly comfort-weight retuning.
#[derive(Debug, Clone)]
pub struct MpcController {
    pub model: MpcModel,
    pub weights: EconomicWeights,
    pub candidates: Vec<f64>,
    pub ppd_target: f64,
    pub day_scale: f64,
    pub night_scale: f64,
    pub retune_every_hours: usize,
    pub assumptions: ComfortAssumptions,
    /// Currently active (already scaled) discomfort price.
    w_c_active: f64,
}

impl MpcController {
    pub fn new(model: MpcModel, weights: EconomicWeights) -> Self {
        let w_c0 = weights.w_c;
        Self {
            model,
            weights,
            candidates: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            ppd_target: 10.0,
            day_scale: 1.1,
            night_scale: 0.2,
            retune_every_hours: 12,
            assumptions: ComfortAssumptions::default(),
            w_c_active: w_c0,
        }
    }

    /// Internal quadratic-cost parameters are not used by the LP; kept for
    /// checkpoints comparing against the learning controller.
    pub fn quad_cost_hint(&self) -> QuadCostParams {
        QuadCostParams { o_state: 1.0, r_hp: 1.0, r_bh: 1.0 }
    }
}

impl SupervisoryController for MpcController {
    fn decide(&mut self, ctx: &DecisionContext) -> Result<ControllerDecision, ControlError> {
        if ctx.step % self.retune_every_hours == 0 {
            let day = (7..23).contains(&ctx.local_hour);
            let scale = if day { self.day_scale } else { self.night_scale };
            let (w_c, _saturated) = tune_comfort_weight(
                &self.model,
                ctx.observed_temp,
                ctx.forecast,
                ctx.targets,
                ctx.local_hour,
                &self.candidates,
                self.ppd_target,
                scale,
                &self.weights,
                &ctx.bounds,
                &self.assumptions,
            )?;
            self.w_c_active = w_c;
        }
        let w_c = vec![self.w_c_active; ctx.targets.len()];
        mpc_decide(
            ctx.observed_temp,
            ctx.forecast,
            ctx.targets,
            ctx.local_hour,
            &self.model,
            &w_c,
            &self.weights,
            &ctx.bounds,
        )
    }

    fn name(&self) -> &'static str {
        "mpc"
    }
}
