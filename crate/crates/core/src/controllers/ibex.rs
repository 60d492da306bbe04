//! The learning controller: a differentiable box-constrained LQR policy
//! whose physical and cost parameters keep adapting during deployment.
//!
//! Each hour it solves the policy over the lookahead horizon, commands the
//! quantized predicted next state, and immediately calibrates its internal
//! quadratic cost by one gradient-ascent step on the estimated cumulative
//! reward of the predicted trajectory — the negative of the economic
//! objective, evaluated with a fixed discomfort price. Transitions whose
//! command passed read-back validation are buffered; at local midnight the
//! physical parameters take a gradient step on the day's state prediction
//! loss. Cost parameters are floored to stay solver-feasible; the solar
//! aperture is deliberately left free to go negative.

use serde::{Deserialize, Serialize};

use crate::solver::{
    policy_forward_backward, PolicyInput, PolicyOutput, QuadCostParams, SolverConfig, Upstream,
};
use crate::thermal::{CopCurve, Disturbance, PhysicalParams};

use super::imitation::PARAM_FLOOR;
use super::{
    command_setpoint, ControlError, ControllerDecision, DecisionContext, DecisionDiagnostics,
    EconomicWeights, IbexHyper, PowerBounds, StepOutcome, SupervisoryController,
};

/// Daily parameter checkpoint taken at each midnight update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot {
    pub after_step: usize,
    pub params: PhysicalParams,
    pub cost: QuadCostParams,
}

struct BufferedTransition {
    x_next_observed: f64,
    policy: PolicyOutput,
}

pub struct IbexController {
    pub params: PhysicalParams,
    pub cost: QuadCostParams,
    pub curve: CopCurve,
    pub hyper: IbexHyper,
    /// Reward prices; `w_c` is pinned to `hyper.fixed_w_c`.
    pub weights: EconomicWeights,
    pub solver_cfg: SolverConfig,
    /// Admit only read-back-validated transitions into the day buffer.
    pub validation_on: bool,
    pending: Option<(usize, PolicyOutput)>,
    buffer: Vec<BufferedTransition>,
    admitted: Vec<usize>,
    pub param_history: Vec<ParamSnapshot>,
    last_step: usize,
}

impl IbexController {
    pub fn new(
        params: PhysicalParams,
        cost: QuadCostParams,
        curve: CopCurve,
        hyper: IbexHyper,
        mut weights: EconomicWeights,
    ) -> Self {
        weights.w_c = hyper.fixed_w_c;
        Self {
            params,
            cost,
            curve,
            hyper,
            weights,
            solver_cfg: SolverConfig::default(),
            validation_on: true,
            pending: None,
            buffer: Vec::new(),
            admitted: Vec::new(),
            param_history: Vec::new(),
            last_step: 0,
        }
    }

    /// Steps whose transitions were admitted to any update buffer, over the
    /// whole deployment.
    pub fn admitted_steps(&self) -> &[usize] {
        &self.admitted
    }

    fn forecast_to_disturbances(&self, forecast: &[crate::plant::WeatherPoint]) -> Vec<Disturbance> {
        forecast
            .iter()
            .map(|w| Disturbance { t_mass: self.params.t_mass, t_out: w.t_out, i_sol: w.i_sol })
            .collect()
    }

    /// Solve the policy for an explicit context.
    pub fn solve_policy(
        &self,
        x0: f64,
        disturbances: &[Disturbance],
        targets: &[f64],
        bounds: &PowerBounds,
    ) -> Result<PolicyOutput, ControlError> {
        Ok(policy_forward_backward(
            &PolicyInput {
                params: &self.params,
                cost: &self.cost,
                curve: &self.curve,
                x0,
                disturbances,
                targets,
                bounds: bounds.as_array(),
                dt: 1.0,
            },
            &self.solver_cfg,
        )?)
    }

    /// One gradient-ascent step of the quadratic-cost calibration on a
    /// cached solution's predicted trajectory. Needs no plant feedback.
    pub fn update_cost(&mut self, policy: &PolicyOutput) -> Result<(), ControlError> {
        let sol = &policy.solution;
        let horizon = sol.u_star.len();
        let targets = policy.targets();

        // Reward R̂ = -J with J = w_d·max_l(Σu) + Σ_l [w_e·Σu + w_c·|x-T|].
        let mut peak = 0;
        for l in 1..horizon {
            let su = sol.u_star[l][0] + sol.u_star[l][1];
            if su > sol.u_star[peak][0] + sol.u_star[peak][1] {
                peak = l;
            }
        }
        let mut d_x = vec![0.0; horizon];
        let mut d_u = vec![[0.0; 2]; horizon];
        for l in 0..horizon {
            let err = sol.x_star[l] - targets[l];
            d_x[l] = -self.weights.w_c * sign(err);
            let mut du = -self.weights.w_e;
            if l == peak {
                du -= self.weights.w_d;
            }
            d_u[l] = [du, du];
        }
        let grads = policy.backward(&Upstream { d_x: &d_x, d_u: &d_u }, &self.solver_cfg)?;
        self.cost.o_state =
            (self.cost.o_state + self.hyper.alpha_cost * grads.cost.d_o_state).max(PARAM_FLOOR);
        self.cost.r_hp =
            (self.cost.r_hp + self.hyper.alpha_cost * grads.cost.d_r_hp).max(PARAM_FLOOR);
        self.cost.r_bh =
            (self.cost.r_bh + self.hyper.alpha_cost * grads.cost.d_r_bh).max(PARAM_FLOOR);
        Ok(())
    }

    /// Midnight update: descend the state-prediction loss over the day's
    /// validated transitions. Empty buffer is a no-op.
    pub fn update_state(&mut self) -> Result<(), ControlError> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        let m = self.buffer.len() as f64;
        for pass in 0..self.hyper.state_update_passes.max(1) {
            let mut g = [0.0; 6]; // C, R_m, R_out, T_m, eta, A_eff
            for item in &self.buffer {
                // First pass differentiates the cached solve; later passes
                // re-solve under the updated parameters.
                let fresh;
                let policy = if pass == 0 {
                    &item.policy
                } else {
                    fresh = policy_forward_backward(
                        &PolicyInput {
                            params: &self.params,
                            cost: &self.cost,
                            curve: &self.curve,
                            x0: item.policy.problem.x0,
                            disturbances: item.policy.disturbances(),
                            targets: item.policy.targets(),
                            bounds: item.policy.problem.bounds,
                            dt: 1.0,
                        },
                        &self.solver_cfg,
                    )?;
                    &fresh
                };
                let horizon = policy.solution.u_star.len();
                let mut d_x = vec![0.0; horizon];
                let d_u = vec![[0.0; 2]; horizon];
                d_x[0] = 2.0 * (policy.solution.x_star[0] - item.x_next_observed) / m;
                let grads = policy.backward(&Upstream { d_x: &d_x, d_u: &d_u }, &self.solver_cfg)?;
                g[0] += grads.state.d_capacitance;
                g[1] += grads.state.d_r_mass;
                g[2] += grads.state.d_r_out;
                g[3] += grads.state.d_t_mass;
                g[4] += grads.state.d_eta;
                g[5] += grads.state.d_a_eff;
            }
            let a = self.hyper.alpha_state;
            self.params.capacitance = (self.params.capacitance - a * g[0]).max(PARAM_FLOOR);
            self.params.r_mass = (self.params.r_mass - a * g[1]).max(PARAM_FLOOR);
            self.params.r_out = (self.params.r_out - a * g[2]).max(PARAM_FLOOR);
            self.params.t_mass -= a * g[3];
            self.params.eta_backup = (self.params.eta_backup - a * g[4]).clamp(PARAM_FLOOR, 2.0);
            self.params.a_eff -= a * g[5]; // free to go negative
        }
        self.buffer.clear();
        self.param_history.push(ParamSnapshot {
            after_step: self.last_step,
            params: self.params,
            cost: self.cost,
        });
        Ok(())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl SupervisoryController for IbexController {
    fn decide(&mut self, ctx: &DecisionContext) -> Result<ControllerDecision, ControlError> {
        let disturbances = self.forecast_to_disturbances(ctx.forecast);
        let policy = self.solve_policy(ctx.observed_temp, &disturbances, ctx.targets, &ctx.bounds)?;
        let u0 = policy.solution.u_star[0];
        let x1 = policy.solution.x_star[0];
        let decision = ControllerDecision {
            u_star: Some(u0),
            x_next_pred: Some(x1),
            setpoint_command: command_setpoint(x1),
            diagnostics: DecisionDiagnostics {
                objective: Some(policy.solution.objective),
                solver_iterations: Some(policy.solution.iterations),
            },
        };
        self.last_step = ctx.step;
        self.pending = Some((ctx.step, policy));
        Ok(decision)
    }

    fn notify_outcome(&mut self, outcome: &StepOutcome) -> Result<(), ControlError> {
        let Some((step, policy)) = self.pending.take() else {
            return Ok(());
        };
        if step != outcome.step {
            return Ok(());
        }
        // Quadratic-cost calibration runs every step on the cached
        // prediction, independent of validation.
        self.update_cost(&policy)?;
        if !self.validation_on || outcome.readback_ok {
            self.admitted.push(step);
            self.buffer.push(BufferedTransition {
                x_next_observed: outcome.x_next_observed,
                policy,
            });
        }
        Ok(())
    }

    fn end_of_day(&mut self) -> Result<(), ControlError> {
        self.update_state()
    }

    fn name(&self) -> &'static str {
        "ibex"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::WeatherPoint;
    use chrono::Utc;

    fn params() -> PhysicalParams {
        PhysicalParams {
            capacitance: 6.5,
            r_mass: 1.06,
            r_out: 2.04,
            t_mass: 20.0,
            eta_backup: 1.0,
            a_eff: 3.0,
        }
    }

    fn controller(cost: QuadCostParams) -> IbexController {
        IbexController::new(
            params(),
            cost,
            CopCurve::default(),
            IbexHyper::default(),
            EconomicWeights::default(),
        )
    }

    fn forecast(t_out: f64, n: usize) -> Vec<WeatherPoint> {
        (0..n)
            .map(|i| WeatherPoint {
                timestamp: Utc::now() + chrono::Duration::hours(i as i64),
                t_out,
                i_sol: 0.0,
                wind: 1.0,
            })
            .collect()
    }

    fn ctx<'a>(
        step: usize,
        obs: f64,
        forecast: &'a [WeatherPoint],
        targets: &'a [f64],
    ) -> DecisionContext<'a> {
        DecisionContext {
            step,
            local_hour: (step % 24) as u32,
            observed_temp: obs,
            target_now: targets[0],
            forecast,
            targets,
            bounds: PowerBounds::new(4.2, 10.0),
        }
    }

    #[test]
    fn holds_equilibrium_near_target() {
        // Strong tracking weight: at the target with steady weather the
        // policy should ask for roughly the steady-state holding power.
        let mut c = controller(QuadCostParams { o_state: 50.0, r_hp: 0.01, r_bh: 0.05 });
        let f = forecast(10.0, 12);
        let targets = vec![20.0; 12];
        let d = c.decide(&ctx(0, 20.0, &f, &targets)).unwrap();
        let u = d.u_star.unwrap();
        // Holding heat: (20-20)/R_m + (20-10)/R_out ≈ 4.9 kW thermal.
        let hold_heat = 10.0 / 2.04;
        let delivered = CopCurve::default().at(10.0) * u[0] + u[1];
        assert!((delivered - hold_heat).abs() < 0.4, "delivered {delivered} vs {hold_heat}");
        assert!((d.x_next_pred.unwrap() - 20.0).abs() < 0.1);
    }

    #[test]
    fn pinned_bounds_follow_free_response() {
        let mut c = controller(QuadCostParams { o_state: 5.0, r_hp: 0.1, r_bh: 0.5 });
        let f = forecast(-5.0, 6);
        let targets = vec![20.0; 6];
        let mut context = ctx(0, 19.0, &f, &targets);
        context.bounds = PowerBounds::new(0.0, 0.0);
        let d = c.decide(&context).unwrap();
        assert_eq!(d.u_star.unwrap(), [0.0, 0.0]);
        // Free response of the model from 19 °C.
        let ds = c.forecast_to_disturbances(&f);
        let x1 = crate::thermal::predict_trajectory(
            &c.params,
            &c.curve,
            19.0,
            &[[0.0, 0.0]],
            &ds[..1],
            1.0,
        )
        .unwrap()[0];
        assert_eq!(d.setpoint_command, command_setpoint(x1));
    }

    #[test]
    fn identical_inputs_identical_decisions() {
        let f = forecast(-2.0, 24);
        let targets = vec![19.5; 24];
        let run = || {
            let mut c = controller(QuadCostParams { o_state: 2.0, r_hp: 0.2, r_bh: 0.8 });
            c.decide(&ctx(0, 18.7, &f, &targets)).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn self_generated_buffer_is_a_fixed_point() {
        let mut c = controller(QuadCostParams { o_state: 2.0, r_hp: 0.2, r_bh: 0.8 });
        let f = forecast(0.0, 8);
        let targets = vec![19.5; 8];
        let before_p = c.params;
        for step in 0..4 {
            let d = c.decide(&ctx(step, 19.0, &f, &targets)).unwrap();
            // Feed back exactly the model's own prediction.
            c.notify_outcome(&StepOutcome {
                step,
                x_next_observed: d.x_next_pred.unwrap(),
                readback_ok: true,
            })
            .unwrap();
        }
        c.end_of_day().unwrap();
        assert!((c.params.capacitance - before_p.capacitance).abs() < 1e-8);
        assert!((c.params.r_mass - before_p.r_mass).abs() < 1e-8);
        assert!((c.params.a_eff - before_p.a_eff).abs() < 1e-8);
        assert_eq!(c.admitted_steps(), &[0, 1, 2, 3]);
    }

    #[test]
    fn state_update_matches_finite_difference_gradient() {
        // Single buffered transition; the update must equal
        // θ - α·∂L/∂θ with L = (x*₁(θ) - x_obs)².
        let base = controller(QuadCostParams { o_state: 2.0, r_hp: 0.2, r_bh: 0.8 });
        let f = forecast(-3.0, 4);
        let targets = vec![20.0; 4];
        let x0 = 18.8;
        let x_obs = 19.6;

        let loss = |p: &PhysicalParams| -> f64 {
            let c = IbexController::new(
                *p,
                QuadCostParams { o_state: 2.0, r_hp: 0.2, r_bh: 0.8 },
                CopCurve::default(),
                IbexHyper::default(),
                EconomicWeights::default(),
            );
            let ds = c.forecast_to_disturbances(&f);
            let out = c.solve_policy(x0, &ds, &targets, &PowerBounds::new(4.2, 10.0)).unwrap();
            (out.solution.x_star[0] - x_obs).powi(2)
        };

        let mut c = base;
        let before = c.params;
        let d = c.decide(&ctx(0, x0, &f, &targets)).unwrap();
        assert!(d.u_star.is_some());
        c.notify_outcome(&StepOutcome { step: 0, x_next_observed: x_obs, readback_ok: true })
            .unwrap();
        c.end_of_day().unwrap();

        let h = 1e-6;
        let check = |field: fn(&PhysicalParams) -> f64, bump: fn(&mut PhysicalParams, f64)| {
            let mut hi = before;
            bump(&mut hi, h);
            let mut lo = before;
            bump(&mut lo, -h);
            let fd = (loss(&hi) - loss(&lo)) / (2.0 * h);
            let expected = field(&before) - c.hyper.alpha_state * fd;
            let got = field(&c.params);
            assert!(
                (got - expected).abs() < 1e-6 * (1.0 + expected.abs()),
                "field update {got} vs fd-implied {expected}"
            );
        };
        check(|p| p.r_mass, |p, h| p.r_mass += h);
        check(|p| p.r_out, |p, h| p.r_out += h);
        check(|p| p.capacitance, |p, h| p.capacitance += h);
        check(|p| p.t_mass, |p, h| p.t_mass += h);
    }

    #[test]
    fn aperture_may_go_negative() {
        let mut c = controller(QuadCostParams { o_state: 2.0, r_hp: 0.2, r_bh: 0.8 });
        c.params.a_eff = 0.05;
        c.hyper.alpha_state = 5.0;
        // Sunny forecast, observations far colder than predicted: blame
        // falls on the solar aperture (among others) and nothing stops it
        // from crossing zero.
        let f: Vec<WeatherPoint> = (0..6)
            .map(|i| WeatherPoint {
                timestamp: Utc::now() + chrono::Duration::hours(i as i64),
                t_out: 5.0,
                i_sol: 0.8,
                wind: 1.0,
            })
            .collect();
        let targets = vec![20.0; 6];
        for day in 0..4 {
            for k in 0..3 {
                let step = day * 3 + k;
                let d = c.decide(&ctx(step, 19.5, &f, &targets)).unwrap();
                c.notify_outcome(&StepOutcome {
                    step,
                    x_next_observed: d.x_next_pred.unwrap() - 2.5,
                    readback_ok: true,
                })
                .unwrap();
            }
            c.end_of_day().unwrap();
            if c.params.a_eff < 0.0 {
                return;
            }
        }
        panic!("aperture never crossed zero: {}", c.params.a_eff);
    }

    #[test]
    fn zero_prices_freeze_cost_params() {
        let mut c = controller(QuadCostParams { o_state: 2.0, r_hp: 0.2, r_bh: 0.8 });
        c.weights = EconomicWeights { w_d: 0.0, w_e: 0.0, w_c: 0.0 };
        let f = forecast(-4.0, 6);
        let targets = vec![20.0; 6];
        let before = c.cost;
        let d = c.decide(&ctx(0, 19.0, &f, &targets)).unwrap();
        c.notify_outcome(&StepOutcome {
            step: 0,
            x_next_observed: d.x_next_pred.unwrap(),
            readback_ok: true,
        })
        .unwrap();
        assert_eq!(c.cost, before);
    }

    #[test]
    fn cost_ascent_matches_reward_finite_difference() {
        let make = |cost: QuadCostParams| controller(cost);
        let f = forecast(-6.0, 5);
        let targets = vec![20.0; 5];
        let x0 = 18.5;
        let cost0 = QuadCostParams { o_state: 1.5, r_hp: 0.3, r_bh: 0.9 };
        let weights = EconomicWeights::default(); // w_c = 3 via hyper

        // Reward of the predicted trajectory as a function of θ_cost.
        let reward = |cost: QuadCostParams| -> f64 {
            let c = make(cost);
            let ds = c.forecast_to_disturbances(&f);
            let out = c.solve_policy(x0, &ds, &targets, &PowerBounds::new(4.2, 10.0)).unwrap();
            let sol = &out.solution;
            let mut peak: f64 = 0.0;
            let mut j = 0.0;
            for l in 0..sol.u_star.len() {
                let su = sol.u_star[l][0] + sol.u_star[l][1];
                peak = peak.max(su);
                j += weights.w_e * su + c.weights.w_c * (sol.x_star[l] - targets[l]).abs();
            }
            -(j + weights.w_d * peak)
        };

        let mut c = make(cost0);
        let d = c.decide(&ctx(0, x0, &f, &targets)).unwrap();
        assert!(d.u_star.is_some());
        c.notify_outcome(&StepOutcome { step: 0, x_next_observed: 19.0, readback_ok: true })
            .unwrap();

        let h = 1e-6;
        let fd_o = (reward(QuadCostParams { o_state: cost0.o_state + h, ..cost0 })
            - reward(QuadCostParams { o_state: cost0.o_state - h, ..cost0 }))
            / (2.0 * h);
        let applied = (c.cost.o_state - cost0.o_state) / c.hyper.alpha_cost;
        assert!(
            (applied - fd_o).abs() < 1e-3 * (1.0 + fd_o.abs()),
            "applied dO {applied} vs fd {fd_o}"
        );
        // The crafted cold-start instance rewards stronger tracking.
        assert!(applied > 0.0);
    }

    #[test]
    fn cost_floor_clamps_runaway_updates() {
        let mut c = controller(QuadCostParams { o_state: 2.0, r_hp: 0.001, r_bh: 0.5 });
        c.hyper.alpha_cost = 1e3;
        let f = forecast(-6.0, 5);
        let targets = vec![20.0; 5];
        for step in 0..3 {
            let d = c.decide(&ctx(step, 18.5, &f, &targets)).unwrap();
            c.notify_outcome(&StepOutcome {
                step,
                x_next_observed: d.x_next_pred.unwrap(),
                readback_ok: true,
            })
            .unwrap();
        }
        assert!(c.cost.r_hp >= PARAM_FLOOR);
        assert!(c.cost.o_state >= PARAM_FLOOR);
        assert!(c.cost.r_bh >= PARAM_FLOOR);
    }

    #[test]
    fn invalidated_transitions_never_enter_the_buffer() {
        let mut c = controller(QuadCostParams { o_state: 2.0, r_hp: 0.2, r_bh: 0.8 });
        let f = forecast(-1.0, 6);
        let targets = vec![19.0; 6];
        for step in 0..6 {
            let d = c.decide(&ctx(step, 19.0, &f, &targets)).unwrap();
            c.notify_outcome(&StepOutcome {
                step,
                x_next_observed: d.x_next_pred.unwrap(),
                readback_ok: step % 2 == 0,
            })
            .unwrap();
        }
        assert_eq!(c.admitted_steps(), &[0, 2, 4]);
    }
}
