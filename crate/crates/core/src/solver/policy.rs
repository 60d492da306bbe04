//! Forward/backward policy evaluation in physical-parameter coordinates.
//!
//! The controller's learnable parameters are the six physical quantities of
//! the 2R1C model plus the three quadratic cost weights. A forward pass
//! builds the per-step discrete dynamics (the control gain picks up the COP
//! of each step's outdoor temperature), solves the box-constrained problem,
//! and captures what the backward pass needs; the backward pass maps
//! trajectory gradients through the zero-order-hold discretization and the
//! continuous-matrix construction into parameter space. The COP curve itself
//! is treated as a known function of the disturbance, not a learnable
//! quantity.

use crate::thermal::{zoh_phi, CopCurve, Disturbance, PhysicalParams};

use super::{
    grad_trajectory, solve_box_lqr, Bounds, LqrProblem, LqrSolution, LqrStep, QuadCostParams,
    SolverConfig, SolverError, Upstream,
};

#[derive(Debug, Clone)]
pub struct PolicyInput<'a> {
    pub params: &'a PhysicalParams,
    pub cost: &'a QuadCostParams,
    pub curve: &'a CopCurve,
    pub x0: f64,
    pub disturbances: &'a [Disturbance],
    /// Setpoint targets for x_1..x_L.
    pub targets: &'a [f64],
    pub bounds: [Bounds; 2],
    /// Sample interval, hours.
    pub dt: f64,
}

/// Loss gradients with respect to the physical parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StateGrads {
    pub d_capacitance: f64,
    pub d_r_mass: f64,
    pub d_r_out: f64,
    pub d_t_mass: f64,
    pub d_eta: f64,
    pub d_a_eff: f64,
}

/// Loss gradients with respect to the quadratic cost weights (the linear
/// tracking term's dependence on `o_state` is already folded in).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostGrads {
    pub d_o_state: f64,
    pub d_r_hp: f64,
    pub d_r_bh: f64,
}

#[derive(Debug, Clone)]
pub struct PolicyGrads {
    pub state: StateGrads,
    pub cost: CostGrads,
    pub weakly_active: Vec<(usize, usize)>,
}

/// Solved policy with everything captured for the backward pass. Immutable;
/// safe to keep around and differentiate later.
#[derive(Debug, Clone)]
pub struct PolicyOutput {
    pub problem: LqrProblem,
    pub solution: LqrSolution,
    params: PhysicalParams,
    cost: QuadCostParams,
    curve: CopCurve,
    disturbances: Vec<Disturbance>,
    targets: Vec<f64>,
    dt: f64,
}

/// Build the per-step problem from physical parameters, solve it, and return
/// the solution together with its gradient mapping.
pub fn policy_forward_backward(
    input: &PolicyInput,
    cfg: &SolverConfig,
) -> Result<PolicyOutput, SolverError> {
    let l = input.disturbances.len();
    if input.targets.len() != l {
        return Err(SolverError::BadLength {
            name: "targets",
            got: input.targets.len(),
            expected: l,
        });
    }
    input.params.validate()?;
    let steps = build_steps(input.params, input.curve, input.disturbances, input.dt)?;
    let problem =
        LqrProblem::tracking(input.x0, steps, *input.cost, input.targets, input.bounds);
    let solution = solve_box_lqr(&problem, cfg)?;
    Ok(PolicyOutput {
        problem,
        solution,
        params: *input.params,
        cost: *input.cost,
        curve: *input.curve,
        disturbances: input.disturbances.to_vec(),
        targets: input.targets.to_vec(),
        dt: input.dt,
    })
}

/// Per-step affine dynamics for a disturbance sequence. The thermal-mass
/// component of the disturbance vector is read from the learnable parameter,
/// not the forecast, so that gradients flow into it; forecast `t_mass`
/// entries are ignored here.
pub(crate) fn build_steps(
    params: &PhysicalParams,
    curve: &CopCurve,
    disturbances: &[Disturbance],
    dt: f64,
) -> Result<Vec<LqrStep>, SolverError> {
    let mut steps = Vec::with_capacity(disturbances.len());
    for d in disturbances {
        let cm = crate::thermal::continuous_matrices(params, curve, d.t_out)?;
        let m = crate::thermal::discretize_zoh(&cm, dt)?;
        steps.push(LqrStep {
            a: m.a,
            b_u: m.b_u,
            offset: m.b_d[0] * params.t_mass + m.b_d[1] * d.t_out + m.b_d[2] * d.i_sol,
        });
    }
    Ok(steps)
}

impl PolicyOutput {
    /// Map upstream trajectory gradients into parameter space.
    pub fn backward(
        &self,
        upstream: &Upstream,
        cfg: &SolverConfig,
    ) -> Result<PolicyGrads, SolverError> {
        let traj = grad_trajectory(&self.problem, &self.solution, upstream, cfg)?;

        let p = &self.params;
        let c = p.capacitance;
        let g_m = 1.0 / (p.r_mass * c);
        let g_o = 1.0 / (p.r_out * c);
        let a_c = -(g_m + g_o);
        let z = a_c * self.dt;
        let a = if z.abs() < 1e-9 { 1.0 + z + z * z / 2.0 } else { z.exp() };
        let phi = zoh_phi(a_c, self.dt);
        let da_dac = self.dt * a;
        let dphi_dac = if z.abs() < 1e-9 {
            self.dt * self.dt * (0.5 + z / 3.0)
        } else {
            (self.dt * a - phi) / a_c
        };
        // a_c sensitivities to the three resistive/capacitive parameters.
        let dac = [
            -a_c / c,        // capacitance
            g_m / p.r_mass,  // r_mass
            g_o / p.r_out,   // r_out
        ];

        let mut state = StateGrads::default();
        for (l, d) in self.disturbances.iter().enumerate() {
            let sg = &traj.steps[l];
            let cop = self.curve.at(d.t_out);
            let bu0 = cop / c;
            let bu1 = p.eta_backup / c;
            // Continuous disturbance drive folded into the offset.
            let drive = g_m * p.t_mass + g_o * d.t_out + p.a_eff * d.i_sol / c;
            let d_drive = [
                -drive / c,
                -g_m * p.t_mass / p.r_mass,
                -g_o * d.t_out / p.r_out,
            ];
            let d_bu0 = [-bu0 / c, 0.0, 0.0];
            let d_bu1 = [-bu1 / c, 0.0, 0.0];

            let acc = [&mut state.d_capacitance, &mut state.d_r_mass, &mut state.d_r_out];
            for (i, slot) in acc.into_iter().enumerate() {
                *slot += sg.d_a * da_dac * dac[i]
                    + sg.d_b_u[0] * (dphi_dac * dac[i] * bu0 + phi * d_bu0[i])
                    + sg.d_b_u[1] * (dphi_dac * dac[i] * bu1 + phi * d_bu1[i])
                    + sg.d_offset * (dphi_dac * dac[i] * drive + phi * d_drive[i]);
            }
            state.d_t_mass += sg.d_offset * phi * g_m;
            state.d_eta += sg.d_b_u[1] * phi / c;
            state.d_a_eff += sg.d_offset * phi * d.i_sol / c;
        }

        let mut cost = CostGrads {
            d_o_state: traj.d_o_state,
            d_r_hp: traj.d_r_hp,
            d_r_bh: traj.d_r_bh,
        };
        for (k, t) in self.targets.iter().enumerate() {
            cost.d_o_state += traj.d_p[k] * (-t);
        }

        Ok(PolicyGrads { state, cost, weakly_active: traj.weakly_active })
    }

    pub fn cost_params(&self) -> &QuadCostParams {
        &self.cost
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn disturbances(&self) -> &[Disturbance] {
        &self.disturbances
    }
}
