//! Finite-horizon box-constrained LQR with analytic parameter gradients.
//!
//! The policy layer of the learning controller is the argmin of a quadratic
//! tracking problem over time-varying affine scalar dynamics
//!
//! ```text
//! x_{l+1} = a_l·x_l + b_l·u_l + f_l,   u_l ∈ [lo, hi]²
//! J(u)    = Σ_l  ½·O·x_{l+1}² + p_{l+1}·x_{l+1} + ½·u_lᵀ·diag(r_hp, r_bh)·u_l
//! ```
//!
//! with `p = -O·x_target` recovering setpoint tracking. Box bounds on the two
//! inputs are enforced exactly by a projected-Newton iteration on the reduced
//! (control-space) quadratic; states are eliminated through the dynamics, so
//! the problem is an unconstrained strictly convex QP in `u` apart from the
//! box.
//!
//! [`grad`] differentiates the optimal trajectory with respect to every
//! problem parameter by implicit differentiation of the KKT conditions of the
//! equality-constrained problem obtained by pinning the active bounds, and
//! [`policy`] chains those gradients back to the physical and cost
//! parameters that generated the problem.

mod grad;
mod policy;

pub use grad::{grad_trajectory, StepGrads, TrajectoryGrads, Upstream};
pub use policy::{policy_forward_backward, CostGrads, PolicyGrads, PolicyInput, PolicyOutput, StateGrads};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("cost parameter {name} must be positive, got {value}")]
    NonPositiveCost { name: &'static str, value: f64 },
    #[error("bounds are infeasible or non-finite: [{lo}, {hi}]")]
    InfeasibleBounds { lo: f64, hi: f64 },
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("{name} has length {got}, expected {expected}")]
    BadLength { name: &'static str, got: usize, expected: usize },
    #[error("projected Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("gradient requested on a non-converged solution (residual {residual:.3e} > tol {tol:.3e})")]
    StaleSolution { residual: f64, tol: f64 },
    #[error("KKT system is singular")]
    SingularKkt,
    #[error(transparent)]
    Thermal(#[from] crate::thermal::ThermalError),
}

/// Internal quadratic cost weights of the policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadCostParams {
    /// State deviation penalty, per °C².
    pub o_state: f64,
    /// Heat-pump power penalty, per kW².
    pub r_hp: f64,
    /// Backup-heat power penalty, per kW².
    pub r_bh: f64,
}

impl QuadCostParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        for (name, value) in
            [("o_state", self.o_state), ("r_hp", self.r_hp), ("r_bh", self.r_bh)]
        {
            if !(value > 0.0) || !value.is_finite() {
                return Err(SolverError::NonPositiveCost { name, value });
            }
        }
        Ok(())
    }

    fn r(&self, input: usize) -> f64 {
        if input == 0 { self.r_hp } else { self.r_bh }
    }
}

/// Interval bound for one control input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// One step of the time-varying affine dynamics. The disturbance term is
/// pre-folded into the scalar offset `f = B_d·d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrStep {
    pub a: f64,
    pub b_u: [f64; 2],
    pub offset: f64,
}

/// A complete finite-horizon problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrProblem {
    pub x0: f64,
    pub steps: Vec<LqrStep>,
    pub cost: QuadCostParams,
    /// Linear state cost for `x_1..x_L`; `-O·x_target` for tracking.
    pub p: Vec<f64>,
    /// Per-input box, constant across the horizon.
    pub bounds: [Bounds; 2],
}

impl LqrProblem {
    /// Tracking problem: sets the linear state cost to `-O·target`.
    pub fn tracking(
        x0: f64,
        steps: Vec<LqrStep>,
        cost: QuadCostParams,
        targets: &[f64],
        bounds: [Bounds; 2],
    ) -> Self {
        let p = targets.iter().map(|t| -cost.o_state * t).collect();
        Self { x0, steps, cost, p, bounds }
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.steps.is_empty() {
            return Err(SolverError::EmptyHorizon);
        }
        self.cost.validate()?;
        if self.p.len() != self.steps.len() {
            return Err(SolverError::BadLength {
                name: "p",
                got: self.p.len(),
                expected: self.steps.len(),
            });
        }
        for b in &self.bounds {
            if !(b.lo <= b.hi) || !b.lo.is_finite() || !b.hi.is_finite() {
                return Err(SolverError::InfeasibleBounds { lo: b.lo, hi: b.hi });
            }
        }
        Ok(())
    }

    /// States produced by a control sequence, `x_1..x_L`.
    pub fn rollout(&self, u: &[[f64; 2]]) -> Vec<f64> {
        let mut x = self.x0;
        self.steps
            .iter()
            .zip(u)
            .map(|(s, u)| {
                x = s.a * x + s.b_u[0] * u[0] + s.b_u[1] * u[1] + s.offset;
                x
            })
            .collect()
    }

    /// Objective value of a control sequence (states implied by rollout).
    pub fn objective(&self, u: &[[f64; 2]]) -> f64 {
        let xs = self.rollout(u);
        let mut j = 0.0;
        for (k, x) in xs.iter().enumerate() {
            j += 0.5 * self.cost.o_state * x * x + self.p[k] * x;
        }
        for ul in u {
            j += 0.5 * (self.cost.r_hp * ul[0] * ul[0] + self.cost.r_bh * ul[1] * ul[1]);
        }
        j
    }
}

/// Solver configuration. The tolerance applies to the max-norm of the
/// projected stationarity residual.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 100 }
    }
}

/// Optimal trajectory returned by [`solve_box_lqr`].
#[derive(Debug, Clone)]
pub struct LqrSolution {
    /// Predicted states `x_1..x_L`.
    pub x_star: Vec<f64>,
    /// Controls `u_0..u_{L-1}`, feasible to the bit.
    pub u_star: Vec<[f64; 2]>,
    /// Objective at the optimum.
    pub objective: f64,
    /// Max-norm projected stationarity residual at return.
    pub kkt_residual: f64,
    /// Newton iterations taken.
    pub iterations: usize,
    /// Objective after each iteration; non-increasing.
    pub objective_trace: Vec<f64>,
}

/// Dense reduced quadratic `J(u) = ½ uᵀ H u + qᵀ u + c` over the flattened
/// control vector (`2·step + input`), built by eliminating the states.
pub(crate) struct ReducedQuadratic {
    pub n: usize,
    pub h: Vec<f64>,    // row-major n×n
    pub q: Vec<f64>,
    /// Sensitivities s[k][i] = ∂x_{k+1}/∂u_i.
    pub sens: Vec<Vec<f64>>,
    /// Zero-control state response x_1..x_L.
    pub free_response: Vec<f64>,
}

impl ReducedQuadratic {
    pub fn build(p: &LqrProblem) -> Self {
        let l = p.horizon();
        let n = 2 * l;
        // Forward sensitivity accumulation: x_{k+1} = a_k x_k + b_k u_k + f_k.
        let mut sens = vec![vec![0.0; n]; l];
        let mut free_response = vec![0.0; l];
        let mut x = p.x0;
        for (k, step) in p.steps.iter().enumerate() {
            if k > 0 {
                let (prev, cur) = {
                    let (a, b) = sens.split_at_mut(k);
                    (&a[k - 1], &mut b[0])
                };
                for i in 0..2 * k {
                    cur[i] = step.a * prev[i];
                }
            }
            sens[k][2 * k] = step.b_u[0];
            sens[k][2 * k + 1] = step.b_u[1];
            x = step.a * x + step.offset;
            free_response[k] = x;
        }
        let mut h = vec![0.0; n * n];
        let mut q = vec![0.0; n];
        let o = p.cost.o_state;
        for k in 0..l {
            let s = &sens[k];
            let active_cols = 2 * (k + 1); // ∂x_{k+1}/∂u_j = 0 for j > k
            let w = o * (free_response[k]) + p.p[k];
            for i in 0..active_cols {
                if s[i] == 0.0 {
                    continue;
                }
                q[i] += w * s[i];
                let osi = o * s[i];
                for j in 0..=i {
                    h[i * n + j] += osi * s[j];
                }
            }
        }
        for i in 0..n {
            h[i * n + i] += p.cost.r(i % 2);
            for j in 0..i {
                h[j * n + i] = h[i * n + j];
            }
        }
        Self { n, h, q, sens, free_response }
    }

    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut g = self.q.clone();
        for i in 0..self.n {
            let row = &self.h[i * self.n..(i + 1) * self.n];
            let mut acc = 0.0;
            for j in 0..self.n {
                acc += row[j] * u[j];
            }
            g[i] += acc;
        }
        g
    }
}

fn bound_of(p: &LqrProblem, i: usize) -> Bounds {
    p.bounds[i % 2]
}

/// Projected stationarity residual of a flattened control vector given its
/// gradient. Bound violations count at their magnitude.
fn projected_residual(p: &LqrProblem, u: &[f64], g: &[f64]) -> f64 {
    let mut r: f64 = 0.0;
    for i in 0..u.len() {
        let b = bound_of(p, i);
        let tol = 1e-9 * b.lo.abs().max(b.hi.abs()).max(1.0);
        if b.hi - b.lo <= tol {
            continue; // pinned input, any multiplier sign is valid
        }
        if u[i] < b.lo - tol || u[i] > b.hi + tol {
            r = r.max((b.lo - u[i]).max(u[i] - b.hi));
        } else if (u[i] - b.lo).abs() <= tol {
            r = r.max((-g[i]).max(0.0));
        } else if (u[i] - b.hi).abs() <= tol {
            r = r.max(g[i].max(0.0));
        } else {
            r = r.max(g[i].abs());
        }
    }
    r
}

/// Max-norm KKT residual of a candidate control sequence: the Lagrangian
/// gradient on free coordinates, complementarity on active ones, and any
/// bound violation. Zero at the optimum.
pub fn kkt_residual(p: &LqrProblem, u: &[[f64; 2]]) -> f64 {
    let quad = ReducedQuadratic::build(p);
    let flat: Vec<f64> = u.iter().flatten().copied().collect();
    let g = quad.gradient(&flat);
    projected_residual(p, &flat, &g)
}

/// Solve the box-constrained problem by projected Newton on the reduced
/// quadratic. Deterministic; returns bit-identical solutions for identical
/// inputs.
pub fn solve_box_lqr(p: &LqrProblem, cfg: &SolverConfig) -> Result<LqrSolution, SolverError> {
    p.validate()?;
    let quad = ReducedQuadratic::build(p);
    let n = quad.n;

    let mut u: Vec<f64> = (0..n).map(|i| bound_of(p, i).clamp(0.0)).collect();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut residual;

    loop {
        let g = quad.gradient(&u);
        residual = projected_residual(p, &u, &g);
        if residual <= cfg.tolerance {
            break;
        }
        if iterations >= cfg.max_iterations {
            return Err(SolverError::NotConverged { iterations, residual });
        }
        iterations += 1;

        // Active set: coordinates sitting on a bound with a correctly signed
        // multiplier, plus pinned (lo == hi) inputs.
        let mut free = Vec::with_capacity(n);
        for i in 0..n {
            let b = bound_of(p, i);
            let pinned = b.hi - b.lo <= 0.0;
            let at_lo = u[i] <= b.lo && g[i] > 0.0;
            let at_hi = u[i] >= b.hi && g[i] < 0.0;
            if !(pinned || at_lo || at_hi) {
                free.push(i);
            }
        }
        if free.is_empty() {
            // Everything clamped with consistent multipliers; re-check residual.
            let g = quad.gradient(&u);
            residual = projected_residual(p, &u, &g);
            if residual <= cfg.tolerance {
                break;
            }
            return Err(SolverError::NotConverged { iterations, residual });
        }

        // Newton direction on the free block (SPD since R > 0).
        let nf = free.len();
        let mut hff = nalgebra::DMatrix::<f64>::zeros(nf, nf);
        let mut gf = nalgebra::DVector::<f64>::zeros(nf);
        for (r, &i) in free.iter().enumerate() {
            gf[r] = g[i];
            for (c, &j) in free.iter().enumerate() {
                hff[(r, c)] = quad.h[i * n + j];
            }
        }
        let chol = hff.cholesky().ok_or(SolverError::SingularKkt)?;
        let d = chol.solve(&(-gf));

        // Backtracking line search along the projection arc.
        let j0 = objective_flat(p, &quad, &u);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand = u.clone();
            for (r, &i) in free.iter().enumerate() {
                cand[i] = bound_of(p, i).clamp(u[i] + alpha * d[r]);
            }
            let jc = objective_flat(p, &quad, &cand);
            let mut directional = 0.0;
            for i in 0..n {
                directional += g[i] * (cand[i] - u[i]);
            }
            if jc <= j0 + 1e-4 * directional {
                u = cand;
                trace.push(jc);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Step stalled at numerical precision; report current residual.
            let g = quad.gradient(&u);
            residual = projected_residual(p, &u, &g);
            if residual <= cfg.tolerance.max(1e-7) {
                break;
            }
            return Err(SolverError::NotConverged { iterations, residual });
        }
    }

    let u_star: Vec<[f64; 2]> = u.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let x_star = p.rollout(&u_star);
    let objective = p.objective(&u_star);
    Ok(LqrSolution { x_star, u_star, objective, kkt_residual: residual, iterations, objective_trace: trace })
}

fn objective_flat(p: &LqrProblem, quad: &ReducedQuadratic, u: &[f64]) -> f64 {
    // ½uᵀHu + qᵀu plus the constant from the free response; the constant is
    // shared by all iterates so the plain quadratic form is enough for the
    // line search, but computing the true objective keeps the trace
    // meaningful.
    let mut j = 0.0;
    for (k, fr) in quad.free_response.iter().enumerate() {
        let mut x = *fr;
        for i in 0..2 * (k + 1) {
            x += quad.sens[k][i] * u[i];
        }
        j += 0.5 * p.cost.o_state * x * x + p.p[k] * x;
    }
    for (i, ui) in u.iter().enumerate() {
        j += 0.5 * p.cost.r(i % 2) * ui * ui;
    }
    j
}
