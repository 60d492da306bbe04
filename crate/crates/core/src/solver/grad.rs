//! Analytic trajectory gradients by implicit differentiation of the KKT
//! conditions.
//!
//! At a converged solution the strictly-active bounds are pinned, leaving an
//! equality-constrained QP in z = (x_1..x_L, u_free) whose KKT system is
//!
//! ```text
//! [ H  Gᵀ ] [ z ]   [ -q ]
//! [ G  0  ] [ ν ] = [  h ]
//! ```
//!
//! Differentiating that system in the problem parameters and contracting with
//! an upstream loss gradient reduces to one adjoint solve with the same
//! (symmetric) KKT matrix:
//!
//! ```text
//! K·[λ_z; λ_ν] = [∂L/∂z; 0]
//! ∂L/∂q = -λ_z        ∂L/∂H_ii = -λ_z,i·z_i
//! ∂L/∂h = λ_ν         ∂L/∂G_rc = -(ν_r·λ_z,c + λ_ν,r·z_c)
//! ```
//!
//! Controls pinned by an active bound are constants of the reduced problem,
//! so their own gradients are zero and upstream gradient on them is dropped.
//! A bound whose multiplier is numerically zero makes the derivative
//! one-sided; those coordinates are flagged, not regularized.

use super::{kkt_residual, LqrProblem, LqrSolution, ReducedQuadratic, SolverConfig, SolverError};

/// Threshold below which an active bound's multiplier counts as weakly
/// active.
const WEAK_MULTIPLIER: f64 = 1e-8;

/// Upstream gradients of a scalar loss with respect to the optimal states
/// and controls.
#[derive(Debug, Clone)]
pub struct Upstream<'a> {
    pub d_x: &'a [f64],
    pub d_u: &'a [[f64; 2]],
}

/// Gradients with respect to one step's dynamics parameters.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepGrads {
    pub d_a: f64,
    pub d_b_u: [f64; 2],
    pub d_offset: f64,
}

/// Gradients of the upstream loss with respect to every problem parameter.
#[derive(Debug, Clone)]
pub struct TrajectoryGrads {
    pub steps: Vec<StepGrads>,
    /// Quadratic state weight (pure H-diagonal part; the linear term is
    /// reported separately through `d_p`).
    pub d_o_state: f64,
    pub d_r_hp: f64,
    pub d_r_bh: f64,
    /// Linear state cost terms p_1..p_L.
    pub d_p: Vec<f64>,
    /// (step, input) pairs whose bound multiplier is numerically zero; the
    /// true derivative there is one-sided and the bound was treated as
    /// active.
    pub weakly_active: Vec<(usize, usize)>,
}

pub fn grad_trajectory(
    problem: &LqrProblem,
    solution: &LqrSolution,
    upstream: &Upstream,
    cfg: &SolverConfig,
) -> Result<TrajectoryGrads, SolverError> {
    problem.validate()?;
    let l = problem.horizon();
    if upstream.d_x.len() != l {
        return Err(SolverError::BadLength { name: "upstream d_x", got: upstream.d_x.len(), expected: l });
    }
    if upstream.d_u.len() != l {
        return Err(SolverError::BadLength { name: "upstream d_u", got: upstream.d_u.len(), expected: l });
    }
    let residual = kkt_residual(problem, &solution.u_star);
    // Allow a little slack over the solve tolerance for residual recomputation noise.
    if residual > 10.0 * cfg.tolerance {
        return Err(SolverError::StaleSolution { residual, tol: cfg.tolerance });
    }

    let quad = ReducedQuadratic::build(problem);
    let flat: Vec<f64> = solution.u_star.iter().flatten().copied().collect();
    let g = quad.gradient(&flat);

    // Classify each control coordinate.
    let mut free = Vec::new();
    let mut weakly_active = Vec::new();
    for i in 0..2 * l {
        let b = problem.bounds[i % 2];
        let tol = 1e-9 * b.lo.abs().max(b.hi.abs()).max(1.0);
        let pinned = b.hi - b.lo <= tol;
        let at_lo = (flat[i] - b.lo).abs() <= tol;
        let at_hi = (flat[i] - b.hi).abs() <= tol;
        if pinned {
            continue;
        }
        if at_lo || at_hi {
            // The bound multiplier is |g_i| with the feasible sign.
            if g[i].abs() < WEAK_MULTIPLIER {
                weakly_active.push((i / 2, i % 2));
            }
            continue;
        }
        free.push(i);
    }

    let o = problem.cost.o_state;
    let x = &solution.x_star;

    // Costates from the primal stationarity recursion:
    // ν_{k-1} = a_k·ν_k - (O·x_k + p_k), ν_{L-1} = -(O·x_L + p_L).
    let mut nu = vec![0.0; l];
    nu[l - 1] = -(o * x[l - 1] + problem.p[l - 1]);
    for k in (1..l).rev() {
        nu[k - 1] = problem.steps[k].a * nu[k] - (o * x[k - 1] + problem.p[k - 1]);
    }

    // Assemble the KKT matrix over (x_1..x_L, u_free, ν_0..ν_{L-1}).
    let nf = free.len();
    let n = l + nf;
    let dim = n + l;
    let mut k = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    for s in 0..l {
        k[(s, s)] = o;
    }
    for (c, &i) in free.iter().enumerate() {
        k[(l + c, l + c)] = problem.cost.r(i % 2);
    }
    for r in 0..l {
        let row = n + r;
        k[(row, r)] = 1.0;
        k[(r, row)] = 1.0;
        if r >= 1 {
            k[(row, r - 1)] = -problem.steps[r].a;
            k[(r - 1, row)] = -problem.steps[r].a;
        }
        for (c, &i) in free.iter().enumerate() {
            if i / 2 == r {
                let bu = problem.steps[r].b_u[i % 2];
                k[(row, l + c)] = -bu;
                k[(l + c, row)] = -bu;
            }
        }
    }

    let mut rhs = nalgebra::DVector::<f64>::zeros(dim);
    for s in 0..l {
        rhs[s] = upstream.d_x[s];
    }
    for (c, &i) in free.iter().enumerate() {
        rhs[l + c] = upstream.d_u[i / 2][i % 2];
    }

    let lu = k.lu();
    let lambda = lu.solve(&rhs).ok_or(SolverError::SingularKkt)?;
    let lam_x = |s: usize| lambda[s];
    let lam_nu = |r: usize| lambda[n + r];
    // λ over all control coordinates; zero on active/pinned ones.
    let mut lam_u = vec![0.0; 2 * l];
    for (c, &i) in free.iter().enumerate() {
        lam_u[i] = lambda[l + c];
    }

    let mut d_o_state = 0.0;
    let mut d_p = vec![0.0; l];
    for s in 0..l {
        d_o_state -= lam_x(s) * x[s];
        d_p[s] = -lam_x(s);
    }
    let mut d_r_hp = 0.0;
    let mut d_r_bh = 0.0;
    for &i in &free {
        let contrib = -lam_u[i] * flat[i];
        if i % 2 == 0 {
            d_r_hp += contrib;
        } else {
            d_r_bh += contrib;
        }
    }

    let mut steps = vec![StepGrads::default(); l];
    for r in 0..l {
        steps[r].d_offset = lam_nu(r);
        steps[r].d_a = if r == 0 {
            lam_nu(0) * problem.x0
        } else {
            nu[r] * lam_x(r - 1) + lam_nu(r) * x[r - 1]
        };
        for m in 0..2 {
            steps[r].d_b_u[m] = nu[r] * lam_u[2 * r + m] + lam_nu(r) * solution.u_star[r][m];
        }
    }

    Ok(TrajectoryGrads { steps, d_o_state, d_r_hp, d_r_bh, d_p, weakly_active })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_box_lqr, Bounds, LqrStep, QuadCostParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_problem(o: f64, r: f64, a: f64, b: f64, f: f64, x0: f64, t: f64) -> LqrProblem {
        LqrProblem::tracking(
            x0,
            vec![LqrStep { a, b_u: [b, 0.0], offset: f }],
            QuadCostParams { o_state: o, r_hp: r, r_bh: 1.0 },
            &[t],
            [Bounds::new(-100.0, 100.0), Bounds::new(0.0, 0.0)],
        )
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let p = scalar_problem(2.0, 0.5, 0.8, 0.3, 0.4, 18.0, 20.0);
        let sol = solve_box_lqr(&p, &SolverConfig::default()).unwrap();
        let g = grad_trajectory(
            &p,
            &sol,
            &Upstream { d_x: &[0.0], d_u: &[[0.0, 0.0]] },
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(g.d_o_state, 0.0);
        assert_eq!(g.d_r_hp, 0.0);
        assert_eq!(g.steps[0].d_a, 0.0);
        assert_eq!(g.steps[0].d_offset, 0.0);
    }

    #[test]
    fn scalar_sensitivities_match_symbolic_oracle() {
        // u* = O·b·e/(O·b² + R), e = t - a·x0 - f. Symbolic derivatives of
        // this closed form are the oracle for upstream dL/du = 1.
        let (o, r, a, b, f, x0, t) = (2.0, 0.5, 0.8, 0.3, 0.4, 18.0, 20.0);
        let p = scalar_problem(o, r, a, b, f, x0, t);
        let sol = solve_box_lqr(&p, &SolverConfig::default()).unwrap();
        let g = grad_trajectory(
            &p,
            &sol,
            &Upstream { d_x: &[0.0], d_u: &[[1.0, 0.0]] },
            &SolverConfig::default(),
        )
        .unwrap();

        let e = t - a * x0 - f;
        let d = o * b * b + r;
        assert!((g.d_r_hp - (-o * b * e / (d * d))).abs() < 1e-10);
        assert!((g.steps[0].d_offset - (-o * b / d)).abs() < 1e-10);
        assert!((g.steps[0].d_a - (-o * b * x0 / d)).abs() < 1e-10);
        assert!((g.steps[0].d_b_u[0] - (o * e * (r - o * b * b) / (d * d))).abs() < 1e-10);
        // dL/dO with the linear term held fixed: differentiate u* treating p
        // as independent: u* = -(O·b·(a·x0+f) + b·p)/(O·b²+R).
        let du_do_fixed_p = (-b * (a * x0 + f) * d - (o * b * (t - a * x0 - f)) * b * b) / (d * d);
        assert!((g.d_o_state - du_do_fixed_p).abs() < 1e-10, "{} vs {du_do_fixed_p}", g.d_o_state);
        // Combined with the tracking link p = -O·t the total matches
        // d/dO [O·b·e/(O·b²+R)] = b·e·R/(O·b²+R)².
        let total = g.d_o_state + g.d_p[0] * (-t);
        assert!((total - b * e * r / (d * d)).abs() < 1e-10);
    }

    /// Central finite differences of a fixed scalar loss through the solver.
    fn fd_loss(p: &LqrProblem, wx: &[f64], wu: &[[f64; 2]]) -> f64 {
        let sol = solve_box_lqr(p, &SolverConfig::default()).unwrap();
        let mut loss = 0.0;
        for (k, x) in sol.x_star.iter().enumerate() {
            loss += wx[k] * x;
        }
        for (k, u) in sol.u_star.iter().enumerate() {
            loss += wu[k][0] * u[0] + wu[k][1] * u[1];
        }
        loss
    }

    #[test]
    fn gradients_match_central_differences_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut checked = 0;
        'outer: for _ in 0..40 {
            let l = rng.random_range(1..=5);
            let steps: Vec<LqrStep> = (0..l)
                .map(|_| LqrStep {
                    a: rng.random_range(0.6..0.95),
                    b_u: [rng.random_range(0.2..0.6), rng.random_range(0.05..0.3)],
                    offset: rng.random_range(-1.0..3.0),
                })
                .collect();
            let cost = QuadCostParams {
                o_state: rng.random_range(0.5..10.0),
                r_hp: rng.random_range(0.05..2.0),
                r_bh: rng.random_range(0.05..2.0),
            };
            let targets: Vec<f64> = (0..l).map(|_| rng.random_range(18.0..21.0)).collect();
            let bounds = [Bounds::new(0.0, 4.2), Bounds::new(0.0, 8.0)];
            let p = LqrProblem::tracking(rng.random_range(14.0..22.0), steps, cost, &targets, bounds);
            let sol = solve_box_lqr(&p, &SolverConfig::default()).unwrap();

            // Skip degenerate active sets: FD would straddle the kink.
            let quad = ReducedQuadratic::build(&p);
            let flat: Vec<f64> = sol.u_star.iter().flatten().copied().collect();
            let g = quad.gradient(&flat);
            for i in 0..2 * l {
                let b = p.bounds[i % 2];
                let at_bound = flat[i] <= b.lo + 1e-9 || flat[i] >= b.hi - 1e-9;
                if at_bound && g[i].abs() < 1e-3 {
                    continue 'outer;
                }
                if !at_bound && (flat[i] - b.lo).min(b.hi - flat[i]) < 1e-3 {
                    continue 'outer;
                }
            }

            let wx: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..1.0)).collect();
            let wu: Vec<[f64; 2]> =
                (0..l).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let grads = grad_trajectory(
                &p,
                &sol,
                &Upstream { d_x: &wx, d_u: &wu },
                &SolverConfig::default(),
            )
            .unwrap();

            let check = |analytic: f64, perturb: &dyn Fn(&mut LqrProblem, f64)| {
                let h = 1e-5;
                let mut hi = p.clone();
                perturb(&mut hi, h);
                let mut lo = p.clone();
                perturb(&mut lo, -h);
                let fd = (fd_loss(&hi, &wx, &wu) - fd_loss(&lo, &wx, &wu)) / (2.0 * h);
                if analytic.abs() < 1e-8 && fd.abs() < 1e-7 {
                    return; // both zero within finite-difference noise
                }
                let denom = analytic.abs().max(fd.abs());
                assert!(
                    (analytic - fd).abs() / denom < 1e-4,
                    "analytic {analytic} vs fd {fd}"
                );
            };

            check(grads.d_o_state, &|p, h| p.cost.o_state += h);
            check(grads.d_r_hp, &|p, h| p.cost.r_hp += h);
            check(grads.d_r_bh, &|p, h| p.cost.r_bh += h);
            for r in 0..l {
                check(grads.steps[r].d_a, &move |p, h| p.steps[r].a += h);
                check(grads.steps[r].d_offset, &move |p, h| p.steps[r].offset += h);
                check(grads.steps[r].d_b_u[0], &move |p, h| p.steps[r].b_u[0] += h);
                check(grads.steps[r].d_b_u[1], &move |p, h| p.steps[r].b_u[1] += h);
                check(grads.d_p[r], &move |p, h| p.p[r] += h);
            }
            checked += 1;
        }
        assert!(checked >= 10, "only {checked} non-degenerate instances checked");
    }

    #[test]
    fn active_bound_controls_get_zero_gradient_flow() {
        // Force heavy saturation; upstream gradient lands only on clamped
        // coordinates, so nothing propagates.
        let p = LqrProblem::tracking(
            5.0,
            vec![LqrStep { a: 0.8, b_u: [0.5, 0.2], offset: 0.0 }; 2],
            QuadCostParams { o_state: 100.0, r_hp: 0.01, r_bh: 0.01 },
            &[25.0, 25.0],
            [Bounds::new(0.0, 1.0), Bounds::new(0.0, 1.0)],
        );
        let sol = solve_box_lqr(&p, &SolverConfig::default()).unwrap();
        assert!(sol.u_star.iter().all(|u| u[0] == 1.0 && u[1] == 1.0));
        let g = grad_trajectory(
            &p,
            &sol,
            &Upstream { d_x: &[0.0, 0.0], d_u: &[[1.0, 1.0], [1.0, 1.0]] },
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(g.d_r_hp, 0.0);
        assert_eq!(g.d_r_bh, 0.0);
        assert_eq!(g.d_o_state, 0.0);
    }

    #[test]
    fn weakly_active_bounds_are_reported() {
        // Choose a target that puts the unconstrained optimum exactly at the
        // upper bound: multiplier 0.
        let (o, r, a, b, f, x0) = (2.0, 0.5, 0.8, 0.3, 0.4, 18.0);
        let ub = 1.0;
        let t = a * x0 + f + (o * b * b + r) * ub / (o * b);
        let mut p = scalar_problem(o, r, a, b, f, x0, t);
        p.bounds[0] = Bounds::new(0.0, ub);
        let sol = solve_box_lqr(&p, &SolverConfig::default()).unwrap();
        assert!((sol.u_star[0][0] - ub).abs() < 1e-9);
        let g = grad_trajectory(
            &p,
            &sol,
            &Upstream { d_x: &[1.0], d_u: &[[0.0, 0.0]] },
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(g.weakly_active, vec![(0, 0)]);
    }
}
