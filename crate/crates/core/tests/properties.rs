//! Property tests over the model, solver, and actuation invariants.

use hearth::controllers::{command_setpoint, quantize_setpoint};
use hearth::solver::{solve_box_lqr, Bounds, LqrProblem, LqrStep, QuadCostParams, SolverConfig};
use hearth::thermal::{
    continuous_matrices, continuous_rhs, discretize_zoh, step_dynamics, CopCurve, Disturbance,
    PhysicalParams,
};
use proptest::prelude::*;

fn params_strategy() -> impl Strategy<Value = PhysicalParams> {
    (0.5..20.0f64, 0.2..10.0f64, 0.2..10.0f64, 15.0..25.0f64, 0.3..2.0f64, -2.0..6.0f64).prop_map(
        |(c, rm, ro, tm, eta, aeff)| PhysicalParams {
            capacitance: c,
            r_mass: rm,
            r_out: ro,
            t_mass: tm,
            eta_backup: eta,
            a_eff: aeff,
        },
    )
}

proptest! {
    /// The hourly transition factor is a strict contraction for any valid
    /// parameter draw, and the ZOH equilibrium identity holds analytically.
    #[test]
    fn zoh_contraction_and_equilibrium_identity(p in params_strategy(), t_out in -30.0..15.0f64) {
        let cm = continuous_matrices(&p, &CopCurve::default(), t_out).unwrap();
        let m = discretize_zoh(&cm, 1.0).unwrap();
        prop_assert!(m.a > 0.0 && m.a < 1.0);
        prop_assert!((m.a + m.b_d[0] + m.b_d[1] - 1.0).abs() < 1e-12);
    }

    /// One ZOH step agrees with fine-grained forward Euler of the
    /// continuous equation. The state starts near equilibrium so the bound
    /// holds across the whole parameter box, including very fast dynamics.
    #[test]
    fn zoh_step_matches_substepped_euler(p in params_strategy(), x0 in 18.0..22.0f64) {
        let curve = CopCurve::default();
        let d = Disturbance { t_mass: x0, t_out: x0, i_sol: 0.02 };
        let u = [0.02, 0.01];
        let m = discretize_zoh(&continuous_matrices(&p, &curve, d.t_out).unwrap(), 1.0).unwrap();
        let zoh = step_dynamics(&m, x0, u, &d);
        let n = 3600;
        let h = 1.0 / n as f64;
        let mut x = x0;
        for _ in 0..n {
            x += h * continuous_rhs(&p, &curve, x, u, &d);
        }
        prop_assert!((zoh - x).abs() < 1e-4, "zoh {} euler {}", zoh, x);
    }

    /// The discrete step is affine in the control input.
    #[test]
    fn step_is_affine_in_control(
        p in params_strategy(),
        alpha in 0.0..1.0f64,
        u1 in prop::array::uniform2(0.0..5.0f64),
        u2 in prop::array::uniform2(0.0..5.0f64),
    ) {
        let curve = CopCurve::default();
        let d = Disturbance { t_mass: p.t_mass, t_out: -3.0, i_sol: 0.1 };
        let m = discretize_zoh(&continuous_matrices(&p, &curve, d.t_out).unwrap(), 1.0).unwrap();
        let mix = [alpha * u1[0] + (1.0 - alpha) * u2[0], alpha * u1[1] + (1.0 - alpha) * u2[1]];
        let fx = step_dynamics(&m, 19.0, mix, &d);
        let f1 = step_dynamics(&m, 19.0, u1, &d);
        let f2 = step_dynamics(&m, 19.0, u2, &d);
        prop_assert!((fx - (alpha * f1 + (1.0 - alpha) * f2)).abs() < 1e-9);
    }

    /// Returned controls never leave the box, by any amount, and identical
    /// solves are bit-identical.
    #[test]
    fn solver_feasibility_and_determinism(
        x0 in 10.0..25.0f64,
        horizon in 1usize..8,
        o in 0.5..20.0f64,
        r_hp in 0.05..2.0f64,
        r_bh in 0.05..2.0f64,
        seed_offsets in prop::collection::vec((-2.0..4.0f64, 0.2..0.6f64), 1..8),
    ) {
        let l = horizon.min(seed_offsets.len()).max(1);
        let steps: Vec<LqrStep> = (0..l)
            .map(|k| {
                let (off, b0) = seed_offsets[k % seed_offsets.len()];
                LqrStep { a: 0.85, b_u: [b0, 0.15], offset: off }
            })
            .collect();
        let problem = LqrProblem::tracking(
            x0,
            steps,
            QuadCostParams { o_state: o, r_hp, r_bh },
            &vec![20.0; l],
            [Bounds::new(0.0, 4.2), Bounds::new(0.0, 10.0)],
        );
        let sol = solve_box_lqr(&problem, &SolverConfig::default()).unwrap();
        for u in &sol.u_star {
            prop_assert!(u[0] >= 0.0 && u[0] <= 4.2);
            prop_assert!(u[1] >= 0.0 && u[1] <= 10.0);
        }
        let again = solve_box_lqr(&problem, &SolverConfig::default()).unwrap();
        prop_assert_eq!(sol.u_star, again.u_star);
        for w in sol.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    /// Setpoint quantization always lands on a half degree within a quarter
    /// degree of the input, and commands stay in the sanity band.
    #[test]
    fn quantization_invariants(x in -50.0..80.0f64) {
        let q = quantize_setpoint(x);
        prop_assert!((q * 2.0).fract() == 0.0);
        prop_assert!((q - x).abs() <= 0.25 + 1e-12);
        let c = command_setpoint(x);
        prop_assert!((10.0..=30.0).contains(&c));
        prop_assert!((c * 2.0).fract() == 0.0);
    }

    /// Energy-signature AUC is linear in the fitted coefficients.
    #[test]
    fn auc_linear_in_beta(
        b0a in -20.0..80.0f64, b1a in -6.0..1.0f64,
        b0b in -20.0..80.0f64, b1b in -6.0..1.0f64,
    ) {
        let cop = CopCurve::default();
        let make = |b0: f64, b1: f64| hearth::analysis::SignatureFit {
            beta0: b0,
            beta1: b1,
            covariance: [[0.0; 2]; 2],
            r_squared: 1.0,
            kind: hearth::analysis::SignatureKind::Outdoor,
            n_days: 5,
        };
        let a = hearth::analysis::auc_energy(&make(b0a, b1a), &cop, (-7.0, 5.0), 0.05).unwrap();
        let b = hearth::analysis::auc_energy(&make(b0b, b1b), &cop, (-7.0, 5.0), 0.05).unwrap();
        let sum = hearth::analysis::auc_energy(&make(b0a + b0b, b1a + b1b), &cop, (-7.0, 5.0), 0.05)
            .unwrap();
        prop_assert!((a + b - sum).abs() < 1e-8 * (1.0 + a.abs() + b.abs()));
    }
}
