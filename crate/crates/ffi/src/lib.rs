//! C ABI over the core building blocks: the 2R1C thermal model, the
//! box-constrained LQR policy solve, the comfort metric, and the
//! energy-signature primitives.
//!
//! Conventions:
//! - Every fallible call returns a [`HearthStatus`]; outputs go through
//!   pointers and are written only on `Ok`.
//! - The model is an opaque handle created by [`hearth_model_new`] and
//!   released by [`hearth_model_free`]. All other data crosses the boundary
//!   as plain structs or caller-allocated arrays.
//! - Disturbance arrays are row-major `[t_mass, t_out, i_sol]` triples;
//!   control arrays are `[p_hp, p_bh]` pairs.
//!
//! The checked-in header `include/hearth.h` mirrors this surface.

use hearth::analysis::{pmv_ppd, ComfortAssumptions};
use hearth::solver::{solve_box_lqr, Bounds, LqrProblem, LqrStep, QuadCostParams, SolverConfig};
use hearth::thermal::{
    continuous_matrices, discretize_zoh, step_dynamics, CopCurve, Disturbance, PhysicalParams,
};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HearthStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    SolverFailure = 3,
}

/// Physical parameters of the 2R1C model. Capacitance in kWh/°C.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HearthPhysicalParams {
    pub capacitance_kwh_per_c: f64,
    pub r_mass_c_per_kw: f64,
    pub r_out_c_per_kw: f64,
    pub t_mass_c: f64,
    pub eta_backup: f64,
    pub a_eff_m2: f64,
}

/// Affine-with-floor COP curve.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HearthCopCurve {
    pub c0: f64,
    pub c1_per_c: f64,
    pub floor: f64,
}

/// Quadratic policy cost weights.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HearthQuadCost {
    pub o_state: f64,
    pub r_hp: f64,
    pub r_bh: f64,
}

/// Opaque model handle: physical parameters plus COP curve.
pub struct HearthModel {
    params: PhysicalParams,
    curve: CopCurve,
}

impl HearthPhysicalParams {
    fn to_params(self) -> PhysicalParams {
        PhysicalParams {
            capacitance: self.capacitance_kwh_per_c,
            r_mass: self.r_mass_c_per_kw,
            r_out: self.r_out_c_per_kw,
            t_mass: self.t_mass_c,
            eta_backup: self.eta_backup,
            a_eff: self.a_eff_m2,
        }
    }
}

impl HearthCopCurve {
    fn to_curve(self) -> CopCurve {
        CopCurve { c0: self.c0, c1: self.c1_per_c, floor: self.floor }
    }
}

/// Create a model handle. Writes the new handle into `out` on success.
///
/// # Safety
/// `params`, `curve`, and `out` must be valid pointers; the handle must be
/// released with [`hearth_model_free`].
#[no_mangle]
pub unsafe extern "C" fn hearth_model_new(
    params: *const HearthPhysicalParams,
    curve: *const HearthCopCurve,
    out: *mut *mut HearthModel,
) -> HearthStatus {
    if params.is_null() || curve.is_null() || out.is_null() {
        return HearthStatus::NullArgument;
    }
    let p = (*params).to_params();
    if p.validate().is_err() {
        return HearthStatus::InvalidArgument;
    }
    let model = Box::new(HearthModel { params: p, curve: (*curve).to_curve() });
    *out = Box::into_raw(model);
    HearthStatus::Ok
}

/// Release a handle created by [`hearth_model_new`]. NULL is a no-op.
///
/// # Safety
/// `model` must be a pointer returned by [`hearth_model_new`] that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn hearth_model_free(model: *mut HearthModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// COP at an outdoor temperature.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hearth_model_cop(model: *const HearthModel, t_out_c: f64) -> f64 {
    if model.is_null() {
        return f64::NAN;
    }
    (*model).curve.at(t_out_c)
}

/// One exact discrete prediction step.
/// `u` is `[p_hp_kw, p_bh_kw]`; `d` is `[t_mass_c, t_out_c, i_sol_kw_m2]`.
///
/// # Safety
/// All pointers must be valid; `u` holds 2 and `d` holds 3 readable doubles.
#[no_mangle]
pub unsafe extern "C" fn hearth_model_step(
    model: *const HearthModel,
    x_c: f64,
    u: *const f64,
    d: *const f64,
    dt_hours: f64,
    x_next_out: *mut f64,
) -> HearthStatus {
    if model.is_null() || u.is_null() || d.is_null() || x_next_out.is_null() {
        return HearthStatus::NullArgument;
    }
    let m = &*model;
    let dist = Disturbance { t_mass: *d, t_out: *d.add(1), i_sol: *d.add(2) };
    let cm = match continuous_matrices(&m.params, &m.curve, dist.t_out) {
        Ok(cm) => cm,
        Err(_) => return HearthStatus::InvalidArgument,
    };
    let ss = match discretize_zoh(&cm, dt_hours) {
        Ok(ss) => ss,
        Err(_) => return HearthStatus::InvalidArgument,
    };
    *x_next_out = step_dynamics(&ss, x_c, [*u, *u.add(1)], &dist);
    HearthStatus::Ok
}

/// Roll the model over `horizon` steps, rebuilding the control gain from
/// each step's outdoor temperature. `u` holds `2·horizon` doubles, `d`
/// holds `3·horizon`, `x_out` receives `horizon` states.
///
/// # Safety
/// All pointers must be valid for the documented lengths.
#[no_mangle]
pub unsafe extern "C" fn hearth_model_predict(
    model: *const HearthModel,
    x0_c: f64,
    u: *const f64,
    d: *const f64,
    horizon: usize,
    dt_hours: f64,
    x_out: *mut f64,
) -> HearthStatus {
    if model.is_null() || u.is_null() || d.is_null() || x_out.is_null() {
        return HearthStatus::NullArgument;
    }
    if horizon == 0 {
        return HearthStatus::InvalidArgument;
    }
    let m = &*model;
    let controls: Vec<[f64; 2]> =
        (0..horizon).map(|k| [*u.add(2 * k), *u.add(2 * k + 1)]).collect();
    let disturbances: Vec<Disturbance> = (0..horizon)
        .map(|k| Disturbance {
            t_mass: *d.add(3 * k),
            t_out: *d.add(3 * k + 1),
            i_sol: *d.add(3 * k + 2),
        })
        .collect();
    match hearth::thermal::predict_trajectory(
        &m.params,
        &m.curve,
        x0_c,
        &controls,
        &disturbances,
        dt_hours,
    ) {
        Ok(xs) => {
            for (k, x) in xs.iter().enumerate() {
                *x_out.add(k) = *x;
            }
            HearthStatus::Ok
        }
        Err(_) => HearthStatus::InvalidArgument,
    }
}

/// Solve the finite-horizon box-constrained tracking problem the learning
/// controller uses as its policy. `bounds` is `[hp_lo, hp_hi, bh_lo, bh_hi]`;
/// `u_out` receives `2·horizon` controls, `x_out` (optional) `horizon`
/// states, `objective_out` (optional) the optimal objective.
///
/// # Safety
/// Array pointers must be valid for the documented lengths; `x_out` and
/// `objective_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn hearth_solve_box_lqr(
    model: *const HearthModel,
    x0_c: f64,
    d: *const f64,
    targets: *const f64,
    horizon: usize,
    bounds: *const f64,
    cost: *const HearthQuadCost,
    u_out: *mut f64,
    x_out: *mut f64,
    objective_out: *mut f64,
) -> HearthStatus {
    if model.is_null() || d.is_null() || targets.is_null() || bounds.is_null() || cost.is_null()
        || u_out.is_null()
    {
        return HearthStatus::NullArgument;
    }
    if horizon == 0 {
        return HearthStatus::InvalidArgument;
    }
    let m = &*model;
    let quad = QuadCostParams {
        o_state: (*cost).o_state,
        r_hp: (*cost).r_hp,
        r_bh: (*cost).r_bh,
    };
    let mut steps = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let dist = Disturbance {
            t_mass: *d.add(3 * k),
            t_out: *d.add(3 * k + 1),
            i_sol: *d.add(3 * k + 2),
        };
        let cm = match continuous_matrices(&m.params, &m.curve, dist.t_out) {
            Ok(cm) => cm,
            Err(_) => return HearthStatus::InvalidArgument,
        };
        let ss = match discretize_zoh(&cm, 1.0) {
            Ok(ss) => ss,
            Err(_) => return HearthStatus::InvalidArgument,
        };
        steps.push(LqrStep {
            a: ss.a,
            b_u: ss.b_u,
            offset: ss.b_d[0] * dist.t_mass + ss.b_d[1] * dist.t_out + ss.b_d[2] * dist.i_sol,
        });
    }
    let target_slice = std::slice::from_raw_parts(targets, horizon);
    let problem = LqrProblem::tracking(
        x0_c,
        steps,
        quad,
        target_slice,
        [Bounds::new(*bounds, *bounds.add(1)), Bounds::new(*bounds.add(2), *bounds.add(3))],
    );
    match solve_box_lqr(&problem, &SolverConfig::default()) {
        Ok(sol) => {
            for (k, u) in sol.u_star.iter().enumerate() {
                *u_out.add(2 * k) = u[0];
                *u_out.add(2 * k + 1) = u[1];
            }
            if !x_out.is_null() {
                for (k, x) in sol.x_star.iter().enumerate() {
                    *x_out.add(k) = *x;
                }
            }
            if !objective_out.is_null() {
                *objective_out = sol.objective;
            }
            HearthStatus::Ok
        }
        Err(_) => HearthStatus::SolverFailure,
    }
}

/// Predicted percentage of dissatisfied (%) at an air temperature, with the
/// mean radiant temperature taken equal to the air temperature. Returns a
/// negative value on invalid input.
#[no_mangle]
pub extern "C" fn hearth_ppd(
    t_air_c: f64,
    met: f64,
    clo: f64,
    air_velocity_ms: f64,
    relative_humidity_pct: f64,
) -> f64 {
    let assumptions = ComfortAssumptions {
        met,
        clo,
        air_velocity: air_velocity_ms,
        rh: relative_humidity_pct,
        mrt_equals_air: true,
    };
    pmv_ppd(t_air_c, &assumptions).unwrap_or(-1.0)
}

/// Ordinary least squares of the COP-corrected energy signature
/// `e_e·cop(t̄) = beta0 + beta1·t̄` over daily aggregates. `beta_out`
/// receives `[beta0, beta1]`; `r_squared_out` may be NULL.
///
/// # Safety
/// `t_out_mean` and `e_e_kwh` must hold `n_days` readable doubles;
/// `beta_out` two writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hearth_fit_signature(
    t_out_mean: *const f64,
    e_e_kwh: *const f64,
    n_days: usize,
    curve: *const HearthCopCurve,
    beta_out: *mut f64,
    r_squared_out: *mut f64,
) -> HearthStatus {
    if t_out_mean.is_null() || e_e_kwh.is_null() || curve.is_null() || beta_out.is_null() {
        return HearthStatus::NullArgument;
    }
    let records: Vec<hearth::analysis::DailyRecord> = (0..n_days)
        .map(|i| hearth::analysis::DailyRecord {
            date: chrono_date(i),
            operating_hours: 24.0,
            e_e: *e_e_kwh.add(i),
            t_out_mean: *t_out_mean.add(i),
            t_in_mean: 20.0,
        })
        .collect();
    match hearth::analysis::fit_signature(
        &records,
        &(*curve).to_curve(),
        hearth::analysis::SignatureKind::Outdoor,
    ) {
        Ok(fit) => {
            *beta_out = fit.beta0;
            *beta_out.add(1) = fit.beta1;
            if !r_squared_out.is_null() {
                *r_squared_out = fit.r_squared;
            }
            HearthStatus::Ok
        }
        Err(_) => HearthStatus::InvalidArgument,
    }
}

/// Area under the fitted electrical-energy curve `(beta0 + beta1·t)/cop(t)`
/// over `[lo, hi]` by composite Simpson quadrature.
///
/// # Safety
/// `beta` must hold 2 readable doubles; `curve` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hearth_auc_energy(
    beta: *const f64,
    curve: *const HearthCopCurve,
    lo_c: f64,
    hi_c: f64,
    step_c: f64,
    out: *mut f64,
) -> HearthStatus {
    if beta.is_null() || curve.is_null() || out.is_null() {
        return HearthStatus::NullArgument;
    }
    let fit = hearth::analysis::SignatureFit {
        beta0: *beta,
        beta1: *beta.add(1),
        covariance: [[0.0; 2]; 2],
        r_squared: 1.0,
        kind: hearth::analysis::SignatureKind::Outdoor,
        n_days: 0,
    };
    match hearth::analysis::auc_energy(&fit, &(*curve).to_curve(), (lo_c, hi_c), step_c) {
        Ok(v) => {
            *out = v;
            HearthStatus::Ok
        }
        Err(_) => HearthStatus::InvalidArgument,
    }
}

fn chrono_date(i: usize) -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(2024, 1, 1).expect("static date")
        + chrono::Days::new(i as u64)
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hearth_version() -> *const std::os::raw::c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const std::os::raw::c_char
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_params() -> HearthPhysicalParams {
        HearthPhysicalParams {
            capacitance_kwh_per_c: 6.5,
            r_mass_c_per_kw: 1.06,
            r_out_c_per_kw: 2.04,
            t_mass_c: 20.0,
            eta_backup: 1.0,
            a_eff_m2: 3.0,
        }
    }

    fn default_curve() -> HearthCopCurve {
        HearthCopCurve { c0: 3.0, c1_per_c: 0.05, floor: 1.0 }
    }

    #[test]
    fn model_lifecycle_and_step() {
        unsafe {
            let mut handle: *mut HearthModel = std::ptr::null_mut();
            let status = hearth_model_new(&default_params(), &default_curve(), &mut handle);
            assert_eq!(status, HearthStatus::Ok);
            assert!((hearth_model_cop(handle, 5.0) - 3.25).abs() < 1e-12);

            // Equilibrium fixed point survives the ABI round trip.
            let u = [0.0, 0.0];
            let d = [20.0, 20.0, 0.0];
            let mut x_next = 0.0;
            let status = hearth_model_step(handle, 20.0, u.as_ptr(), d.as_ptr(), 1.0, &mut x_next);
            assert_eq!(status, HearthStatus::Ok);
            assert!((x_next - 20.0).abs() < 1e-12);

            hearth_model_free(handle);
        }
    }

    #[test]
    fn null_checks_are_reported() {
        unsafe {
            let mut handle: *mut HearthModel = std::ptr::null_mut();
            assert_eq!(
                hearth_model_new(std::ptr::null(), &default_curve(), &mut handle),
                HearthStatus::NullArgument
            );
            let bad = HearthPhysicalParams { capacitance_kwh_per_c: -1.0, ..default_params() };
            assert_eq!(
                hearth_model_new(&bad, &default_curve(), &mut handle),
                HearthStatus::InvalidArgument
            );
            hearth_model_free(std::ptr::null_mut()); // no-op
        }
    }

    #[test]
    fn lqr_solution_matches_core_solver() {
        unsafe {
            let mut handle: *mut HearthModel = std::ptr::null_mut();
            hearth_model_new(&default_params(), &default_curve(), &mut handle);

            let horizon = 4;
            let d: Vec<f64> = (0..horizon).flat_map(|_| [20.0, -5.0, 0.1]).collect();
            let targets = vec![20.0; horizon];
            let bounds = [0.0, 4.2, 0.0, 10.0];
            let cost = HearthQuadCost { o_state: 5.0, r_hp: 0.2, r_bh: 0.8 };
            let mut u = vec![0.0; 2 * horizon];
            let mut x = vec![0.0; horizon];
            let mut objective = 0.0;
            let status = hearth_solve_box_lqr(
                handle,
                18.5,
                d.as_ptr(),
                targets.as_ptr(),
                horizon,
                bounds.as_ptr(),
                &cost,
                u.as_mut_ptr(),
                x.as_mut_ptr(),
                &mut objective,
            );
            assert_eq!(status, HearthStatus::Ok);
            for k in 0..horizon {
                assert!(u[2 * k] >= 0.0 && u[2 * k] <= 4.2);
                assert!(u[2 * k + 1] >= 0.0 && u[2 * k + 1] <= 10.0);
            }
            assert!(objective.is_finite());
            // The first state moves toward the target from a cold start.
            assert!(x[0] > 18.5);
            hearth_model_free(handle);
        }
    }

    #[test]
    fn comfort_and_signature_helpers() {
        let ppd = hearth_ppd(21.5, 1.2, 1.0, 0.1, 40.0);
        assert!((5.0..30.0).contains(&ppd));
        assert_eq!(hearth_ppd(-100.0, 1.2, 1.0, 0.1, 40.0), -1.0);

        unsafe {
            // Affine energy data with unit COP: exact recovery and AUC.
            let t: Vec<f64> = (0..8).map(|i| i as f64 - 4.0).collect();
            let e: Vec<f64> = t.iter().map(|t| 50.0 - 3.0 * t).collect();
            let unit = HearthCopCurve { c0: 1.0, c1_per_c: 0.0, floor: 1.0 };
            let mut beta = [0.0; 2];
            let mut r2 = 0.0;
            let status =
                hearth_fit_signature(t.as_ptr(), e.as_ptr(), 8, &unit, beta.as_mut_ptr(), &mut r2);
            assert_eq!(status, HearthStatus::Ok);
            assert!((beta[0] - 50.0).abs() < 1e-9);
            assert!((beta[1] + 3.0).abs() < 1e-9);
            assert!((r2 - 1.0).abs() < 1e-9);

            let mut auc = 0.0;
            let b = [10.0, -1.0];
            let status = hearth_auc_energy(b.as_ptr(), &unit, 0.0, 2.0, 0.01, &mut auc);
            assert_eq!(status, HearthStatus::Ok);
            assert!((auc - 18.0).abs() < 1e-10);
        }
    }

    #[test]
    fn version_string_is_nul_terminated() {
        let v = hearth_version();
        let s = unsafe { std::ffi::CStr::from_ptr(v) };
        assert_eq!(s.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
