/* C interface for the hearth thermal-control library.
 *
 * Mirrors the #[no_mangle] surface of the hearth-ffi crate; regenerate with
 * cbindgen (see cbindgen.toml) or keep in sync by hand.
 */

#ifndef HEARTH_H
#define HEARTH_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes returned by every fallible call. */
typedef enum HearthStatus {
  HEARTH_STATUS_OK = 0,
  HEARTH_STATUS_NULL_ARGUMENT = 1,
  HEARTH_STATUS_INVALID_ARGUMENT = 2,
  HEARTH_STATUS_SOLVER_FAILURE = 3,
} HearthStatus;

/* Physical parameters of the 2R1C model. Capacitance in kWh/°C. */
typedef struct HearthPhysicalParams {
  double capacitance_kwh_per_c;
  double r_mass_c_per_kw;
  double r_out_c_per_kw;
  double t_mass_c;
  double eta_backup;
  double a_eff_m2;
} HearthPhysicalParams;

/* Affine-with-floor COP curve: cop(t) = max(floor, c0 + c1·t). */
typedef struct HearthCopCurve {
  double c0;
  double c1_per_c;
  double floor;
} HearthCopCurve;

/* Quadratic policy cost weights. */
typedef struct HearthQuadCost {
  double o_state;
  double r_hp;
  double r_bh;
} HearthQuadCost;

/* Opaque model handle: physical parameters plus COP curve. */
typedef struct HearthModel HearthModel;

/* Create a model handle; release with hearth_model_free. */
HearthStatus hearth_model_new(const HearthPhysicalParams *params,
                              const HearthCopCurve *curve,
                              HearthModel **out);

/* Release a handle. NULL is a no-op. */
void hearth_model_free(HearthModel *model);

/* COP at an outdoor temperature; NaN on a NULL handle. */
double hearth_model_cop(const HearthModel *model, double t_out_c);

/* One exact discrete prediction step.
 * u: [p_hp_kw, p_bh_kw]; d: [t_mass_c, t_out_c, i_sol_kw_m2]. */
HearthStatus hearth_model_step(const HearthModel *model,
                               double x_c,
                               const double *u,
                               const double *d,
                               double dt_hours,
                               double *x_next_out);

/* Roll the model over `horizon` steps. u: 2·horizon doubles,
 * d: 3·horizon doubles, x_out: horizon doubles. */
HearthStatus hearth_model_predict(const HearthModel *model,
                                  double x0_c,
                                  const double *u,
                                  const double *d,
                                  size_t horizon,
                                  double dt_hours,
                                  double *x_out);

/* Solve the finite-horizon box-constrained tracking problem.
 * d: 3·horizon doubles; targets: horizon doubles;
 * bounds: [hp_lo, hp_hi, bh_lo, bh_hi]; u_out: 2·horizon doubles;
 * x_out and objective_out may be NULL. */
HearthStatus hearth_solve_box_lqr(const HearthModel *model,
                                  double x0_c,
                                  const double *d,
                                  const double *targets,
                                  size_t horizon,
                                  const double *bounds,
                                  const HearthQuadCost *cost,
                                  double *u_out,
                                  double *x_out,
                                  double *objective_out);

/* Predicted percentage of dissatisfied (%), MRT taken equal to air
 * temperature. Negative return on invalid input. */
double hearth_ppd(double t_air_c,
                  double met,
                  double clo,
                  double air_velocity_ms,
                  double relative_humidity_pct);

/* OLS of the COP-corrected energy signature over daily aggregates.
 * beta_out: [beta0, beta1]; r_squared_out may be NULL. */
HearthStatus hearth_fit_signature(const double *t_out_mean,
                                  const double *e_e_kwh,
                                  size_t n_days,
                                  const HearthCopCurve *curve,
                                  double *beta_out,
                                  double *r_squared_out);

/* Area under (beta0 + beta1·t)/cop(t) over [lo, hi], Simpson quadrature. */
HearthStatus hearth_auc_energy(const double *beta,
                               const HearthCopCurve *curve,
                               double lo_c,
                               double hi_c,
                               double step_c,
                               double *out);

/* Crate version as a static NUL-terminated string. */
const char *hearth_version(void);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* HEARTH_H */
