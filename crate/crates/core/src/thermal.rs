//! Lumped 2R1C thermal model of a single conditioned zone.
//!
//! The zone air node exchanges heat with a deep thermal mass through `r_mass`
//! and with the outdoor air through `r_out`; all storage is lumped into one
//! capacitance. Controllable heat enters from a heat pump (scaled by the
//! outdoor-temperature-dependent COP) and an electric backup element (scaled
//! by `eta_backup`), and solar gains enter through an effective aperture
//! `a_eff`:
//!
//! ```text
//! C dT/dt = (T_m - T)/R_m + (T_out - T)/R_out
//!           + COP(T_out)·P_hp + η·P_bh + A_eff·I_sol
//! ```
//!
//! Internally the capacitance is kept in kWh/°C so that hourly steps and kW
//! powers compose without conversion factors; J/°C is accepted at the config
//! boundary via [`PhysicalParams::capacitance_joules`].
//!
//! Discrete one-hour prediction uses the exact zero-order-hold map of the
//! scalar ODE. Because the input matrix depends on the outdoor temperature
//! through the COP, it is rebuilt at every step of a trajectory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Joules per kilowatt-hour.
pub const J_PER_KWH: f64 = 3.6e6;

#[derive(Debug, Error, PartialEq)]
pub enum ThermalError {
    #[error("physical parameter {name} must be positive, got {value}")]
    NonPositiveParam { name: &'static str, value: f64 },
    #[error("backup-heat efficiency must lie in (0, 2], got {0}")]
    EtaOutOfRange(f64),
    #[error("control and disturbance sequences differ in length ({controls} vs {disturbances})")]
    LengthMismatch { controls: usize, disturbances: usize },
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
}

/// Identified or learned physical parameters of the 2R1C model.
///
/// Serialized forms carry the capacitance in J/°C (`capacitance_j_per_c`);
/// `capacitance_kwh_per_c` is accepted on input as well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "PhysicalParamsWire", try_from = "PhysicalParamsWire")]
pub struct PhysicalParams {
    /// Thermal capacitance, kWh/°C.
    pub capacitance: f64,
    /// Resistance between zone air and thermal mass, °C/kW.
    pub r_mass: f64,
    /// Resistance between zone air and outdoor air, °C/kW.
    pub r_out: f64,
    /// Deep-mass temperature, °C. A measured disturbance during control, a
    /// constant during identification; both paths read this field.
    pub t_mass: f64,
    /// Backup-heat efficiency, dimensionless.
    pub eta_backup: f64,
    /// Solar aperture coefficient, m². May legitimately go negative during
    /// online adaptation, so no sign constraint.
    pub a_eff: f64,
}

/// On-disk form of [`PhysicalParams`].
#[derive(Serialize, Deserialize)]
struct PhysicalParamsWire {
    #[serde(skip_serializing_if = "Option::is_none")]
    capacitance_j_per_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacitance_kwh_per_c: Option<f64>,
    r_mass: f64,
    r_out: f64,
    t_mass: f64,
    eta_backup: f64,
    a_eff: f64,
}

impl From<PhysicalParams> for PhysicalParamsWire {
    fn from(p: PhysicalParams) -> Self {
        Self {
            capacitance_j_per_c: Some(p.capacitance * J_PER_KWH),
            capacitance_kwh_per_c: None,
            r_mass: p.r_mass,
            r_out: p.r_out,
            t_mass: p.t_mass,
            eta_backup: p.eta_backup,
            a_eff: p.a_eff,
        }
    }
}

impl TryFrom<PhysicalParamsWire> for PhysicalParams {
    type Error = String;

    fn try_from(w: PhysicalParamsWire) -> Result<Self, String> {
        let capacitance = match (w.capacitance_j_per_c, w.capacitance_kwh_per_c) {
            (Some(j), _) => j / J_PER_KWH,
            (None, Some(kwh)) => kwh,
            (None, None) => {
                return Err("missing capacitance_j_per_c (or capacitance_kwh_per_c)".into())
            }
        };
        Ok(Self {
            capacitance,
            r_mass: w.r_mass,
            r_out: w.r_out,
            t_mass: w.t_mass,
            eta_backup: w.eta_backup,
            a_eff: w.a_eff,
        })
    }
}

impl PhysicalParams {
    /// Construct with the capacitance given in J/°C.
    pub fn with_capacitance_joules(mut self, c_joules: f64) -> Self {
        self.capacitance = c_joules / J_PER_KWH;
        self
    }

    /// Capacitance in J/°C (the unit used in checkpoints).
    pub fn capacitance_joules(&self) -> f64 {
        self.capacitance * J_PER_KWH
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        for (name, value) in [
            ("capacitance", self.capacitance),
            ("r_mass", self.r_mass),
            ("r_out", self.r_out),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ThermalError::NonPositiveParam { name, value });
            }
        }
        if !(self.eta_backup > 0.0 && self.eta_backup <= 2.0) {
            return Err(ThermalError::EtaOutOfRange(self.eta_backup));
        }
        Ok(())
    }
}

/// Heat-pump coefficient of performance as an affine function of outdoor
/// temperature with a hard floor: `cop(T) = max(floor, c0 + c1·T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopCurve {
    pub c0: f64,
    /// Slope per °C of outdoor temperature.
    pub c1: f64,
    /// Minimum COP; electric-resistance behaviour is the natural floor.
    pub floor: f64,
}

impl Default for CopCurve {
    fn default() -> Self {
        Self { c0: 3.0, c1: 0.05, floor: 1.0 }
    }
}

impl CopCurve {
    /// COP at a given outdoor temperature. Total function.
    pub fn at(&self, t_out: f64) -> f64 {
        (self.c0 + self.c1 * t_out).max(self.floor)
    }
}

/// Measured disturbances entering one prediction step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    /// Thermal-mass temperature, °C.
    pub t_mass: f64,
    /// Outdoor air temperature, °C.
    pub t_out: f64,
    /// Global solar irradiance, kW/m².
    pub i_sol: f64,
}

/// Continuous-time matrices of the scalar 2R1C state equation
/// `dT/dt = a_c·T + b_uc·u + b_dc·d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousMatrices {
    /// State coefficient, 1/h. Strictly negative for valid parameters.
    pub a_c: f64,
    /// Input gains for `[P_hp, P_bh]` in kW, °C/(kW·h).
    pub b_uc: [f64; 2],
    /// Disturbance gains for `[T_m, T_out, I_sol]`.
    pub b_dc: [f64; 3],
}

/// Exact zero-order-hold discretization of [`ContinuousMatrices`] over one
/// sample interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceMatrices {
    /// State transition; lies in (0, 1) for valid parameters and dt > 0.
    pub a: f64,
    /// Control gain for `[P_hp, P_bh]`.
    pub b_u: [f64; 2],
    /// Disturbance gain for `[T_m, T_out, I_sol]`.
    pub b_d: [f64; 3],
}

impl StateSpaceMatrices {
    /// ZOH gain for one kW of generic thermal input over the step, given the
    /// capacitance the matrices were built from. Used to fold forecast
    /// exogenous gains into the affine offset.
    pub fn heat_gain(a_c: f64, dt: f64, capacitance: f64) -> f64 {
        zoh_phi(a_c, dt) / capacitance
    }
}

/// Continuous-time matrices from physical parameters. The input gain depends
/// on the outdoor temperature through the COP curve.
pub fn continuous_matrices(
    params: &PhysicalParams,
    curve: &CopCurve,
    t_out: f64,
) -> Result<ContinuousMatrices, ThermalError> {
    params.validate()?;
    let c = params.capacitance;
    // Shared conductance terms keep the equilibrium identity
    // b_dc[0] + b_dc[1] = -a_c exact in floating point.
    let g_mass = 1.0 / (params.r_mass * c);
    let g_out = 1.0 / (params.r_out * c);
    Ok(ContinuousMatrices {
        a_c: -(g_mass + g_out),
        b_uc: [curve.at(t_out) / c, params.eta_backup / c],
        b_dc: [g_mass, g_out, params.a_eff / c],
    })
}

/// `(e^{a_c·dt} - 1)/a_c`, the ZOH input-gain factor. A second-order series
/// below `|a_c·dt| < 1e-9` avoids catastrophic cancellation.
pub fn zoh_phi(a_c: f64, dt: f64) -> f64 {
    let z = a_c * dt;
    if z.abs() < 1e-9 {
        dt * (1.0 + z / 2.0 + z * z / 6.0)
    } else {
        ((z).exp() - 1.0) / a_c
    }
}

/// Discretize continuous matrices with a zero-order hold over `dt` hours.
pub fn discretize_zoh(
    cm: &ContinuousMatrices,
    dt: f64,
) -> Result<StateSpaceMatrices, ThermalError> {
    if !(dt > 0.0) {
        return Err(ThermalError::NonPositiveDt(dt));
    }
    let z = cm.a_c * dt;
    let a = if z.abs() < 1e-9 { 1.0 + z + z * z / 2.0 } else { z.exp() };
    let phi = zoh_phi(cm.a_c, dt);
    Ok(StateSpaceMatrices {
        a,
        b_u: [phi * cm.b_uc[0], phi * cm.b_uc[1]],
        b_d: [phi * cm.b_dc[0], phi * cm.b_dc[1], phi * cm.b_dc[2]],
    })
}

/// One discrete prediction step: `x⁺ = a·x + b_u·u + b_d·[T_m, T_out, I_sol]`.
pub fn step_dynamics(m: &StateSpaceMatrices, x: f64, u: [f64; 2], d: &Disturbance) -> f64 {
    m.a * x + m.b_u[0] * u[0] + m.b_u[1] * u[1] + m.b_d[0] * d.t_mass + m.b_d[1] * d.t_out
        + m.b_d[2] * d.i_sol
}

/// Continuous-time rate `dT/dt` in °C/h. This is the right-hand side the
/// ZOH map integrates exactly; the plant and the discretization checks
/// integrate it numerically instead.
pub fn continuous_rhs(
    params: &PhysicalParams,
    curve: &CopCurve,
    x: f64,
    u: [f64; 2],
    d: &Disturbance,
) -> f64 {
    ((d.t_mass - x) / params.r_mass
        + (d.t_out - x) / params.r_out
        + curve.at(d.t_out) * u[0]
        + params.eta_backup * u[1]
        + params.a_eff * d.i_sol)
        / params.capacitance
}

/// Roll [`step_dynamics`] over a horizon, rebuilding the control gain from
/// the COP at each step's outdoor temperature. Element `l` of the result is
/// the state after `l + 1` steps.
pub fn predict_trajectory(
    params: &PhysicalParams,
    curve: &CopCurve,
    x0: f64,
    controls: &[[f64; 2]],
    disturbances: &[Disturbance],
    dt: f64,
) -> Result<Vec<f64>, ThermalError> {
    if controls.len() != disturbances.len() {
        return Err(ThermalError::LengthMismatch {
            controls: controls.len(),
            disturbances: disturbances.len(),
        });
    }
    let mut x = x0;
    let mut out = Vec::with_capacity(controls.len());
    for (u, d) in controls.iter().zip(disturbances) {
        let m = discretize_zoh(&continuous_matrices(params, curve, d.t_out)?, dt)?;
        x = step_dynamics(&m, x, *u, d);
        out.push(x);
    }
    Ok(out)
}
