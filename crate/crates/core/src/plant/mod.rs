//! The simulated house: ground-truth thermal plant, thermostat actuation
//! layer, weather traces, fault injection, and the hourly interaction loop.
//!
//! The plant integrates the same 2R1C ODE family as the controllers' models,
//! but with its own parameters and an additive internal-gain square wave, so
//! every controller faces honest model error. Actuation goes through a
//! hysteretic two-stage thermostat reading its own offset, noisy, 0.5 °C
//! quantized sensor — reproducing the gap between commanded plans and
//! delivered energy seen on real hardware.

mod episode;
mod faults;
mod thermostat;
mod weather;

pub use episode::{run_episode, EpisodeSetup};
pub use faults::{FaultKind, FaultSchedule, FaultWindow};
pub use thermostat::{thermostat_step, Stage};
pub use weather::{
    load_weather_csv, save_weather_csv, synthesize_weather, ClimatePreset, WeatherPoint,
};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::thermal::{CopCurve, PhysicalParams};

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("missing or misnamed column in header: expected `{expected}`")]
    BadHeader { expected: String },
    #[error("line {line}: timestamps must be strictly increasing at 1 h spacing")]
    NonMonotoneTimestamp { line: usize },
    #[error("line {line}: irradiance must be non-negative")]
    NegativeIrradiance { line: usize },
    #[error("invalid plant config: {0}")]
    BadConfig(String),
    #[error("weather trace ends at hour {trace_hours}, episode needs {needed}")]
    TraceTooShort { trace_hours: usize, needed: usize },
    #[error(transparent)]
    Control(#[from] crate::controllers::ControlError),
}

/// Additive-offset, Gaussian-noise sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub offset_c: f64,
    pub noise_sigma_c: f64,
}

/// Square-wave internal gains: occupants, appliances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalGains {
    pub day_kw: f64,
    pub night_kw: f64,
}

impl InternalGains {
    pub fn at_local_hour(&self, hour: u32) -> f64 {
        if (7..23).contains(&(hour % 24)) {
            self.day_kw
        } else {
            self.night_kw
        }
    }
}

/// Ground-truth plant plus its actuation layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    /// True thermal parameters; typically perturbed away from any
    /// controller's model.
    pub true_params: PhysicalParams,
    pub cop: CopCurve,
    /// Return-air duct sensor (what controllers observe).
    pub return_sensor: SensorModel,
    /// Thermostat's own sensor (what the hysteresis acts on, displayed at
    /// 0.5 °C resolution).
    pub local_sensor: SensorModel,
    /// Hysteresis half-width, °C.
    pub deadband_c: f64,
    /// Setpoint-minus-local-temperature gap that stages backup heat, °C.
    pub stage2_gap_c: f64,
    pub hp_capacity_kw: f64,
    pub bh_capacity_kw: f64,
    /// Plant integration substep, seconds; must divide 3600.
    pub substep_s: u32,
    pub internal_gains: InternalGains,
    pub initial_temp_c: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        // True parameters sit ~15 % off the stock model parameters.
        Self {
            true_params: PhysicalParams {
                capacitance: 7.4,
                r_mass: 0.92,
                r_out: 2.25,
                t_mass: 20.0,
                eta_backup: 0.97,
                a_eff: 2.4,
            },
            cop: CopCurve::default(),
            return_sensor: SensorModel { offset_c: 0.0, noise_sigma_c: 0.05 },
            local_sensor: SensorModel { offset_c: 0.3, noise_sigma_c: 0.05 },
            deadband_c: 0.25,
            stage2_gap_c: 2.0,
            hp_capacity_kw: 4.2,
            bh_capacity_kw: 10.0,
            substep_s: 60,
            internal_gains: InternalGains { day_kw: 0.3, night_kw: 0.1 },
            initial_temp_c: 20.0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<(), PlantError> {
        self.true_params
            .validate()
            .map_err(|e| PlantError::BadConfig(e.to_string()))?;
        if !(self.deadband_c > 0.0) {
            return Err(PlantError::BadConfig("deadband must be positive".into()));
        }
        if self.stage2_gap_c <= self.deadband_c {
            return Err(PlantError::BadConfig("stage2 gap must exceed the deadband".into()));
        }
        if !(self.hp_capacity_kw > 0.0) || !(self.bh_capacity_kw > 0.0) {
            return Err(PlantError::BadConfig("capacities must be positive".into()));
        }
        if self.substep_s == 0 || 3600 % self.substep_s != 0 {
            return Err(PlantError::BadConfig(format!(
                "substep {}s must divide 3600",
                self.substep_s
            )));
        }
        Ok(())
    }

    /// Integrate the true plant over one hour at constant powers and
    /// weather; forward Euler at the configured substep.
    pub fn plant_step_hour(&self, powers: [f64; 2], w: &WeatherPoint, x: f64, gains_kw: f64) -> f64 {
        let n = 3600 / self.substep_s;
        let h = self.substep_s as f64 / 3600.0;
        let d = crate::thermal::Disturbance {
            t_mass: self.true_params.t_mass,
            t_out: w.t_out,
            i_sol: w.i_sol,
        };
        let mut x = x;
        for _ in 0..n {
            let rhs = crate::thermal::continuous_rhs(&self.true_params, &self.cop, x, powers, &d)
                + gains_kw / self.true_params.capacitance;
            x += h * rhs;
        }
        x
    }
}

/// One hour of the interaction log. Powers are hour-average delivered power,
/// so `energy_kwh = Δt·(p_hp + p_bh)` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRecord {
    pub timestamp: DateTime<Utc>,
    pub setpoint_c: f64,
    pub readback_ok: bool,
    /// Controller's planned powers, absent for the baseline.
    pub u_star: Option<[f64; 2]>,
    /// Delivered powers, kW (hour average).
    pub p_hp_kw: f64,
    pub p_bh_kw: f64,
    pub t_true_c: f64,
    pub t_return_c: f64,
    pub t_local_c: f64,
    pub t_out_c: f64,
    pub i_sol_kw_m2: f64,
    pub energy_kwh: f64,
}

/// Hourly interaction log of one deployment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionLog {
    pub records: Vec<InteractionRecord>,
}

pub const LOG_HEADER: &str = "timestamp,setpoint_c,readback_ok,u_hp_kw,u_bh_kw,p_hp_kw,p_bh_kw,t_true_c,t_return_c,t_local_c,t_out_c,i_sol_kw_m2,energy_kwh";

impl InteractionLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(128 * (self.records.len() + 1));
        out.push_str(LOG_HEADER);
        out.push('\n');
        for r in &self.records {
            let (u_hp, u_bh) = match r.u_star {
                Some(u) => (format!("{:.6}", u[0]), format!("{:.6}", u[1])),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{:.6},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                r.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                r.setpoint_c,
                r.readback_ok,
                u_hp,
                u_bh,
                r.p_hp_kw,
                r.p_bh_kw,
                r.t_true_c,
                r.t_return_c,
                r.t_local_c,
                r.t_out_c,
                r.i_sol_kw_m2,
                r.energy_kwh,
            ));
        }
        out
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<(), PlantError> {
        std::fs::write(path, self.to_csv())
            .map_err(|source| PlantError::Io { path: path.display().to_string(), source })
    }

    pub fn from_csv(text: &str) -> Result<Self, PlantError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| PlantError::BadHeader { expected: LOG_HEADER.into() })?;
        if header.trim() != LOG_HEADER {
            return Err(PlantError::BadHeader { expected: LOG_HEADER.into() });
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 13 {
                return Err(PlantError::MalformedRow {
                    line: line_no,
                    message: format!("expected 13 fields, got {}", fields.len()),
                });
            }
            let ts = DateTime::parse_from_rfc3339(fields[0])
                .map_err(|e| PlantError::MalformedRow { line: line_no, message: e.to_string() })?
                .with_timezone(&Utc);
            let parse = |s: &str, name: &str| -> Result<f64, PlantError> {
                s.parse::<f64>().map_err(|e| PlantError::MalformedRow {
                    line: line_no,
                    message: format!("{name}: {e}"),
                })
            };
            let readback_ok = match fields[2] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(PlantError::MalformedRow {
                        line: line_no,
                        message: format!("readback_ok must be true/false, got {other}"),
                    })
                }
            };
            let u_star = if fields[3].is_empty() && fields[4].is_empty() {
                None
            } else {
                Some([parse(fields[3], "u_hp_kw")?, parse(fields[4], "u_bh_kw")?])
            };
            records.push(InteractionRecord {
                timestamp: ts,
                setpoint_c: parse(fields[1], "setpoint_c")?,
                readback_ok,
                u_star,
                p_hp_kw: parse(fields[5], "p_hp_kw")?,
                p_bh_kw: parse(fields[6], "p_bh_kw")?,
                t_true_c: parse(fields[7], "t_true_c")?,
                t_return_c: parse(fields[8], "t_return_c")?,
                t_local_c: parse(fields[9], "t_local_c")?,
                t_out_c: parse(fields[10], "t_out_c")?,
                i_sol_kw_m2: parse(fields[11], "i_sol_kw_m2")?,
                energy_kwh: parse(fields[12], "energy_kwh")?,
            });
        }
        Ok(Self { records })
    }

    pub fn load_csv(path: &std::path::Path) -> Result<Self, PlantError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| PlantError::Io { path: path.display().to_string(), source })?;
        Self::from_csv(&text)
    }
}
