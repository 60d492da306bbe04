//! Steady-state thermal comfort: PMV and PPD.
//!
//! Standard Fanger comfort balance. The clothing-surface temperature is
//! solved by the usual damped fixed-point iteration; PPD follows as
//! `100 - 95·exp(-0.03353·PMV⁴ - 0.2179·PMV²)`, which has its minimum of
//! exactly 5 % at PMV = 0.

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::plant::InteractionLog;

/// Environment and occupant assumptions held fixed across all controllers
/// when comparing comfort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortAssumptions {
    /// Metabolic rate, met.
    pub met: f64,
    /// Clothing insulation, clo.
    pub clo: f64,
    /// Relative air velocity, m/s.
    pub air_velocity: f64,
    /// Relative humidity, %.
    pub rh: f64,
    /// Use the air temperature as the mean radiant temperature.
    pub mrt_equals_air: bool,
}

impl Default for ComfortAssumptions {
    /// Winter-residential defaults.
    fn default() -> Self {
        Self { met: 1.2, clo: 1.0, air_velocity: 0.1, rh: 40.0, mrt_equals_air: true }
    }
}

impl ComfortAssumptions {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.met > 0.0 && self.clo > 0.0 && self.air_velocity > 0.0) {
            return Err(AnalysisError::BadAssumptions(
                "met, clo and air velocity must be positive".into(),
            ));
        }
        if !(self.rh > 0.0 && self.rh < 100.0) {
            return Err(AnalysisError::BadAssumptions(format!(
                "relative humidity {} outside (0, 100)",
                self.rh
            )));
        }
        Ok(())
    }
}

/// Predicted mean vote at a given air temperature.
pub fn pmv(t_air: f64, a: &ComfortAssumptions) -> Result<f64, AnalysisError> {
    a.validate()?;
    if !(0.0..=50.0).contains(&t_air) {
        return Err(AnalysisError::TempOutOfRange(t_air));
    }
    // This entry point takes a single temperature; the flag records the
    // reporting convention (MRT taken equal to air).
    let t_r = t_air;
    // Water vapour pressure, Pa.
    let pa = a.rh * 10.0 * (16.6536 - 4030.183 / (t_air + 235.0)).exp();
    let icl = 0.155 * a.clo;
    let m = a.met * 58.15;
    let mw = m; // no external work
    let fcl = if icl <= 0.078 { 1.0 + 1.29 * icl } else { 1.05 + 0.645 * icl };
    let hcf = 12.1 * a.air_velocity.sqrt();
    let taa = t_air + 273.0;
    let tra = t_r + 273.0;

    // Clothing surface temperature by fixed-point iteration.
    let tcla = taa + (35.5 - t_air) / (3.5 * icl + 0.1);
    let p1 = icl * fcl;
    let p2 = p1 * 3.96;
    let p3 = p1 * 100.0;
    let p4 = p1 * taa;
    let p5 = 308.7 - 0.028 * mw + p2 * (tra / 100.0).powi(4);
    let mut xn = tcla / 100.0;
    let mut xf = tcla / 50.0;
    let mut hc = hcf;
    let mut iterations = 0;
    while (xn - xf).abs() > 0.00015 {
        xf = (xf + xn) / 2.0;
        let hcn = 2.38 * (100.0 * xf - taa).abs().powf(0.25);
        hc = hcf.max(hcn);
        xn = (p5 + p4 * hc - p2 * xf.powi(4)) / (100.0 + p3 * hc);
        iterations += 1;
        if iterations > 150 {
            break;
        }
    }
    let tcl = 100.0 * xn - 273.0;

    let hl1 = 3.05e-3 * (5733.0 - 6.99 * mw - pa);
    let hl2 = if mw > 58.15 { 0.42 * (mw - 58.15) } else { 0.0 };
    let hl3 = 1.7e-5 * m * (5867.0 - pa);
    let hl4 = 0.0014 * m * (34.0 - t_air);
    let hl5 = 3.96 * fcl * (xn.powi(4) - (tra / 100.0).powi(4));
    let hl6 = fcl * hc * (tcl - t_air);
    let ts = 0.303 * (-0.036 * m).exp() + 0.028;
    Ok(ts * (mw - hl1 - hl2 - hl3 - hl4 - hl5 - hl6))
}

/// Predicted percentage of dissatisfied, %.
pub fn pmv_ppd(t_air: f64, a: &ComfortAssumptions) -> Result<f64, AnalysisError> {
    let v = pmv(t_air, a)?;
    Ok(ppd_from_pmv(v))
}

pub fn ppd_from_pmv(pmv: f64) -> f64 {
    100.0 - 95.0 * (-(0.03353 * pmv.powi(4) + 0.2179 * pmv.powi(2))).exp()
}

/// Which logged temperature the comfort metric reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TempColumn {
    /// Whole-house view from the return duct.
    ReturnAir,
    /// What the equipment was actually controlled against.
    ThermostatLocal,
}

impl TempColumn {
    fn get(self, r: &crate::plant::InteractionRecord) -> f64 {
        match self {
            TempColumn::ReturnAir => r.t_return_c,
            TempColumn::ThermostatLocal => r.t_local_c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpdStats {
    pub mean: f64,
    pub std_dev: f64,
    pub max: f64,
    pub min: f64,
    pub count_hours: usize,
}

impl PpdStats {
    fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_dev: var.sqrt(),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            count_hours: values.len(),
        }
    }
}

/// Overall / daytime / nighttime PPD statistics of a log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpdStatsTable {
    pub overall: PpdStats,
    pub day: PpdStats,
    pub night: PpdStats,
    pub column: TempColumn,
}

/// Hourly PPD statistics partitioned into day (07–23 local) and night.
pub fn ppd_stats(
    log: &InteractionLog,
    assumptions: &ComfortAssumptions,
    column: TempColumn,
    tz_offset_hours: i32,
) -> Result<PpdStatsTable, AnalysisError> {
    use chrono::Timelike;
    if log.is_empty() {
        return Err(AnalysisError::EmptyLog);
    }
    let mut day = Vec::new();
    let mut night = Vec::new();
    for r in &log.records {
        let ppd = pmv_ppd(column.get(r), assumptions)?;
        let hour = ((r.timestamp.hour() as i32 + tz_offset_hours).rem_euclid(24)) as u32;
        if (7..23).contains(&hour) {
            day.push(ppd);
        } else {
            night.push(ppd);
        }
    }
    let overall: Vec<f64> = day.iter().chain(night.iter()).copied().collect();
    Ok(PpdStatsTable {
        overall: PpdStats::from_values(&overall),
        day: PpdStats::from_values(&day),
        night: PpdStats::from_values(&night),
        column,
    })
}
