//! Evaluation pipeline: day filtering, COP-corrected energy-signature fits,
//! area-under-curve savings with Monte-Carlo uncertainty, balance
//! temperatures, and PMV/PPD comfort statistics.

mod comfort;
mod montecarlo;
mod report;
mod signature;

pub use comfort::{pmv, pmv_ppd, ppd_from_pmv, ppd_stats, ComfortAssumptions, PpdStats, PpdStatsTable, TempColumn};
pub use montecarlo::{monte_carlo_savings, SavingsDistribution};
pub use report::{fit_curve_csv, ComparisonReport, ControllerAnalysis};
pub use signature::{auc_energy, balance_temperature, fit_signature, SignatureFit, SignatureKind};

use chrono::{FixedOffset, NaiveDate};
use thiserror::Error;

use crate::plant::InteractionLog;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("regressor is (numerically) constant; the fit is rank deficient")]
    RankDeficient,
    #[error("covariance matrix is not positive semidefinite")]
    NonPsdCovariance,
    #[error("interval [{a}, {b}] is empty or reversed")]
    BadInterval { a: f64, b: f64 },
    #[error("beta1 is zero; balance temperature undefined")]
    ZeroSlope,
    #[error("air temperature {0} °C outside the supported [0, 50] range")]
    TempOutOfRange(f64),
    #[error("invalid comfort assumptions: {0}")]
    BadAssumptions(String),
    #[error("log is empty")]
    EmptyLog,
}

/// One retained day of controller operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    /// Hours with data present for this local day.
    pub operating_hours: f64,
    /// Daily electrical HVAC energy, kWh.
    pub e_e: f64,
    pub t_out_mean: f64,
    /// Daily mean indoor (return-air) temperature.
    pub t_in_mean: f64,
}

/// Aggregate an hourly log into local calendar days, dropping days with
/// fewer than `min_hours` present hours (the field analyses kept days with
/// 20 h or more of single-controller operation).
pub fn filter_days(
    log: &InteractionLog,
    tz_offset_hours: i32,
    min_hours: f64,
) -> Vec<DailyRecord> {
    let tz = FixedOffset::east_opt(tz_offset_hours * 3600).expect("offset within a day");
    let mut days: Vec<(NaiveDate, Vec<&crate::plant::InteractionRecord>)> = Vec::new();
    for r in &log.records {
        let date = r.timestamp.with_timezone(&tz).date_naive();
        match days.last_mut() {
            Some((d, rows)) if *d == date => rows.push(r),
            _ => days.push((date, vec![r])),
        }
    }
    days.into_iter()
        .filter_map(|(date, rows)| {
            let hours = rows.len() as f64;
            if hours < min_hours {
                return None;
            }
            let n = rows.len() as f64;
            Some(DailyRecord {
                date,
                operating_hours: hours,
                e_e: rows.iter().map(|r| r.energy_kwh).sum(),
                t_out_mean: rows.iter().map(|r| r.t_out_c).sum::<f64>() / n,
                t_in_mean: rows.iter().map(|r| r.t_return_c).sum::<f64>() / n,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{InteractionLog, InteractionRecord};
    use chrono::{DateTime, Duration, Utc};

    fn make_log(hours_per_day: &[usize]) -> InteractionLog {
        let start: DateTime<Utc> = "2024-01-05T00:00:00Z".parse().unwrap();
        let mut records = Vec::new();
        for (day, &hours) in hours_per_day.iter().enumerate() {
            for h in 0..hours {
                records.push(InteractionRecord {
                    timestamp: start + Duration::hours((day * 24 + h) as i64),
                    setpoint_c: 20.0,
                    readback_ok: true,
                    u_star: None,
                    p_hp_kw: 1.0,
                    p_bh_kw: 0.0,
                    t_true_c: 20.0,
                    t_return_c: 20.0,
                    t_local_c: 20.0,
                    t_out_c: -2.0,
                    i_sol_kw_m2: 0.0,
                    energy_kwh: 1.0,
                });
            }
        }
        InteractionLog { records }
    }

    #[test]
    fn twenty_hour_threshold_is_inclusive() {
        let log = make_log(&[19, 20, 24]);
        let days = filter_days(&log, 0, 20.0);
        assert_eq!(days.len(), 2);
        assert_eq!(days[0].operating_hours, 20.0);
        assert_eq!(days[1].operating_hours, 24.0);
    }

    #[test]
    fn constant_power_integrates_to_daily_energy() {
        let log = make_log(&[24]);
        let days = filter_days(&log, 0, 20.0);
        assert_eq!(days.len(), 1);
        assert!((days[0].e_e - 24.0).abs() < 1e-12);
        assert!((days[0].t_out_mean + 2.0).abs() < 1e-12);
    }

    #[test]
    fn timezone_offset_shifts_day_boundaries() {
        // 24 hours starting at 00:00 UTC, viewed from UTC-5, straddle two
        // local days (19 h + 5 h) — so nothing survives a 20 h filter.
        let log = make_log(&[24]);
        assert_eq!(filter_days(&log, -5, 20.0).len(), 0);
        assert_eq!(filter_days(&log, 0, 20.0).len(), 1);
    }
}
