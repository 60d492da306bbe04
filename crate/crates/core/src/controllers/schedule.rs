//! Occupant setpoint schedule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("schedule must contain at least one entry")]
    Empty,
    #[error("schedule hours must be strictly increasing within [0, 24), got {0}")]
    BadHour(u32),
    #[error("schedule target {0} outside the [10, 30] °C sanity band")]
    TargetOutOfBand(f64),
}

/// Ordered (start hour-of-day, target °C) entries; each entry holds until the
/// next one, wrapping across midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetpointSchedule {
    pub entries: Vec<(u32, f64)>,
}

impl Default for SetpointSchedule {
    /// 18 °C overnight, 20 °C through the occupied day.
    fn default() -> Self {
        Self { entries: vec![(0, 18.0), (7, 20.0), (23, 18.0)] }
    }
}

impl SetpointSchedule {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.entries.is_empty() {
            return Err(ScheduleError::Empty);
        }
        let mut prev: Option<u32> = None;
        for &(h, target) in &self.entries {
            if h >= 24 || prev.is_some_and(|p| h <= p) {
                return Err(ScheduleError::BadHour(h));
            }
            if !(10.0..=30.0).contains(&target) {
                return Err(ScheduleError::TargetOutOfBand(target));
            }
            prev = Some(h);
        }
        Ok(())
    }

    /// Target for a given local hour of day.
    pub fn target_at(&self, hour: u32) -> f64 {
        let hour = hour % 24;
        let mut target = self.entries.last().map(|e| e.1).unwrap_or(20.0);
        for &(h, t) in &self.entries {
            if h <= hour {
                target = t;
            }
        }
        target
    }

    /// Targets for the `len` hours following `hour` (i.e. for states
    /// x_{t+1}..x_{t+len} when `hour` is the hour of step t).
    pub fn targets_from(&self, hour: u32, len: usize) -> Vec<f64> {
        (1..=len as u32).map(|k| self.target_at(hour + k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_tracks_paperlike_day() {
        let s = SetpointSchedule::default();
        assert_eq!(s.target_at(0), 18.0);
        assert_eq!(s.target_at(6), 18.0);
        assert_eq!(s.target_at(7), 20.0);
        assert_eq!(s.target_at(22), 20.0);
        assert_eq!(s.target_at(23), 18.0);
    }

    #[test]
    fn wraps_across_midnight() {
        let s = SetpointSchedule { entries: vec![(6, 19.0), (22, 17.0)] };
        assert_eq!(s.target_at(2), 17.0); // last entry wraps
        assert_eq!(s.target_at(8), 19.0);
    }

    #[test]
    fn validation_catches_misordered_hours() {
        let s = SetpointSchedule { entries: vec![(5, 19.0), (5, 20.0)] };
        assert_eq!(s.validate(), Err(ScheduleError::BadHour(5)));
        let s = SetpointSchedule { entries: vec![(25, 19.0)] };
        assert_eq!(s.validate(), Err(ScheduleError::BadHour(25)));
        let s = SetpointSchedule { entries: vec![(1, 9.0)] };
        assert_eq!(s.validate(), Err(ScheduleError::TargetOutOfBand(9.0)));
    }
}
