//! Actuation-pathway fault injection.
//!
//! Two failure modes of the field deployments are modelled: a command drop
//! (the setpoint command never reaches the thermostat, so the previous
//! setpoint stays in force) and a sensor gap (telemetry is down entirely:
//! the controller sees a stale observation and its command is lost too).
//! Either way the read-back check fails for the affected hours.

use serde::{Deserialize, Serialize};

use super::PlantError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    CommandDrop,
    SensorGap,
}

/// Half-open hour-index window `[start_hour, end_hour)` relative to episode
/// start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultWindow {
    pub start_hour: usize,
    pub end_hour: usize,
    pub kind: FaultKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultSchedule {
    pub windows: Vec<FaultWindow>,
}

impl FaultSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        for w in &self.windows {
            if w.end_hour <= w.start_hour {
                return Err(PlantError::BadConfig(format!(
                    "fault window [{}, {}) is empty or reversed",
                    w.start_hour, w.end_hour
                )));
            }
        }
        for kind in [FaultKind::CommandDrop, FaultKind::SensorGap] {
            let mut spans: Vec<(usize, usize)> = self
                .windows
                .iter()
                .filter(|w| w.kind == kind)
                .map(|w| (w.start_hour, w.end_hour))
                .collect();
            spans.sort_unstable();
            for pair in spans.windows(2) {
                if pair[1].0 < pair[0].1 {
                    return Err(PlantError::BadConfig(format!(
                        "overlapping {kind:?} windows at hour {}",
                        pair[1].0
                    )));
                }
            }
        }
        Ok(())
    }

    fn active(&self, hour: usize, kind: FaultKind) -> bool {
        self.windows
            .iter()
            .any(|w| w.kind == kind && (w.start_hour..w.end_hour).contains(&hour))
    }

    /// The command cannot be delivered this hour (either fault kind).
    pub fn command_blocked(&self, hour: usize) -> bool {
        self.active(hour, FaultKind::CommandDrop) || self.active(hour, FaultKind::SensorGap)
    }

    /// Fresh sensor telemetry is unavailable this hour.
    pub fn sensor_gapped(&self, hour: usize) -> bool {
        self.active(hour, FaultKind::SensorGap)
    }

    /// Total faulted hours intersecting an episode of `hours` length.
    pub fn downtime_hours(&self, hours: usize) -> usize {
        (0..hours).filter(|&h| self.command_blocked(h)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_partition_hours() {
        let f = FaultSchedule {
            windows: vec![
                FaultWindow { start_hour: 10, end_hour: 12, kind: FaultKind::CommandDrop },
                FaultWindow { start_hour: 30, end_hour: 31, kind: FaultKind::SensorGap },
            ],
        };
        f.validate().unwrap();
        assert!(f.command_blocked(10));
        assert!(f.command_blocked(11));
        assert!(!f.command_blocked(12));
        assert!(f.command_blocked(30));
        assert!(f.sensor_gapped(30));
        assert!(!f.sensor_gapped(10));
        assert_eq!(f.downtime_hours(48), 3);
    }

    #[test]
    fn overlap_within_kind_rejected() {
        let f = FaultSchedule {
            windows: vec![
                FaultWindow { start_hour: 5, end_hour: 10, kind: FaultKind::CommandDrop },
                FaultWindow { start_hour: 8, end_hour: 12, kind: FaultKind::CommandDrop },
            ],
        };
        assert!(f.validate().is_err());
    }
}
