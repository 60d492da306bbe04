//! Two-stage hysteretic thermostat.
//!
//! Heating engages when the (quantized) local reading falls below
//! `setpoint - deadband` and releases above `setpoint + deadband`; in
//! between the previous stage persists. While heating, backup resistance
//! heat stages in whenever the local reading lags the setpoint by at least
//! `stage2_gap`. Backup heat never runs with the heat pump off.

use serde::{Deserialize, Serialize};

use super::PlantConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Off,
    /// Heat pump only.
    Stage1,
    /// Heat pump plus backup resistance heat.
    Stage2,
}

impl Stage {
    pub fn heating(self) -> bool {
        self != Stage::Off
    }
}

/// One thermostat evaluation. `local_temp` is the thermostat's own reading
/// (already offset, noisy, and quantized). Returns delivered powers and the
/// stage.
pub fn thermostat_step(
    cfg: &PlantConfig,
    setpoint: f64,
    local_temp: f64,
    prev: Stage,
) -> ([f64; 2], Stage) {
    let heating = if local_temp < setpoint - cfg.deadband_c {
        true
    } else if local_temp > setpoint + cfg.deadband_c {
        false
    } else {
        prev.heating()
    };
    if !heating {
        return ([0.0, 0.0], Stage::Off);
    }
    if setpoint - local_temp >= cfg.stage2_gap_c {
        ([cfg.hp_capacity_kw, cfg.bh_capacity_kw], Stage::Stage2)
    } else {
        ([cfg.hp_capacity_kw, 0.0], Stage::Stage1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PlantConfig {
        PlantConfig::default() // deadband 0.25, stage2 gap 2.0, hp 4.2, bh 10.0
    }

    #[test]
    fn inside_deadband_stays_off() {
        let (p, stage) = thermostat_step(&cfg(), 20.0, 20.0, Stage::Off);
        assert_eq!(p, [0.0, 0.0]);
        assert_eq!(stage, Stage::Off);
    }

    #[test]
    fn cold_room_engages_stage_one() {
        let (p, stage) = thermostat_step(&cfg(), 20.0, 19.0, Stage::Off);
        assert_eq!(p, [4.2, 0.0]);
        assert_eq!(stage, Stage::Stage1);
    }

    #[test]
    fn deep_deficit_stages_backup() {
        let (p, stage) = thermostat_step(&cfg(), 21.0, 18.5, Stage::Off);
        assert_eq!(p, [4.2, 10.0]);
        assert_eq!(stage, Stage::Stage2);
    }

    #[test]
    fn rule_table_over_gap_and_previous_stage() {
        // Enumerate (gap to setpoint, previous stage) cells against the
        // hysteresis + staging rules spelled out in the module docs.
        let c = cfg();
        let setpoint = 20.0;
        for &prev in &[Stage::Off, Stage::Stage1, Stage::Stage2] {
            for gap_steps in -8i32..=10 {
                let gap = gap_steps as f64 * 0.5; // setpoint - local
                let local = setpoint - gap;
                let expect_heating = if local < setpoint - c.deadband_c {
                    true
                } else if local > setpoint + c.deadband_c {
                    false
                } else {
                    prev.heating()
                };
                let expect = if !expect_heating {
                    ([0.0, 0.0], Stage::Off)
                } else if gap >= c.stage2_gap_c {
                    ([c.hp_capacity_kw, c.bh_capacity_kw], Stage::Stage2)
                } else {
                    ([c.hp_capacity_kw, 0.0], Stage::Stage1)
                };
                let got = thermostat_step(&c, setpoint, local, prev);
                assert_eq!(got, expect, "gap {gap} prev {prev:?}");
            }
        }
    }

    #[test]
    fn backup_never_runs_alone() {
        let c = cfg();
        for gap_steps in -10i32..=20 {
            let local = 20.0 - gap_steps as f64 * 0.25;
            for &prev in &[Stage::Off, Stage::Stage1, Stage::Stage2] {
                let ([hp, bh], _) = thermostat_step(&c, 20.0, local, prev);
                if bh > 0.0 {
                    assert!(hp > 0.0);
                }
            }
        }
    }

    #[test]
    fn hysteresis_holds_previous_state_in_band() {
        let c = cfg();
        // Within the deadband: previously heating keeps heating.
        let (p, stage) = thermostat_step(&c, 20.0, 20.1, Stage::Stage1);
        assert_eq!(stage, Stage::Stage1);
        assert_eq!(p, [4.2, 0.0]);
        // And previously off stays off.
        let (p, stage) = thermostat_step(&c, 20.0, 19.9, Stage::Off);
        assert_eq!(stage, Stage::Off);
        assert_eq!(p, [0.0, 0.0]);
    }
}
