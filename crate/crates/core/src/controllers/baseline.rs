//! Baseline setpoint behaviour: what the house did before anyone optimized
//! anything. The thermostat's own logic decides the powers.

use super::{
    command_setpoint, ControlError, ControllerDecision, DecisionContext, DecisionDiagnostics,
    SupervisoryController,
};

#[derive(Debug, Clone)]
pub struct BaselineController {
    pub setpoint: f64,
    /// Follow the occupant schedule instead of the constant setpoint; this
    /// is the setback-driven behaviour histories are collected under.
    pub follow_schedule: bool,
}

impl Default for BaselineController {
    fn default() -> Self {
        Self { setpoint: 21.0, follow_schedule: false }
    }
}

impl BaselineController {
    pub fn scheduled() -> Self {
        Self { setpoint: 21.0, follow_schedule: true }
    }
}

impl SupervisoryController for BaselineController {
    fn decide(&mut self, ctx: &DecisionContext) -> Result<ControllerDecision, ControlError> {
        let sp = if self.follow_schedule { ctx.target_now } else { self.setpoint };
        Ok(ControllerDecision {
            u_star: None,
            x_next_pred: None,
            setpoint_command: command_setpoint(sp),
            diagnostics: DecisionDiagnostics::default(),
        })
    }

    fn name(&self) -> &'static str {
        "baseline"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::PowerBounds;

    fn ctx(hour: u32, target_now: f64) -> DecisionContext<'static> {
        DecisionContext {
            step: hour as usize,
            local_hour: hour,
            observed_temp: 19.0,
            target_now,
            forecast: &[],
            targets: &[],
            bounds: PowerBounds::new(4.2, 10.0),
        }
    }

    #[test]
    fn always_21_degrees() {
        let mut c = BaselineController::default();
        for hour in [3u32, 14] {
            let d = c.decide(&ctx(hour, 18.0)).unwrap();
            assert_eq!(d.setpoint_command, 21.0);
            assert!(d.u_star.is_none());
            assert!((d.setpoint_command * 2.0).fract() == 0.0);
        }
    }

    #[test]
    fn scheduled_variant_tracks_the_schedule() {
        let mut c = BaselineController::scheduled();
        assert_eq!(c.decide(&ctx(3, 18.0)).unwrap().setpoint_command, 18.0);
        assert_eq!(c.decide(&ctx(12, 20.0)).unwrap().setpoint_command, 20.0);
    }
}
