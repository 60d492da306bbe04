//! Hourly closed-loop episode: controller → (faults) → thermostat → plant.
//!
//! Each hour the controller observes the return-air temperature, decides a
//! setpoint, and the command passes through the fault schedule; on a blocked
//! hour the previous setpoint stays in force and the read-back flag goes
//! false. The thermostat then runs at substep resolution against its own
//! sensor while the plant integrates the true dynamics. Before the next
//! decision the controller is told the outcome of the step; a transition is
//! marked valid only if its command was confirmed *and* the follow-up
//! observation is fresh. Local midnights fire the end-of-day hook.
//!
//! The random stream consumes the same number of draws every hour whatever
//! the fault schedule does, so runs with different fault schedules share
//! identical sensor noise.

use chrono::Timelike;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::controllers::{
    command_setpoint, quantize_setpoint, DecisionContext, SetpointSchedule, SupervisoryController,
    PowerBounds, StepOutcome,
};
use crate::thermal::Disturbance;

use super::{
    thermostat_step, FaultSchedule, InteractionLog, InteractionRecord, PlantConfig, PlantError,
    Stage, WeatherPoint,
};

#[derive(Debug, Clone)]
pub struct EpisodeSetup<'a> {
    pub plant: &'a PlantConfig,
    pub weather: &'a [WeatherPoint],
    pub schedule: &'a SetpointSchedule,
    pub faults: &'a FaultSchedule,
    /// Controller lookahead, hours.
    pub horizon: usize,
    /// Site timezone as a fixed UTC offset, hours.
    pub tz_offset_hours: i32,
    /// Seeds the sensor noise streams.
    pub seed: u64,
}

impl EpisodeSetup<'_> {
    fn local_hour(&self, w: &WeatherPoint) -> u32 {
        ((w.timestamp.hour() as i32 + self.tz_offset_hours).rem_euclid(24)) as u32
    }
}

/// Run one deployment episode. The log covers every hour of the weather
/// trace; the same seed reproduces the log bit for bit.
pub fn run_episode(
    controller: &mut dyn SupervisoryController,
    setup: &EpisodeSetup,
) -> Result<InteractionLog, PlantError> {
    let cfg = setup.plant;
    cfg.validate()?;
    setup.faults.validate()?;
    setup
        .schedule
        .validate()
        .map_err(|e| PlantError::BadConfig(e.to_string()))?;
    if setup.horizon == 0 {
        return Err(PlantError::BadConfig("horizon must be at least 1".into()));
    }
    if setup.weather.is_empty() {
        return Err(PlantError::TraceTooShort { trace_hours: 0, needed: 1 });
    }
    for (i, pair) in setup.weather.windows(2).enumerate() {
        if pair[1].timestamp - pair[0].timestamp != chrono::Duration::hours(1) {
            return Err(PlantError::NonMonotoneTimestamp { line: i + 1 });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let mut draw = move |sigma: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        sigma * z
    };

    let hours = setup.weather.len();
    let n_sub = (3600 / cfg.substep_s) as usize;
    let h_sub = cfg.substep_s as f64 / 3600.0;
    let bounds = PowerBounds::new(cfg.hp_capacity_kw, cfg.bh_capacity_kw);

    let mut x_true = cfg.initial_temp_c;
    let mut stage = Stage::Off;
    let mut active_setpoint =
        command_setpoint(setup.schedule.target_at(setup.local_hour(&setup.weather[0])));
    let mut last_obs = cfg.initial_temp_c + cfg.return_sensor.offset_c;
    let mut prev_readback = true;
    let mut records = Vec::with_capacity(hours);

    for t in 0..hours {
        let w = &setup.weather[t];
        let local_hour = setup.local_hour(w);

        // Fresh observation is always drawn to keep the noise stream aligned
        // across fault scenarios.
        let fresh = x_true + cfg.return_sensor.offset_c + draw(cfg.return_sensor.noise_sigma_c);
        let gapped = setup.faults.sensor_gapped(t);
        let obs = if gapped { last_obs } else { fresh };
        if !gapped {
            last_obs = fresh;
        }

        if t > 0 {
            controller.notify_outcome(&StepOutcome {
                step: t - 1,
                x_next_observed: obs,
                readback_ok: prev_readback && !gapped,
            })?;
            if local_hour == 0 {
                controller.end_of_day()?;
            }
        }

        // Forecast for the horizon, holding the final point past trace end.
        let mut forecast = Vec::with_capacity(setup.horizon);
        for k in 0..setup.horizon {
            forecast.push(*setup.weather.get(t + k).unwrap_or(&setup.weather[hours - 1]));
        }
        let targets = setup.schedule.targets_from(local_hour, setup.horizon);

        let decision = controller.decide(&DecisionContext {
            step: t,
            local_hour,
            observed_temp: obs,
            target_now: setup.schedule.target_at(local_hour),
            forecast: &forecast,
            targets: &targets,
            bounds,
        })?;

        let blocked = setup.faults.command_blocked(t);
        if !blocked {
            active_setpoint = decision.setpoint_command;
        }
        prev_readback = !blocked;

        // Substepped actuation + integration over the hour.
        let gains = cfg.internal_gains.at_local_hour(local_hour);
        let t_start = x_true;
        let mut t_local_first = f64::NAN;
        let mut e_hp = 0.0;
        let mut e_bh = 0.0;
        let d = Disturbance { t_mass: cfg.true_params.t_mass, t_out: w.t_out, i_sol: w.i_sol };
        for i in 0..n_sub {
            let local_raw =
                x_true + cfg.local_sensor.offset_c + draw(cfg.local_sensor.noise_sigma_c);
            let local_q = quantize_setpoint(local_raw);
            if i == 0 {
                t_local_first = local_q;
            }
            let (powers, next_stage) = thermostat_step(cfg, active_setpoint, local_q, stage);
            stage = next_stage;
            let rhs = crate::thermal::continuous_rhs(&cfg.true_params, &cfg.cop, x_true, powers, &d)
                + gains / cfg.true_params.capacitance;
            x_true += h_sub * rhs;
            e_hp += powers[0] * h_sub;
            e_bh += powers[1] * h_sub;
        }

        records.push(InteractionRecord {
            timestamp: w.timestamp,
            setpoint_c: active_setpoint,
            readback_ok: !blocked,
            u_star: decision.u_star,
            p_hp_kw: e_hp, // Δt = 1 h: mean power equals energy
            p_bh_kw: e_bh,
            t_true_c: t_start,
            t_return_c: obs,
            t_local_c: t_local_first,
            t_out_c: w.t_out,
            i_sol_kw_m2: w.i_sol,
            energy_kwh: e_hp + e_bh,
        });
    }

    // Close out the final step. No hour-end observation exists beyond the
    // trace, so the final transition is never admitted to learning buffers;
    // periodic updates that need no plant feedback still run.
    controller.notify_outcome(&StepOutcome {
        step: hours - 1,
        x_next_observed: last_obs,
        readback_ok: false,
    })?;
    let end_local_hour =
        (setup.local_hour(&setup.weather[hours - 1]) + 1) % 24;
    if end_local_hour == 0 {
        controller.end_of_day()?;
    }

    Ok(InteractionLog { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::BaselineController;
    use crate::plant::{synthesize_weather, ClimatePreset, FaultKind, FaultWindow};

    fn setup_week() -> (PlantConfig, Vec<WeatherPoint>, SetpointSchedule, FaultSchedule) {
        (
            PlantConfig::default(),
            synthesize_weather(7, 5, ClimatePreset::MidwestWinter),
            SetpointSchedule::default(),
            FaultSchedule::none(),
        )
    }

    #[test]
    fn baseline_week_logs_168_hours_of_21() {
        let (plant, weather, schedule, faults) = setup_week();
        let mut c = BaselineController::default();
        let log = run_episode(
            &mut c,
            &EpisodeSetup {
                plant: &plant,
                weather: &weather,
                schedule: &schedule,
                faults: &faults,
                horizon: 24,
                tz_offset_hours: 0,
                seed: 9,
            },
        )
        .unwrap();
        assert_eq!(log.len(), 168);
        assert!(log.records.iter().all(|r| r.setpoint_c == 21.0 && r.readback_ok));
    }

    #[test]
    fn command_drop_keeps_previous_setpoint() {
        let (plant, weather, schedule, _) = setup_week();
        let faults = FaultSchedule {
            windows: vec![FaultWindow { start_hour: 10, end_hour: 11, kind: FaultKind::CommandDrop }],
        };
        // A controller that changes its command every hour, to make the held
        // setpoint observable.
        struct Wanderer;
        impl SupervisoryController for Wanderer {
            fn decide(
                &mut self,
                ctx: &DecisionContext,
            ) -> Result<crate::controllers::ControllerDecision, crate::controllers::ControlError>
            {
                Ok(crate::controllers::ControllerDecision {
                    u_star: None,
                    x_next_pred: None,
                    setpoint_command: command_setpoint(15.0 + (ctx.step % 10) as f64 * 0.5),
                    diagnostics: Default::default(),
                })
            }
            fn name(&self) -> &'static str {
                "wanderer"
            }
        }
        let mut c = Wanderer;
        let log = run_episode(
            &mut c,
            &EpisodeSetup {
                plant: &plant,
                weather: &weather,
                schedule: &schedule,
                faults: &faults,
                horizon: 4,
                tz_offset_hours: 0,
                seed: 9,
            },
        )
        .unwrap();
        assert!(!log.records[10].readback_ok);
        assert_eq!(log.records[10].setpoint_c, log.records[9].setpoint_c);
        assert!(log.records[11].readback_ok);
    }

    #[test]
    fn identical_seeds_give_bit_identical_logs() {
        let (plant, weather, schedule, faults) = setup_week();
        let run = || {
            let mut c = BaselineController::default();
            run_episode(
                &mut c,
                &EpisodeSetup {
                    plant: &plant,
                    weather: &weather,
                    schedule: &schedule,
                    faults: &faults,
                    horizon: 24,
                    tz_offset_hours: 0,
                    seed: 77,
                },
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn energy_accounting_is_exact() {
        let (plant, weather, schedule, faults) = setup_week();
        let mut c = BaselineController::default();
        let log = run_episode(
            &mut c,
            &EpisodeSetup {
                plant: &plant,
                weather: &weather,
                schedule: &schedule,
                faults: &faults,
                horizon: 24,
                tz_offset_hours: 0,
                seed: 1,
            },
        )
        .unwrap();
        let total: f64 = log.records.iter().map(|r| r.energy_kwh).sum();
        let by_power: f64 = log.records.iter().map(|r| r.p_hp_kw + r.p_bh_kw).sum();
        assert!((total - by_power).abs() < 1e-9);
        for r in &log.records {
            assert!((r.energy_kwh - (r.p_hp_kw + r.p_bh_kw)).abs() < 1e-9);
        }
        // The house actually heated: some energy was spent in a winter week.
        assert!(total > 10.0);
    }
}
