//! End-to-end commands: identification, pretraining, deployment, comparison.

use std::path::Path;
use std::time::Instant;

use chrono::Timelike;

use crate::analysis::{
    auc_energy, balance_temperature, filter_days, fit_curve_csv, fit_signature,
    monte_carlo_savings, ppd_stats, ComparisonReport, ControllerAnalysis, SignatureKind,
    TempColumn,
};
use crate::controllers::{
    gain_features, imitation_pretrain, BaselineController, ExogenousGainModel, IbexController,
    ImitationSample, MpcController, MpcModel, PowerBounds, SteadyStateFilter,
    SupervisoryController,
};
use crate::plant::{
    load_weather_csv, run_episode, synthesize_weather, EpisodeSetup, InteractionLog, WeatherPoint,
};
use crate::thermal::{zoh_phi, Disturbance, PhysicalParams};

use super::checkpoint::{Checkpoint, CheckpointKind, GridResult, IdentifyReport, CHECKPOINT_VERSION};
use super::config::{ControllerChoice, ExperimentConfig, WeatherSource};
use super::manifest::RunManifest;
use super::{write_atomic, ExperimentError};

/// Resolve the configured weather source into an hourly trace.
pub fn load_weather(config: &ExperimentConfig) -> Result<Vec<WeatherPoint>, ExperimentError> {
    match &config.weather {
        WeatherSource::File { path } => Ok(load_weather_csv(path)?),
        WeatherSource::Synthetic { days, preset } => {
            Ok(synthesize_weather(*days, config.weather_seed(), *preset))
        }
    }
}

fn local_hour(ts: chrono::DateTime<chrono::Utc>, tz_offset_hours: i32) -> u32 {
    ((ts.hour() as i32 + tz_offset_hours).rem_euclid(24)) as u32
}

fn ensure_dir(out_dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|source| ExperimentError::Io { path: out_dir.display().to_string(), source })
}

fn require_history(history: &InteractionLog, days: usize) -> Result<(), ExperimentError> {
    if history.len() < days * 24 {
        return Err(ExperimentError::Data(format!(
            "insufficient history: {} hours, need at least {} days",
            history.len(),
            days
        )));
    }
    Ok(())
}

/// Offline phase of the engineered controller: sequential identification of
/// the thermal parameters plus the exogenous-gain regressor, with a held-out
/// one-step fit report.
pub fn cmd_identify(
    config: &ExperimentConfig,
    history: &InteractionLog,
    out_dir: &Path,
) -> Result<Checkpoint, ExperimentError> {
    let started = Instant::now();
    config.validate()?;
    require_history(history, 7)?;
    ensure_dir(out_dir)?;

    // Deep-mass temperature pinned to the historical indoor mean.
    let t_mass = history.records.iter().map(|r| r.t_return_c).sum::<f64>()
        / history.len() as f64;

    let filter = SteadyStateFilter { max_drift_c: config.identify.steady_max_drift_c };
    let steady = filter.steady_samples(history, &config.cop);
    let r_out = crate::controllers::estimate_r_out(&steady)?;
    let transients = filter.transient_samples(history, &config.cop);
    let (r_mass, capacitance) =
        crate::controllers::fit_rm_c(&transients, r_out, t_mass, &config.identify.r_mass_grid)?;

    let params = PhysicalParams {
        capacitance,
        r_mass,
        r_out,
        t_mass,
        eta_backup: 1.0,
        a_eff: 0.0,
    };

    // Exogenous-gain targets: the heat the identified model cannot explain,
    // hour by hour. Wind comes from the weather trace when timestamps match.
    let weather = load_weather(config).ok();
    let wind_at = |ts: chrono::DateTime<chrono::Utc>| -> f64 {
        weather
            .as_ref()
            .and_then(|w| w.iter().find(|p| p.timestamp == ts))
            .map(|p| p.wind)
            .unwrap_or(0.0)
    };

    let mut train_feats = Vec::new();
    let mut train_gains = Vec::new();
    let mut held_out = Vec::new();
    for (i, pair) in history.records.windows(2).enumerate() {
        let r = &pair[0];
        let q_c = config.cop.at(r.t_out_c) * r.p_hp_kw + r.p_bh_kw;
        let gain = crate::controllers::implied_exogenous_gain(
            &params,
            r.t_return_c,
            pair[1].t_return_c,
            r.t_out_c,
            q_c,
        );
        let feats = gain_features(
            r.t_out_c,
            r.i_sol_kw_m2,
            wind_at(r.timestamp),
            local_hour(r.timestamp, config.site.tz_offset_hours),
        );
        if i % 4 == 3 {
            held_out.push((feats, r.t_return_c, pair[1].t_return_c, r.t_out_c, q_c));
        } else {
            train_feats.push(feats);
            train_gains.push(gain);
        }
    }
    let qe_model = ExogenousGainModel::fit(&train_feats, &train_gains, config.identify.kernel)?;

    // Held-out one-step RMSE with the gain forecast in the loop.
    let g = 1.0 / params.r_mass + 1.0 / params.r_out;
    let a_c = -g / params.capacitance;
    let a = a_c.exp();
    let phi = zoh_phi(a_c, 1.0);
    let mut sq = 0.0;
    for (feats, t_in, t_next, t_out, q_c) in &held_out {
        let q_e = qe_model.predict_features(feats);
        let pred = a * t_in
            + (phi / params.capacitance)
                * (params.t_mass / params.r_mass + t_out / params.r_out + q_c + q_e);
        sq += (pred - t_next).powi(2);
    }
    let held_out_rmse_c = if held_out.is_empty() { 0.0 } else { (sq / held_out.len() as f64).sqrt() };

    let report = IdentifyReport {
        steady_samples: steady.len(),
        transient_samples: transients.len(),
        held_out_rmse_c,
        gain_rmse_kw: qe_model.training_rmse_kw,
    };
    let ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        params,
        cost: None,
        cop: config.cop,
        kind: CheckpointKind::Mpc { qe_model: Some(qe_model), report: report.clone() },
    };
    ckpt.save(&out_dir.join("checkpoint-mpc.json"))?;
    write_atomic(
        &out_dir.join("identify-report.txt"),
        &format!(
            "identified 2R1C model\n  R_out = {:.6} °C/kW\n  R_m   = {:.6} °C/kW\n  C     = {:.6e} J/°C\n  T_m   = {:.3} °C\nsteady samples: {}\ntransient samples: {}\nheld-out one-step RMSE: {:.4} °C\ngain regressor RMSE: {:.4} kW\n",
            r_out,
            r_mass,
            capacitance * crate::thermal::J_PER_KWH,
            t_mass,
            report.steady_samples,
            report.transient_samples,
            report.held_out_rmse_c,
            report.gain_rmse_kw,
        ),
    )?;
    finish_manifest(config, "identify", out_dir, started, vec![
        "checkpoint-mpc.json".into(),
        "identify-report.txt".into(),
    ], None)?;
    Ok(ckpt)
}

/// Offline phase of the learning controller: imitation over the hyper grid,
/// selecting the lowest action loss.
pub fn cmd_pretrain(
    config: &ExperimentConfig,
    history: &InteractionLog,
    out_dir: &Path,
) -> Result<Checkpoint, ExperimentError> {
    let started = Instant::now();
    config.validate()?;
    require_history(history, 7)?;
    ensure_dir(out_dir)?;

    let horizon = config.horizon;
    if history.len() <= horizon + 1 {
        return Err(ExperimentError::Data("history shorter than one horizon".into()));
    }
    let tz = config.site.tz_offset_hours;
    let t_mass0 = config.pretrain.init_params.t_mass;
    let mut dataset = Vec::new();
    for t in 0..history.len() - horizon {
        let rows = &history.records[t..t + horizon];
        let disturbances: Vec<Disturbance> = rows
            .iter()
            .map(|r| Disturbance { t_mass: t_mass0, t_out: r.t_out_c, i_sol: r.i_sol_kw_m2 })
            .collect();
        let targets = config
            .site
            .schedule
            .targets_from(local_hour(rows[0].timestamp, tz), horizon);
        dataset.push(ImitationSample {
            x_t: rows[0].t_return_c,
            u_expert: [rows[0].p_hp_kw, rows[0].p_bh_kw],
            x_next: history.records[t + 1].t_return_c,
            disturbances,
            targets,
        });
    }

    let bounds = PowerBounds::new(config.site.hp_max_kw, config.site.bh_max_kw);
    let solver_cfg = crate::solver::SolverConfig::default();
    let mut grid = Vec::new();
    let mut best: Option<(f64, crate::controllers::PretrainOutcome, usize)> = None;
    for &alpha in &config.pretrain.alphas {
        for &lambda in &config.pretrain.lambdas {
            let hyper = crate::controllers::IbexHyper {
                alpha_imit: alpha,
                lambda,
                ..config.pretrain.hyper
            };
            match imitation_pretrain(
                &dataset,
                &hyper,
                &config.pretrain.init_params,
                &config.pretrain.init_cost,
                &config.cop,
                &bounds,
                &solver_cfg,
                config.seed,
            ) {
                Ok(outcome) => {
                    let last = outcome.history.last().expect("at least one epoch");
                    let idx = grid.len();
                    grid.push(GridResult {
                        alpha_imit: alpha,
                        lambda,
                        final_state_loss: last.state_loss,
                        final_action_loss: last.action_loss,
                        diverged: false,
                        selected: false,
                    });
                    if best.as_ref().map_or(true, |(l, _, _)| last.action_loss < *l) {
                        best = Some((last.action_loss, outcome, idx));
                    }
                }
                Err(crate::controllers::ControlError::Diverged { loss, .. }) => {
                    grid.push(GridResult {
                        alpha_imit: alpha,
                        lambda,
                        final_state_loss: f64::INFINITY,
                        final_action_loss: loss,
                        diverged: true,
                        selected: false,
                    });
                }
                Err(other) => return Err(other.into()),
            }
        }
    }
    let Some((_, outcome, best_idx)) = best else {
        return Err(ExperimentError::Numerical(
            "imitation diverged on every hyperparameter grid point".into(),
        ));
    };
    grid[best_idx].selected = true;

    let selected_hyper = crate::controllers::IbexHyper {
        alpha_imit: grid[best_idx].alpha_imit,
        lambda: grid[best_idx].lambda,
        ..config.pretrain.hyper
    };
    let ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        params: outcome.params,
        cost: Some(outcome.cost),
        cop: config.cop,
        kind: CheckpointKind::Ibex {
            hyper: selected_hyper,
            grid,
            history: outcome.history.clone(),
        },
    };
    ckpt.save(&out_dir.join("checkpoint-ibex.json"))?;

    let mut curves = String::from("epoch,state_loss,action_loss,imitation_loss\n");
    for h in &outcome.history {
        curves.push_str(&format!(
            "{},{:.9},{:.9},{:.9}\n",
            h.epoch, h.state_loss, h.action_loss, h.imitation_loss
        ));
    }
    write_atomic(&out_dir.join("loss-curves.csv"), &curves)?;
    finish_manifest(config, "pretrain", out_dir, started, vec![
        "checkpoint-ibex.json".into(),
        "loss-curves.csv".into(),
    ], None)?;
    Ok(ckpt)
}

#[derive(Debug)]
pub struct DeployOutput {
    pub log: InteractionLog,
    pub manifest: RunManifest,
    /// Final learned parameters for the adaptive controller.
    pub final_checkpoint: Option<Checkpoint>,
}

/// Run one deployment episode with the configured controller.
pub fn cmd_deploy(
    config: &ExperimentConfig,
    checkpoint: Option<&Checkpoint>,
    out_dir: &Path,
) -> Result<DeployOutput, ExperimentError> {
    let started = Instant::now();
    config.validate()?;
    ensure_dir(out_dir)?;
    let weather = load_weather(config)?;

    enum Built {
        Baseline(BaselineController),
        Mpc(MpcController),
        Ibex(IbexController),
    }
    let mut built = match &config.controller {
        ControllerChoice::Baseline { setpoint_c, follow_schedule } => {
            Built::Baseline(BaselineController {
                setpoint: *setpoint_c,
                follow_schedule: *follow_schedule,
            })
        }
        ControllerChoice::Mpc { weights, w_c_candidates, ppd_target, day_scale, night_scale } => {
            let ckpt = checkpoint.ok_or_else(|| {
                ExperimentError::Config("mpc deployment requires an identification checkpoint".into())
            })?;
            let qe_model = match &ckpt.kind {
                CheckpointKind::Mpc { qe_model, .. } => qe_model.clone(),
                _ => None,
            };
            let model = MpcModel { params: ckpt.params, curve: ckpt.cop, qe_model };
            let mut c = MpcController::new(model, *weights);
            c.candidates = w_c_candidates.clone();
            c.ppd_target = *ppd_target;
            c.day_scale = *day_scale;
            c.night_scale = *night_scale;
            c.assumptions = config.analysis.assumptions;
            Built::Mpc(c)
        }
        ControllerChoice::Ibex { hyper, weights } => {
            let ckpt = checkpoint.ok_or_else(|| {
                ExperimentError::Config("learning deployment requires a pretraining checkpoint".into())
            })?;
            let cost = ckpt.cost.ok_or_else(|| {
                ExperimentError::Config("checkpoint carries no cost parameters".into())
            })?;
            Built::Ibex(IbexController::new(ckpt.params, cost, ckpt.cop, *hyper, *weights))
        }
    };

    let setup = EpisodeSetup {
        plant: &config.plant,
        weather: &weather,
        schedule: &config.site.schedule,
        faults: &config.faults,
        horizon: config.horizon,
        tz_offset_hours: config.site.tz_offset_hours,
        seed: config.episode_seed(),
    };
    let controller: &mut dyn SupervisoryController = match &mut built {
        Built::Baseline(c) => c,
        Built::Mpc(c) => c,
        Built::Ibex(c) => c,
    };
    let log = run_episode(controller, &setup)?;
    log.save_csv(&out_dir.join("log.csv"))?;

    let mut produced = vec!["log.csv".to_string()];
    let final_checkpoint = if let Built::Ibex(c) = &built {
        let snaps = serde_json::to_string_pretty(&c.param_history)
            .map_err(|e| ExperimentError::Data(e.to_string()))?;
        write_atomic(&out_dir.join("daily-params.json"), &snaps)?;
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            params: c.params,
            cost: Some(c.cost),
            cop: c.curve,
            kind: CheckpointKind::Ibex {
                hyper: c.hyper,
                grid: Vec::new(),
                history: Vec::new(),
            },
        };
        ckpt.save(&out_dir.join("checkpoint-final.json"))?;
        produced.push("daily-params.json".into());
        produced.push("checkpoint-final.json".into());
        Some(ckpt)
    } else {
        None
    };

    let downtime = config.faults.downtime_hours(weather.len());
    let manifest = finish_manifest(
        config,
        "deploy",
        out_dir,
        started,
        produced,
        Some(downtime),
    )?;
    Ok(DeployOutput { log, manifest, final_checkpoint })
}

/// Compare one or more controller logs against a baseline log.
pub fn cmd_compare(
    config: &ExperimentConfig,
    logs: &[(String, InteractionLog)],
    out_dir: &Path,
) -> Result<ComparisonReport, ExperimentError> {
    let started = Instant::now();
    config.validate()?;
    if logs.len() < 2 {
        return Err(ExperimentError::Config("compare needs a baseline plus at least one log".into()));
    }
    ensure_dir(out_dir)?;
    let opts = &config.analysis;
    let tz = config.site.tz_offset_hours;

    let mut warnings = Vec::new();
    let mut day_sets = Vec::new();
    for (name, log) in logs {
        let days = filter_days(log, tz, opts.min_operating_hours);
        if days.len() < 3 {
            return Err(ExperimentError::Data(format!(
                "log `{name}` retains only {} days after filtering",
                days.len()
            )));
        }
        day_sets.push(days);
    }

    // Common outdoor-temperature support across all logs.
    let mut support = (f64::NEG_INFINITY, f64::INFINITY);
    for days in &day_sets {
        let lo = days.iter().map(|d| d.t_out_mean).fold(f64::INFINITY, f64::min);
        let hi = days.iter().map(|d| d.t_out_mean).fold(f64::NEG_INFINITY, f64::max);
        support.0 = support.0.max(lo);
        support.1 = support.1.min(hi);
    }
    if support.0 >= support.1 {
        warnings.push(format!(
            "logs have disjoint outdoor-temperature support; comparison extrapolates (usable interval empty, configured [{}, {}])",
            opts.outdoor_interval.0, opts.outdoor_interval.1
        ));
    } else if opts.outdoor_interval.0 < support.0 - 3.0 || opts.outdoor_interval.1 > support.1 + 3.0
    {
        warnings.push(format!(
            "configured interval [{}, {}] extends well beyond the common data support [{:.2}, {:.2}]",
            opts.outdoor_interval.0, opts.outdoor_interval.1, support.0, support.1
        ));
    }

    let mut entries = Vec::new();
    let mut produced = Vec::new();
    let mut baseline_fits: Option<(crate::analysis::SignatureFit, crate::analysis::SignatureFit)> =
        None;
    for ((name, log), days) in logs.iter().zip(&day_sets) {
        let fit_outdoor = fit_signature(days, &config.cop, SignatureKind::Outdoor)?;
        let fit_delta = fit_signature(days, &config.cop, SignatureKind::Delta)?;
        let auc_outdoor =
            auc_energy(&fit_outdoor, &config.cop, opts.outdoor_interval, opts.quad_step)?;
        let auc_delta = auc_energy(&fit_delta, &config.cop, opts.delta_interval, opts.quad_step)?;
        let balance_temp = balance_temperature(&fit_outdoor)?;
        let ppd_return = ppd_stats(log, &opts.assumptions, TempColumn::ReturnAir, tz)?;
        let ppd_local = ppd_stats(log, &opts.assumptions, TempColumn::ThermostatLocal, tz)?;

        let (savings_outdoor, savings_delta) = match &baseline_fits {
            None => {
                baseline_fits = Some((fit_outdoor, fit_delta));
                (None, None)
            }
            Some((base_o, base_d)) => {
                let o = monte_carlo_savings(
                    base_o,
                    &fit_outdoor,
                    &config.cop,
                    opts.outdoor_interval,
                    opts.quad_step,
                    opts.mc_samples,
                    config.mc_seed(),
                )?;
                let d = monte_carlo_savings(
                    base_d,
                    &fit_delta,
                    &config.cop,
                    opts.delta_interval,
                    opts.quad_step,
                    opts.mc_samples,
                    config.mc_seed().wrapping_add(1),
                )?;
                (Some(o), Some(d))
            }
        };

        let curve_o = fit_curve_csv(&fit_outdoor, &config.cop, opts.outdoor_interval);
        let curve_d = fit_curve_csv(&fit_delta, &config.cop, opts.delta_interval);
        let fo = format!("fit-outdoor-{name}.csv");
        let fd = format!("fit-delta-{name}.csv");
        write_atomic(&out_dir.join(&fo), &curve_o)?;
        write_atomic(&out_dir.join(&fd), &curve_d)?;
        produced.push(fo);
        produced.push(fd);

        entries.push(ControllerAnalysis {
            name: name.clone(),
            n_days: days.len(),
            fit_outdoor,
            fit_delta,
            auc_outdoor,
            auc_delta,
            balance_temp,
            ppd_return,
            ppd_local,
            savings_outdoor,
            savings_delta,
        });
    }

    let report = ComparisonReport {
        baseline_name: logs[0].0.clone(),
        entries,
        outdoor_interval: opts.outdoor_interval,
        delta_interval: opts.delta_interval,
        assumptions: opts.assumptions,
        mc_samples: opts.mc_samples,
        seed: config.mc_seed(),
        warnings,
    };
    write_atomic(&out_dir.join("report.txt"), &report.render_text())?;
    produced.push("report.txt".into());
    finish_manifest(config, "compare", out_dir, started, produced, None)?;
    Ok(report)
}

fn finish_manifest(
    config: &ExperimentConfig,
    command: &str,
    out_dir: &Path,
    started: Instant,
    mut produced: Vec<String>,
    downtime_hours: Option<usize>,
) -> Result<RunManifest, ExperimentError> {
    let config_text = config.to_toml()?;
    write_atomic(&out_dir.join("config.toml"), &config_text)?;
    produced.push("config.toml".into());
    produced.sort();
    let mut manifest = RunManifest::new(command, &config_text, config.seed);
    manifest.produced_files = produced;
    manifest.wall_clock_s = started.elapsed().as_secs_f64();
    manifest.downtime_hours = downtime_hours;
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}
