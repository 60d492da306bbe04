//! Command-line front end for the experiment pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hearth::experiment::{
    cmd_compare, cmd_deploy, cmd_identify, cmd_pretrain, Checkpoint, ExperimentConfig,
    ExperimentError,
};
use hearth::plant::{save_weather_csv, synthesize_weather, ClimatePreset, InteractionLog};

/// Environment variable naming the default data/output directory.
const DATA_DIR_ENV: &str = "HEARTH_DATA_DIR";

#[derive(Parser)]
#[command(
    name = "hearth",
    version,
    about = "Heat-pump supervisory control testbed: identify, pretrain, deploy, compare"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults under $HEARTH_DATA_DIR or the cwd.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the thermal model and exogenous-gain regressor from a history log.
    Identify {
        #[command(flatten)]
        common: Common,
        /// Historical interaction log (CSV).
        #[arg(long)]
        history: PathBuf,
    },
    /// Imitation pre-training of the learning controller over its hyper grid.
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        history: PathBuf,
    },
    /// Run a closed-loop deployment episode against the simulated house.
    Deploy {
        #[command(flatten)]
        common: Common,
        /// Checkpoint from `identify` (mpc) or `pretrain` (learning controller).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Analyze one or more deployment logs against a baseline log.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Baseline interaction log (CSV).
        #[arg(long)]
        baseline: PathBuf,
        /// Controller logs as name=path pairs; repeatable.
        #[arg(long = "log", value_parser = parse_named_log, required = true)]
        logs: Vec<(String, PathBuf)>,
    },
    /// Generate a synthetic hourly weather trace.
    SynthWeather {
        #[arg(long)]
        days: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ClimatePreset::MidwestWinter)]
        preset: ClimatePreset,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_named_log(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=path, got `{s}`"))?;
    if name.is_empty() {
        return Err("log name must not be empty".into());
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

fn default_out(sub: &str) -> PathBuf {
    let base = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    base.join(format!("hearth-{sub}"))
}

fn load_config(common: &Common) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn load_log(path: &Path) -> Result<InteractionLog, ExperimentError> {
    InteractionLog::load_csv(path).map_err(ExperimentError::from)
}

fn run() -> Result<(), ExperimentError> {
    match Cli::parse().command {
        Command::Identify { common, history } => {
            let cfg = load_config(&common)?;
            let out = common.out.unwrap_or_else(|| default_out("identify"));
            let log = load_log(&history)?;
            let ckpt = cmd_identify(&cfg, &log, &out)?;
            println!(
                "identified: R_out={:.3} °C/kW R_m={:.3} °C/kW C={:.3e} J/°C -> {}",
                ckpt.params.r_out,
                ckpt.params.r_mass,
                ckpt.params.capacitance_joules(),
                out.display()
            );
        }
        Command::Pretrain { common, history } => {
            let cfg = load_config(&common)?;
            let out = common.out.unwrap_or_else(|| default_out("pretrain"));
            let log = load_log(&history)?;
            let ckpt = cmd_pretrain(&cfg, &log, &out)?;
            if let hearth::experiment::CheckpointKind::Ibex { grid, .. } = &ckpt.kind {
                let sel = grid.iter().find(|g| g.selected).expect("one grid point selected");
                println!(
                    "pretrained: alpha={} lambda={} action-loss={:.4} kW² -> {}",
                    sel.alpha_imit,
                    sel.lambda,
                    sel.final_action_loss,
                    out.display()
                );
            }
        }
        Command::Deploy { common, checkpoint } => {
            let cfg = load_config(&common)?;
            let out = common.out.unwrap_or_else(|| default_out("deploy"));
            let ckpt = checkpoint.as_deref().map(Checkpoint::load).transpose()?;
            let result = cmd_deploy(&cfg, ckpt.as_ref(), &out)?;
            println!(
                "deployed {} hours, {:.1} kWh total, downtime {} h -> {}",
                result.log.len(),
                result.log.records.iter().map(|r| r.energy_kwh).sum::<f64>(),
                result.manifest.downtime_hours.unwrap_or(0),
                out.display()
            );
        }
        Command::Compare { common, baseline, logs } => {
            let cfg = load_config(&common)?;
            let out = common.out.unwrap_or_else(|| default_out("compare"));
            let mut named = vec![("baseline".to_string(), load_log(&baseline)?)];
            for (name, path) in &logs {
                named.push((name.clone(), load_log(path)?));
            }
            let report = cmd_compare(&cfg, &named, &out)?;
            print!("{}", report.render_text());
            println!("written to {}", out.display());
        }
        Command::SynthWeather { days, seed, preset, out } => {
            if days == 0 {
                return Err(ExperimentError::Config("days must be at least 1".into()));
            }
            let trace = synthesize_weather(days, seed, preset);
            save_weather_csv(&trace, &out)?;
            println!("wrote {} hours to {}", trace.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
