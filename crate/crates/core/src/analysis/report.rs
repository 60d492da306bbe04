//! Plain-text comparison report and plot-ready CSV series.

use super::{
    ComfortAssumptions, PpdStatsTable, SavingsDistribution, SignatureFit, SignatureKind,
};
use crate::thermal::CopCurve;

/// Everything the analysis computed for one controller's log.
#[derive(Debug, Clone)]
pub struct ControllerAnalysis {
    pub name: String,
    pub n_days: usize,
    pub fit_outdoor: SignatureFit,
    pub fit_delta: SignatureFit,
    pub auc_outdoor: f64,
    pub auc_delta: f64,
    pub balance_temp: f64,
    pub ppd_return: PpdStatsTable,
    pub ppd_local: PpdStatsTable,
    /// Savings vs the baseline; absent on the baseline itself.
    pub savings_outdoor: Option<SavingsDistribution>,
    pub savings_delta: Option<SavingsDistribution>,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub baseline_name: String,
    pub entries: Vec<ControllerAnalysis>,
    pub outdoor_interval: (f64, f64),
    pub delta_interval: (f64, f64),
    pub assumptions: ComfortAssumptions,
    pub mc_samples: usize,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl ComparisonReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        s.push_str("controller comparison report\n");
        s.push_str("============================\n\n");
        s.push_str(&format!(
            "baseline: {}\ncomfort assumptions: met={} clo={} v={} m/s rh={}% mrt=air:{}\n",
            self.baseline_name,
            self.assumptions.met,
            self.assumptions.clo,
            self.assumptions.air_velocity,
            self.assumptions.rh,
            self.assumptions.mrt_equals_air,
        ));
        s.push_str(&format!(
            "outdoor interval: [{}, {}] °C   delta interval: [{}, {}] °C   mc samples: {} (seed {})\n",
            self.outdoor_interval.0,
            self.outdoor_interval.1,
            self.delta_interval.0,
            self.delta_interval.1,
            self.mc_samples,
            self.seed,
        ));
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s.push('\n');

        s.push_str("[1] energy-signature fits\n");
        for e in &self.entries {
            for (label, fit) in [("outdoor", &e.fit_outdoor), ("delta", &e.fit_delta)] {
                s.push_str(&format!(
                    "  {:10} {:7} beta0={:10.3} kWh  beta1={:8.4} kWh/°C  R²={:.4}  days={}\n",
                    e.name, label, fit.beta0, fit.beta1, fit.r_squared, fit.n_days
                ));
            }
        }

        s.push_str("\n[2] area under fitted curves (kWh·°C)\n");
        for e in &self.entries {
            s.push_str(&format!(
                "  {:10} outdoor={:10.2}   delta={:10.2}\n",
                e.name, e.auc_outdoor, e.auc_delta
            ));
        }

        s.push_str("\n[3] monte-carlo savings vs baseline (%)\n");
        for e in &self.entries {
            match (&e.savings_outdoor, &e.savings_delta) {
                (Some(o), Some(d)) => {
                    s.push_str(&format!(
                        "  {:10} outdoor: mean={:6.2}  ci95=[{:6.2}, {:6.2}]   delta: mean={:6.2}  ci95=[{:6.2}, {:6.2}]\n",
                        e.name, o.mean, o.ci95.0, o.ci95.1, d.mean, d.ci95.0, d.ci95.1
                    ));
                }
                _ => s.push_str(&format!("  {:10} (baseline)\n", e.name)),
            }
        }

        s.push_str("\n[4] balance temperatures (°C)\n");
        for e in &self.entries {
            s.push_str(&format!("  {:10} T_b = {:.2}\n", e.name, e.balance_temp));
        }

        s.push_str("\n[5] ppd statistics (%)\n");
        for e in &self.entries {
            for (label, t) in [("return-air", &e.ppd_return), ("thermostat", &e.ppd_local)] {
                s.push_str(&format!(
                    "  {:10} {:11} mean {:5.2}/{:5.2}/{:5.2}  std {:4.2}/{:4.2}/{:4.2}  max {:5.2}  min {:4.2}  hours {}/{}/{}\n",
                    e.name,
                    label,
                    t.overall.mean,
                    t.day.mean,
                    t.night.mean,
                    t.overall.std_dev,
                    t.day.std_dev,
                    t.night.std_dev,
                    t.overall.max,
                    t.overall.min,
                    t.overall.count_hours,
                    t.day.count_hours,
                    t.night.count_hours,
                )); // overall/day/night
            }
        }
        s
    }
}

/// Plot-ready sampling of a fitted electrical-energy curve, 0.1 °C grid.
pub fn fit_curve_csv(fit: &SignatureFit, cop: &CopCurve, interval: (f64, f64)) -> String {
    let header = match fit.kind {
        SignatureKind::Outdoor => "t_out_c,e_e_kwh",
        SignatureKind::Delta => "delta_t_c,e_e_kwh",
    };
    let mut s = String::from(header);
    s.push('\n');
    let n = ((interval.1 - interval.0) / 0.1).round() as usize;
    for i in 0..=n {
        let x = interval.0 + 0.1 * i as f64;
        s.push_str(&format!("{:.1},{:.6}\n", x, (fit.beta0 + fit.beta1 * x) / cop.at(x)));
    }
    s
}
