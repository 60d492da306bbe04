//! Weather traces: CSV ingestion and synthetic generation.

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::PlantError;

/// One hourly weather sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherPoint {
    pub timestamp: DateTime<Utc>,
    /// Outdoor dry-bulb, °C.
    pub t_out: f64,
    /// Global horizontal irradiance, kW/m².
    pub i_sol: f64,
    /// Wind speed, m/s.
    pub wind: f64,
}

pub const WEATHER_HEADER: &str = "timestamp,t_out_c,ghi_kw_m2,wind_ms";

/// Parse the hourly weather CSV (`timestamp,t_out_c,ghi_kw_m2,wind_ms`,
/// RFC-3339 UTC timestamps). Validates hourly monotone timestamps and
/// non-negative irradiance, naming the offending line.
pub fn load_weather_csv(path: &std::path::Path) -> Result<Vec<WeatherPoint>, PlantError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| PlantError::Io { path: path.display().to_string(), source })?;
    parse_weather_csv(&text)
}

pub fn parse_weather_csv(text: &str) -> Result<Vec<WeatherPoint>, PlantError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| PlantError::BadHeader { expected: WEATHER_HEADER.into() })?;
    if header.trim() != WEATHER_HEADER {
        return Err(PlantError::BadHeader { expected: WEATHER_HEADER.into() });
    }
    let mut points: Vec<WeatherPoint> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(PlantError::MalformedRow {
                line: line_no,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let timestamp = DateTime::parse_from_rfc3339(fields[0])
            .map_err(|e| PlantError::MalformedRow { line: line_no, message: e.to_string() })?
            .with_timezone(&Utc);
        let parse = |s: &str, name: &str| -> Result<f64, PlantError> {
            s.parse::<f64>().map_err(|e| PlantError::MalformedRow {
                line: line_no,
                message: format!("{name}: {e}"),
            })
        };
        let point = WeatherPoint {
            timestamp,
            t_out: parse(fields[1], "t_out_c")?,
            i_sol: parse(fields[2], "ghi_kw_m2")?,
            wind: parse(fields[3], "wind_ms")?,
        };
        if point.i_sol < 0.0 {
            return Err(PlantError::NegativeIrradiance { line: line_no });
        }
        if let Some(prev) = points.last() {
            if point.timestamp - prev.timestamp != Duration::hours(1) {
                return Err(PlantError::NonMonotoneTimestamp { line: line_no });
            }
        }
        points.push(point);
    }
    Ok(points)
}

pub fn weather_to_csv(points: &[WeatherPoint]) -> String {
    let mut out = String::from(WEATHER_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            p.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            p.t_out,
            p.i_sol,
            p.wind
        ));
    }
    out
}

pub fn save_weather_csv(points: &[WeatherPoint], path: &std::path::Path) -> Result<(), PlantError> {
    std::fs::write(path, weather_to_csv(points))
        .map_err(|source| PlantError::Io { path: path.display().to_string(), source })
}

/// Synthetic climate presets for desk-scale experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ClimatePreset {
    /// Continental winter around -3 °C with hard cold snaps.
    MidwestWinter,
    /// Shoulder-season winter around +4 °C.
    MildWinter,
    /// Sustained deep cold around -12 °C.
    ColdSnap,
}

struct PresetShape {
    base_c: f64,
    seasonal_amp_c: f64,
    seasonal_period_days: f64,
    diurnal_amp_c: f64,
    noise_sigma_c: f64,
    noise_rho: f64,
    sol_peak_kw_m2: f64,
    sunrise: u32,
    sunset: u32,
}

impl ClimatePreset {
    fn shape(self) -> PresetShape {
        match self {
            ClimatePreset::MidwestWinter => PresetShape {
                base_c: -3.0,
                seasonal_amp_c: 5.0,
                seasonal_period_days: 19.0,
                diurnal_amp_c: 4.0,
                noise_sigma_c: 2.0,
                noise_rho: 0.85,
                sol_peak_kw_m2: 0.45,
                sunrise: 7,
                sunset: 17,
            },
            ClimatePreset::MildWinter => PresetShape {
                base_c: 4.0,
                seasonal_amp_c: 3.0,
                seasonal_period_days: 16.0,
                diurnal_amp_c: 5.0,
                noise_sigma_c: 1.5,
                noise_rho: 0.8,
                sol_peak_kw_m2: 0.55,
                sunrise: 7,
                sunset: 17,
            },
            ClimatePreset::ColdSnap => PresetShape {
                base_c: -12.0,
                seasonal_amp_c: 4.0,
                seasonal_period_days: 10.0,
                diurnal_amp_c: 3.0,
                noise_sigma_c: 2.0,
                noise_rho: 0.85,
                sol_peak_kw_m2: 0.35,
                sunrise: 8,
                sunset: 17,
            },
        }
    }

    /// Guaranteed band for every daily mean outdoor temperature the
    /// generator can produce: base ± (seasonal amplitude + clamped-noise
    /// bound). The diurnal term integrates to zero over a day.
    pub fn daily_mean_band(self) -> (f64, f64) {
        let s = self.shape();
        let half = s.seasonal_amp_c + 3.0 * s.noise_sigma_c + 1e-9;
        (s.base_c - half, s.base_c + half)
    }
}

/// Deterministic synthetic hourly weather: sinusoidal diurnal cycle over a
/// slow seasonal drift, AR(1) noise clamped at ±3σ, zero irradiance at
/// night and a cloud-scaled half-sine by day.
pub fn synthesize_weather(days: usize, seed: u64, preset: ClimatePreset) -> Vec<WeatherPoint> {
    let s = preset.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: DateTime<Utc> = "2024-01-05T00:00:00Z".parse().expect("static timestamp");
    let mut noise = 0.0f64;
    let mut points = Vec::with_capacity(days * 24);
    let mut cloud = 1.0f64;
    for h in 0..days * 24 {
        let day = h / 24;
        let hour = (h % 24) as u32;
        if hour == 0 {
            cloud = rng.random_range(0.3..1.0);
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        noise = (s.noise_rho * noise + s.noise_sigma_c * (1.0 - s.noise_rho * s.noise_rho).sqrt() * z)
            .clamp(-3.0 * s.noise_sigma_c, 3.0 * s.noise_sigma_c);
        let seasonal = s.seasonal_amp_c
            * (2.0 * std::f64::consts::PI * day as f64 / s.seasonal_period_days).sin();
        let diurnal = -s.diurnal_amp_c
            * (2.0 * std::f64::consts::PI * (hour as f64 - 14.0) / 24.0).cos();
        let t_out = s.base_c + seasonal + diurnal + noise;
        let i_sol = if hour >= s.sunrise && hour < s.sunset {
            let frac = (hour - s.sunrise) as f64 / (s.sunset - s.sunrise) as f64;
            s.sol_peak_kw_m2 * (std::f64::consts::PI * frac).sin() * cloud
        } else {
            0.0
        };
        let zw: f64 = StandardNormal.sample(&mut rng);
        let wind = (3.5 + 1.5 * zw).max(0.0);
        points.push(WeatherPoint {
            timestamp: start + Duration::hours(h as i64),
            t_out,
            i_sol: i_sol.max(0.0),
            wind,
        });
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let pts = synthesize_weather(2, 3, ClimatePreset::MidwestWinter);
        let parsed = parse_weather_csv(&weather_to_csv(&pts)).unwrap();
        assert_eq!(parsed.len(), pts.len());
        for (a, b) in pts.iter().zip(&parsed) {
            assert_eq!(a.timestamp, b.timestamp);
            assert!((a.t_out - b.t_out).abs() < 1e-6);
        }
    }

    #[test]
    fn two_valid_rows_parse() {
        let text = "timestamp,t_out_c,ghi_kw_m2,wind_ms\n2024-01-05T00:00:00Z,-3.5,0.0,2.0\n2024-01-05T01:00:00Z,-3.0,0.0,2.5\n";
        let pts = parse_weather_csv(text).unwrap();
        assert_eq!(pts.len(), 2);
    }

    #[test]
    fn negative_irradiance_names_the_row() {
        let text = "timestamp,t_out_c,ghi_kw_m2,wind_ms\n2024-01-05T00:00:00Z,-3.5,-0.1,2.0\n";
        match parse_weather_csv(text) {
            Err(PlantError::NegativeIrradiance { line }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let text = "timestamp,t_out_c,ghi_kw_m2,wind_ms\n2024-01-05T00:00:00Z,-3.5,0.0,2.0\n2024-01-05T00:00:00Z,-3.0,0.0,2.5\n";
        assert!(matches!(
            parse_weather_csv(text),
            Err(PlantError::NonMonotoneTimestamp { line: 3 })
        ));
    }

    #[test]
    fn malformed_field_names_the_row() {
        let text = "timestamp,t_out_c,ghi_kw_m2,wind_ms\n2024-01-05T00:00:00Z,cold,0.0,2.0\n";
        assert!(matches!(parse_weather_csv(text), Err(PlantError::MalformedRow { line: 2, .. })));
    }

    #[test]
    fn synthesis_is_reproducible() {
        let a = synthesize_weather(3, 11, ClimatePreset::MildWinter);
        let b = synthesize_weather(3, 11, ClimatePreset::MildWinter);
        assert_eq!(a, b);
    }

    #[test]
    fn night_hours_are_dark() {
        for p in synthesize_weather(5, 1, ClimatePreset::MidwestWinter) {
            let hour = p.timestamp.format("%H").to_string().parse::<u32>().unwrap();
            if !(7..17).contains(&hour) {
                assert_eq!(p.i_sol, 0.0, "hour {hour}");
            }
            assert!(p.i_sol >= 0.0);
        }
    }

    #[test]
    fn daily_means_stay_in_preset_band_over_many_seeds() {
        for preset in [ClimatePreset::MidwestWinter, ClimatePreset::MildWinter, ClimatePreset::ColdSnap] {
            let (lo, hi) = preset.daily_mean_band();
            for seed in 0..100 {
                let pts = synthesize_weather(3, seed, preset);
                for day in pts.chunks(24) {
                    let mean = day.iter().map(|p| p.t_out).sum::<f64>() / 24.0;
                    assert!(mean >= lo && mean <= hi, "{preset:?} seed {seed}: {mean} ∉ [{lo}, {hi}]");
                }
            }
        }
    }
}
