//! Exogenous heat-gain regressor.
//!
//! Predicts the unmodelled thermal input Q̇_e (solar through glazing,
//! occupants, appliances) from weather and time-of-day features. A kernel
//! ridge regressor with a radial-basis kernel over standardized features
//! [T_out, I_sol, wind, sin h, cos h] gives a deterministic closed-form fit
//! with no iterative solver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ControlError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelRidgeConfig {
    /// RBF lengthscale on standardized features.
    pub lengthscale: f64,
    /// Ridge regularization added to the kernel diagonal.
    pub ridge: f64,
}

impl Default for KernelRidgeConfig {
    fn default() -> Self {
        Self { lengthscale: 1.0, ridge: 1e-3 }
    }
}

pub const N_FEATURES: usize = 5;

/// Trained regressor state. Prediction is deterministic given features and
/// finite for finite input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousGainModel {
    config: KernelRidgeConfig,
    /// Standardized training features.
    train: Vec<[f64; N_FEATURES]>,
    alpha: Vec<f64>,
    mean: [f64; N_FEATURES],
    scale: [f64; N_FEATURES],
    pub training_rmse_kw: f64,
    pub n_samples: usize,
}

/// Raw (unstandardized) feature vector for one hour.
pub fn gain_features(t_out: f64, i_sol: f64, wind: f64, local_hour: u32) -> [f64; N_FEATURES] {
    let phase = 2.0 * std::f64::consts::PI * (local_hour % 24) as f64 / 24.0;
    [t_out, i_sol, wind, phase.sin(), phase.cos()]
}

impl ExogenousGainModel {
    /// Closed-form kernel ridge fit of gains (kW) on raw features.
    pub fn fit(
        features: &[[f64; N_FEATURES]],
        gains_kw: &[f64],
        config: KernelRidgeConfig,
    ) -> Result<Self, ControlError> {
        assert_eq!(features.len(), gains_kw.len());
        let n = features.len();
        if n == 0 {
            return Err(ControlError::ShortForecast { got: 0, expected: 1 });
        }
        let mut mean = [0.0; N_FEATURES];
        let mut scale = [0.0; N_FEATURES];
        for f in features {
            for (m, v) in mean.iter_mut().zip(f) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        for f in features {
            for k in 0..N_FEATURES {
                scale[k] += (f[k] - mean[k]).powi(2);
            }
        }
        for s in &mut scale {
            *s = (*s / n as f64).sqrt();
            if *s < 1e-9 {
                *s = 1.0; // constant feature: leave centered
            }
        }
        let train: Vec<[f64; N_FEATURES]> = features
            .iter()
            .map(|f| std::array::from_fn(|k| (f[k] - mean[k]) / scale[k]))
            .collect();

        let ls2 = 2.0 * config.lengthscale * config.lengthscale;
        let mut k = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let d2: f64 =
                    (0..N_FEATURES).map(|f| (train[i][f] - train[j][f]).powi(2)).sum();
                let v = (-d2 / ls2).exp();
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += config.ridge;
        }
        let y = DVector::from_column_slice(gains_kw);
        let chol = k
            .cholesky()
            .ok_or(ControlError::Solver(crate::solver::SolverError::SingularKkt))?;
        let alpha = chol.solve(&y);

        let mut model = Self {
            config,
            train,
            alpha: alpha.iter().copied().collect(),
            mean,
            scale,
            training_rmse_kw: 0.0,
            n_samples: n,
        };
        let rmse = (features
            .iter()
            .zip(gains_kw)
            .map(|(f, y)| (model.predict_features(f) - y).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        model.training_rmse_kw = rmse;
        Ok(model)
    }

    pub fn predict_features(&self, raw: &[f64; N_FEATURES]) -> f64 {
        let x: [f64; N_FEATURES] =
            std::array::from_fn(|k| (raw[k] - self.mean[k]) / self.scale[k]);
        let ls2 = 2.0 * self.config.lengthscale * self.config.lengthscale;
        self.train
            .iter()
            .zip(&self.alpha)
            .map(|(t, a)| {
                let d2: f64 = (0..N_FEATURES).map(|f| (x[f] - t[f]).powi(2)).sum();
                a * (-d2 / ls2).exp()
            })
            .sum()
    }

    pub fn predict(&self, t_out: f64, i_sol: f64, wind: f64, local_hour: u32) -> f64 {
        self.predict_features(&gain_features(t_out, i_sol, wind, local_hour))
    }
}
