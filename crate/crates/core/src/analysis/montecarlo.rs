//! Monte-Carlo propagation of signature-fit uncertainty into savings.
//!
//! Each draw samples a (β₀, β₁) pair for the baseline and the candidate
//! controller from the multivariate normals of their fits, recomputes both
//! areas under the curve on the common interval, and takes the percent
//! reduction. Per-sample generators are derived from the master seed, so
//! the result is independent of any batching of the sample loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::signature::auc_of_beta;
use super::{AnalysisError, SignatureFit};
use crate::thermal::CopCurve;

#[derive(Debug, Clone, PartialEq)]
pub struct SavingsDistribution {
    /// Percent savings per draw.
    pub samples: Vec<f64>,
    pub mean: f64,
    /// 2.5 / 97.5 percentile interval.
    pub ci95: (f64, f64),
}

/// Lower-triangular Cholesky factor of a symmetric 2×2 PSD matrix.
fn cholesky2(m: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2], AnalysisError> {
    let tol = 1e-12 * (1.0 + m[0][0].abs() + m[1][1].abs());
    if (m[0][1] - m[1][0]).abs() > tol.max(1e-9 * m[0][1].abs()) || m[0][0] < -tol || m[1][1] < -tol
    {
        return Err(AnalysisError::NonPsdCovariance);
    }
    let a = m[0][0].max(0.0).sqrt();
    let b = if a > 0.0 { m[0][1] / a } else { 0.0 };
    let d2 = m[1][1] - b * b;
    if d2 < -tol {
        return Err(AnalysisError::NonPsdCovariance);
    }
    Ok([[a, 0.0], [b, d2.max(0.0).sqrt()]])
}

/// Percent-savings distribution of `fit_ctrl` relative to `fit_base`.
pub fn monte_carlo_savings(
    fit_base: &SignatureFit,
    fit_ctrl: &SignatureFit,
    cop: &CopCurve,
    interval: (f64, f64),
    quad_step: f64,
    n: usize,
    seed: u64,
) -> Result<SavingsDistribution, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::TooFewRecords { needed: 1, got: 0 });
    }
    let lb = cholesky2(&fit_base.covariance)?;
    let lc = cholesky2(&fit_ctrl.covariance)?;

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        // One independent, index-derived generator per draw.
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let z: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let b_base = [
            fit_base.beta0 + lb[0][0] * z[0],
            fit_base.beta1 + lb[1][0] * z[0] + lb[1][1] * z[1],
        ];
        let b_ctrl = [
            fit_ctrl.beta0 + lc[0][0] * z[2],
            fit_ctrl.beta1 + lc[1][0] * z[2] + lc[1][1] * z[3],
        ];
        let auc_base = auc_of_beta(b_base[0], b_base[1], cop, interval, quad_step)?;
        let auc_ctrl = auc_of_beta(b_ctrl[0], b_ctrl[1], cop, interval, quad_step)?;
        let savings = if auc_base.abs() > 1e-12 {
            100.0 * (auc_base - auc_ctrl) / auc_base
        } else {
            0.0
        };
        samples.push(savings);
    }

    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite savings"));
    let pct = |q: f64| {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    };
    Ok(SavingsDistribution { samples, mean, ci95: (pct(0.025), pct(0.975)) })
}
