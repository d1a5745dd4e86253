use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

/// Linear-β DDPM schedule. Arrays are indexed by noise level `0..steps`;
/// level 0 is the least noisy state above the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ScheduleParams", into = "ScheduleParams")]
pub struct NoiseSchedule {
    beta_start: f64,
    beta_end: f64,
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct ScheduleParams {
    steps: usize,
    beta_start: f64,
    beta_end: f64,
}

impl From<ScheduleParams> for NoiseSchedule {
    fn from(p: ScheduleParams) -> Self {
        NoiseSchedule::linear(p.steps, p.beta_start, p.beta_end)
    }
}

impl From<NoiseSchedule> for ScheduleParams {
    fn from(s: NoiseSchedule) -> Self {
        ScheduleParams { steps: s.steps(), beta_start: s.beta_start, beta_end: s.beta_end }
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
    }
}

impl NoiseSchedule {
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Self {
        let steps = steps.max(1);
        let betas: Vec<f64> = (0..steps)
            .map(|k| {
                if steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * k as f64 / (steps - 1) as f64
                }
            })
            .collect();
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        Self { beta_start, beta_end, betas, alphas, alpha_bars }
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    pub fn check(&self, t: usize) -> Result<()> {
        if t >= self.steps() {
            return Err(GeoError::TimestepOutOfRange { t, steps: self.steps() });
        }
        Ok(())
    }

    /// Variance of `q(x_{t-1} | x_t, x_0)`; zero at level 0.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        if t == 0 {
            return 0.0;
        }
        self.betas[t] * (1.0 - self.alpha_bars[t - 1]) / (1.0 - self.alpha_bars[t])
    }

    /// `√ᾱ_t·x0 + √(1−ᾱ_t)·noise`.
    pub fn forward_diffuse(&self, x0: &Array2<f64>, t: usize, noise: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(t)?;
        if x0.dim() != noise.dim() {
            return Err(GeoError::ShapeMismatch(format!("state {:?} vs noise {:?}", x0.dim(), noise.dim())));
        }
        let ab = self.alpha_bars[t];
        Ok(x0 * ab.sqrt() + noise * (1.0 - ab).sqrt())
    }

    /// Posterior mean of the ancestral step from level `t`, given predicted noise.
    pub fn reverse_mean(&self, x: &Array2<f64>, t: usize, eps: &Array2<f64>) -> Array2<f64> {
        let coef = self.betas[t] / (1.0 - self.alpha_bars[t]).sqrt();
        (x - &(eps * coef)) / self.alphas[t].sqrt()
    }
}
