use serde::{Deserialize, Serialize};

use crate::contact::DEFAULT_CONTACT_TOLERANCE;
use crate::diffusion::sampler::{UlaParams, DEFAULT_ULA_STEPS};
use crate::error::{GeoError, Result};
use crate::fgw::DEFAULT_FGW_TRADEOFF;

pub const DEFAULT_GUIDANCE_STEPS: [usize; 4] = [50, 70, 90, 110];
/// Normalized-time threshold above which the face-optimization terms are on.
pub const DEFAULT_WEIGHT_THRESHOLD: f64 = 0.04;

/// Hyperparameters of guided sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceConfig {
    /// Neighbourhood candidates per guided step.
    pub candidates: usize,
    /// Weight of the structural regularizer in the candidate score.
    pub regularization_weight: f64,
    /// Feature/structure trade-off of the regularizer.
    pub fgw_tradeoff: f64,
    pub contact_tolerance: f64,
    /// Reverse steps at which guidance fires; empty disables guidance.
    pub guidance_steps: Vec<usize>,
    pub position_threshold: f64,
    pub shape_threshold: f64,
    pub length_weight: f64,
    pub angle_weight: f64,
    pub optimizer_steps: usize,
    pub learning_rate: f64,
    pub ula_steps: usize,
    /// `None` scales the Langevin step with the noise level.
    pub ula_step_size: Option<f64>,
    pub seed: u64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            candidates: 6,
            regularization_weight: 1.0,
            fgw_tradeoff: DEFAULT_FGW_TRADEOFF,
            contact_tolerance: DEFAULT_CONTACT_TOLERANCE,
            guidance_steps: DEFAULT_GUIDANCE_STEPS.to_vec(),
            position_threshold: DEFAULT_WEIGHT_THRESHOLD,
            shape_threshold: DEFAULT_WEIGHT_THRESHOLD,
            length_weight: 1.0,
            angle_weight: 0.0,
            optimizer_steps: 200,
            learning_rate: 0.05,
            ula_steps: DEFAULT_ULA_STEPS,
            ula_step_size: None,
            seed: 0,
        }
    }
}

impl GuidanceConfig {
    /// Same settings with guidance switched off.
    pub fn unguided(&self) -> Self {
        Self { guidance_steps: Vec::new(), ..self.clone() }
    }

    pub fn validate(&self, total_steps: usize) -> Result<()> {
        let bad = |m: String| Err(GeoError::InvalidInput(m));
        if self.candidates == 0 {
            return bad("candidate count must be at least 1".into());
        }
        if !(self.regularization_weight >= 0.0 && self.regularization_weight.is_finite()) {
            return bad(format!("regularization weight {} must be finite and >= 0", self.regularization_weight));
        }
        if !(0.0..=1.0).contains(&self.fgw_tradeoff) {
            return bad(format!("trade-off {} outside [0, 1]", self.fgw_tradeoff));
        }
        if !(self.contact_tolerance > 0.0) {
            return bad("contact tolerance must be positive".into());
        }
        if let Some(&t) = self.guidance_steps.iter().find(|&&t| t == 0 || t >= total_steps) {
            return bad(format!("guidance step {t} outside 1..{total_steps}"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive".into());
        }
        Ok(())
    }

    pub fn is_guided(&self, t: usize) -> bool {
        self.guidance_steps.contains(&t)
    }

    /// `(position weight, shape weight)` at reverse step `t` of `total`.
    pub fn weights(&self, t: usize, total: usize) -> (f64, f64) {
        let s = t as f64 / total as f64;
        let on = |th: f64| if s > th { 1.0 } else { 0.0 };
        (on(self.position_threshold), on(self.shape_threshold))
    }

    pub fn ula(&self) -> UlaParams {
        UlaParams { candidates: self.candidates, inner_steps: self.ula_steps, step_size: self.ula_step_size }
    }

    /// Langevin seed used at step `t`; independent of the chain's own noise.
    pub fn step_seed(&self, t: usize) -> u64 {
        self.seed ^ (t as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}
