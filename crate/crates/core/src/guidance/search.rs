use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::GuidanceConfig;
use super::costs::d_geo;
use super::decode::decode_part;
use super::predictor::predict_guiding_sample;
use crate::diffusion::sampler::{reverse_step, standard_normal, ula_neighbors};
use crate::diffusion::{BoxSet, ConditionInputs, Denoiser, NoisePredictor, NoiseSchedule, CONTACT_SLOTS};
use crate::error::{GeoError, Result};
use crate::fgw::d_reg;
use crate::geometry::face::FACE_BOX_MIN_EXTENT;
use crate::geometry::part::PartModel;

/// What happened at one guided step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceRecord {
    pub t: usize,
    pub scores: Vec<f64>,
    pub chosen: usize,
    pub cost_before: f64,
    pub cost_after: f64,
}

/// Everything a guided step needs besides the state and the noise source.
#[derive(Clone, Copy)]
pub struct GuidedSampler<'a> {
    pub model: &'a dyn NoisePredictor,
    pub schedule: &'a NoiseSchedule,
    pub cond: &'a PartModel,
    pub inputs: &'a ConditionInputs,
    pub config: &'a GuidanceConfig,
}

/// Composite score of each candidate: fit to the guide plus the weighted
/// structural distance to the reference state.
pub fn candidate_scores(
    candidates: &[BoxSet],
    guide: &BoxSet,
    reference: &BoxSet,
    config: &GuidanceConfig,
) -> Result<Vec<f64>> {
    let ref_boxes = reference.sanitized_boxes(FACE_BOX_MIN_EXTENT);
    candidates
        .par_iter()
        .map(|c| {
            let fit = d_geo(&c.boxes, &guide.boxes)?;
            if config.regularization_weight == 0.0 {
                return Ok(fit);
            }
            let reg = d_reg(&c.sanitized_boxes(FACE_BOX_MIN_EXTENT), &ref_boxes, config.fgw_tradeoff)?;
            log::debug!("candidate fit {fit:.6} regularizer {reg:.6}");
            Ok(fit + config.regularization_weight * reg)
        })
        .collect()
}

/// Index of the smallest score, the first on ties; NaN never wins.
pub fn select_candidate(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            _ if s.is_nan() => {}
            Some(b) if scores[b] <= s => {}
            _ => best = Some(i),
        }
    }
    best.or(if scores.is_empty() { None } else { Some(0) })
}

impl<'a> GuidedSampler<'a> {
    /// One reverse step from level `t` to `t − 1`. At guidance steps the
    /// denoised state is replaced by the best of its Langevin neighbours
    /// under [`candidate_scores`] against the guiding sample.
    pub fn step(
        &self,
        x_next: &BoxSet,
        t: usize,
        rng: &mut impl Rng,
        trace: Option<&mut Vec<GuidanceRecord>>,
    ) -> Result<BoxSet> {
        let denoised = reverse_step(self.model, self.schedule, x_next, t, self.inputs, rng)?;
        if !self.config.is_guided(t) {
            return Ok(denoised);
        }
        if t == 0 {
            return Err(GeoError::TimestepOutOfRange { t, steps: self.schedule.steps() });
        }
        let guide = predict_guiding_sample(&denoised, self.cond, t, self.schedule.steps(), self.config)?;
        let candidates = ula_neighbors(
            self.model,
            self.schedule,
            &denoised,
            t - 1,
            self.inputs,
            &self.config.ula(),
            self.config.step_seed(t),
        )?;
        let scores = candidate_scores(&candidates, &guide.guide, &denoised, self.config)?;
        let chosen = select_candidate(&scores).expect("at least one candidate");
        if let Some(tr) = trace {
            tr.push(GuidanceRecord { t, scores, chosen, cost_before: guide.cost_before, cost_after: guide.cost_after });
        }
        Ok(candidates.into_iter().nth(chosen).expect("chosen index is in range"))
    }

    /// Full reverse chain from Gaussian noise; returns the final box set.
    pub fn run_chain(
        &self,
        num_faces: usize,
        rng: &mut impl Rng,
        mut trace: Option<&mut Vec<GuidanceRecord>>,
    ) -> Result<BoxSet> {
        self.config.validate(self.schedule.steps())?;
        if num_faces == 0 {
            return Err(GeoError::InvalidInput("model generates zero faces".into()));
        }
        let mask = generation_mask(num_faces, self.cond.contact_indices().len());
        let mut x = BoxSet::new(standard_normal((num_faces, 6), rng), mask)?;
        for t in (0..self.schedule.steps()).rev() {
            x = self.step(&x, t, rng, trace.as_deref_mut())?;
        }
        Ok(x)
    }
}

/// Generated contact slots: the leading `min(M, N, |contacts|)` positions.
pub fn generation_mask(num_faces: usize, cond_contacts: usize) -> Vec<bool> {
    BoxSet::leading_mask(num_faces, cond_contacts.min(CONTACT_SLOTS))
}

/// Samples a part that should mate with `cond`. With no guidance steps
/// configured this is plain ancestral sampling.
pub fn generate(
    model: &Denoiser,
    cond: &PartModel,
    prompt: &str,
    config: &GuidanceConfig,
    rng: &mut impl Rng,
    trace: Option<&mut Vec<GuidanceRecord>>,
) -> Result<PartModel> {
    let inputs = ConditionInputs::new(cond, prompt)?;
    let sampler = GuidedSampler { model, schedule: &model.schedule, cond, inputs: &inputs, config };
    let boxes = sampler.run_chain(model.num_faces, rng, trace)?;
    decode_part(&boxes, prompt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_prefers_first_minimum() {
        assert_eq!(select_candidate(&[3.0, 1.0, 1.0, 2.0]), Some(1));
        assert_eq!(select_candidate(&[f64::NAN, 2.0]), Some(1));
        assert_eq!(select_candidate(&[5.0]), Some(0));
        assert_eq!(select_candidate(&[]), None);
    }

    #[test]
    fn mask_is_capped() {
        assert_eq!(generation_mask(4, 2), vec![true, true, false, false]);
        assert_eq!(generation_mask(12, 40).iter().filter(|&&b| b).count(), CONTACT_SLOTS);
        assert_eq!(generation_mask(3, 5), vec![true; 3]);
    }
}
