use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::boxset::BoxSet;
use super::model::{ConditionInputs, NoisePredictor};
use super::schedule::NoiseSchedule;
use crate::error::Result;

/// Default ULA inner steps.
pub const DEFAULT_ULA_STEPS: usize = 5;
/// Default ULA step size as a fraction of `1 − ᾱ_t`.
pub const DEFAULT_ULA_STEP_FRACTION: f64 = 0.1;

pub fn standard_normal(shape: (usize, usize), rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn(shape, |_| StandardNormal.sample(rng))
}

/// Ancestral step from level `t` to level `t − 1` (the clean state when
/// `t = 0`). `noise` is the standard-normal draw for this step; it is
/// ignored at `t = 0`.
pub fn reverse_step_with_noise(
    model: &dyn NoisePredictor,
    schedule: &NoiseSchedule,
    state: &BoxSet,
    t: usize,
    cond: &ConditionInputs,
    noise: &Array2<f64>,
) -> Result<BoxSet> {
    schedule.check(t)?;
    let eps = model.predict(state, t, cond);
    let mut mean = schedule.reverse_mean(&state.boxes, t, &eps);
    if t > 0 {
        let sigma = schedule.posterior_variance(t).sqrt();
        mean.zip_mut_with(noise, |m, &z| *m += sigma * z);
    }
    Ok(state.with_boxes(mean))
}

/// [`reverse_step_with_noise`] drawing its noise from `rng`. A draw is made
/// at every level, including 0, so chains stay aligned.
pub fn reverse_step(
    model: &dyn NoisePredictor,
    schedule: &NoiseSchedule,
    state: &BoxSet,
    t: usize,
    cond: &ConditionInputs,
    rng: &mut impl Rng,
) -> Result<BoxSet> {
    let z = standard_normal(state.boxes.dim(), rng);
    reverse_step_with_noise(model, schedule, state, t, cond, &z)
}

/// Settings for Langevin neighbourhood sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlaParams {
    pub candidates: usize,
    pub inner_steps: usize,
    /// Step size; `None` means `0.1·(1 − ᾱ_t)`.
    pub step_size: Option<f64>,
}

impl Default for UlaParams {
    fn default() -> Self {
        Self { candidates: 6, inner_steps: DEFAULT_ULA_STEPS, step_size: None }
    }
}

/// `N_p` Langevin chains started at `state`, each with its own stream of
/// a generator seeded by `seed`:
/// `x ← x + (η/2)·s(x) + √η·z` with score `s(x) = −ε(x, t)/√(1 − ᾱ_t)`.
pub fn ula_neighbors(
    model: &dyn NoisePredictor,
    schedule: &NoiseSchedule,
    state: &BoxSet,
    t: usize,
    cond: &ConditionInputs,
    params: &UlaParams,
    seed: u64,
) -> Result<Vec<BoxSet>> {
    schedule.check(t)?;
    let sigma = (1.0 - schedule.alpha_bar(t)).sqrt();
    let eta = params.step_size.unwrap_or(DEFAULT_ULA_STEP_FRACTION * (1.0 - schedule.alpha_bar(t)));
    let run = |n: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(n as u64);
        let mut x = state.clone();
        for _ in 0..params.inner_steps {
            let eps = model.predict(&x, t, cond);
            let z = standard_normal(x.boxes.dim(), &mut rng);
            let mut next = x.boxes.clone();
            ndarray::Zip::from(&mut next).and(&eps).and(&z).for_each(|v, &e, &zz| {
                *v += 0.5 * eta * (-e / sigma) + eta.sqrt() * zz;
            });
            x = x.with_boxes(next);
        }
        x
    };
    use rayon::prelude::*;
    Ok((0..params.candidates).into_par_iter().map(run).collect())
}

/// Unguided ancestral sampling of a full chain from pure noise.
pub fn sample_chain(
    model: &dyn NoisePredictor,
    schedule: &NoiseSchedule,
    cond: &ConditionInputs,
    contact_mask: Vec<bool>,
    rng: &mut impl Rng,
) -> Result<BoxSet> {
    let n = contact_mask.len();
    let mut x = BoxSet::new(standard_normal((n, 6), rng), contact_mask)?;
    for t in (0..schedule.steps()).rev() {
        x = reverse_step(model, schedule, &x, t, cond, rng)?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Zero;
    impl NoisePredictor for Zero {
        fn predict(&self, state: &BoxSet, _: usize, _: &ConditionInputs) -> Array2<f64> {
            Array2::zeros(state.boxes.dim())
        }
    }

    fn cond() -> ConditionInputs {
        ConditionInputs { text: Array2::zeros((8, 64)), cond_boxes: Array2::zeros((1, 6)), cond_contact: vec![true] }
    }

    #[test]
    fn last_step_is_deterministic() {
        let s = NoiseSchedule::default();
        let x = BoxSet::new(Array2::from_elem((2, 6), 0.7), vec![false; 2]).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let a = reverse_step(&Zero, &s, &x, 0, &cond(), &mut r1).unwrap();
        let b = reverse_step(&Zero, &s, &x, 0, &cond(), &mut r2).unwrap();
        assert_eq!(a, b);
        assert!(a.boxes.iter().all(|&v| (v - 0.7 / s.alpha(0).sqrt()).abs() < 1e-15));
    }

    #[test]
    fn ula_without_motion_returns_start() {
        let s = NoiseSchedule::default();
        let x = BoxSet::new(Array2::from_elem((3, 6), -0.2), vec![false; 3]).unwrap();
        let still = UlaParams { candidates: 4, inner_steps: 5, step_size: Some(0.0) };
        assert!(ula_neighbors(&Zero, &s, &x, 80, &cond(), &still, 9).unwrap().iter().all(|c| *c == x));
        let none = UlaParams { candidates: 4, inner_steps: 0, step_size: None };
        assert!(ula_neighbors(&Zero, &s, &x, 80, &cond(), &none, 9).unwrap().iter().all(|c| *c == x));
    }
}
