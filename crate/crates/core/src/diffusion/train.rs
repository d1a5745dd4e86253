use std::cmp::Ordering;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::autograd::Tape;
use super::boxset::BoxSet;
use super::model::{ConditionInputs, Denoiser, DenoiserConfig};
use super::schedule::NoiseSchedule;
use crate::error::{GeoError, Result};

/// One training pair: the clean target box set and its conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub target: BoxSet,
    pub cond: ConditionInputs,
}

impl TrainingExample {
    fn sort_key(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.target.boxes.iter().copied().collect();
        k.extend(self.target.contact_mask.iter().map(|&b| f64::from(u8::from(b))));
        k.extend(self.cond.cond_boxes.iter().copied());
        k.extend(self.cond.cond_contact.iter().map(|&b| f64::from(u8::from(b))));
        k.extend(self.cond.text.iter().copied());
        k
    }
}

fn compare_keys(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// SGD with heavy-ball momentum.
    Momentum,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub optimizer: Optimizer,
    pub model: DenoiserConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            momentum: 0.9,
            optimizer: Optimizer::Momentum,
            model: DenoiserConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Denoiser,
    pub log: Vec<EpochLog>,
}

struct OptState {
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
    step: i32,
}

impl OptState {
    fn new(model: &Denoiser) -> Self {
        let zeros: Vec<Array2<f64>> = model.params().iter().map(|p| Array2::zeros(p.dim())).collect();
        Self { first: zeros.clone(), second: zeros, step: 0 }
    }

    fn apply(&mut self, cfg: &TrainConfig, params: &mut [Array2<f64>], grads: &[Array2<f64>]) {
        self.step += 1;
        let lr = cfg.learning_rate;
        match cfg.optimizer {
            Optimizer::Momentum => {
                for ((p, v), g) in params.iter_mut().zip(&mut self.first).zip(grads) {
                    v.zip_mut_with(g, |vv, &gg| *vv = cfg.momentum * *vv + gg);
                    p.zip_mut_with(v, |pp, &vv| *pp -= lr * vv);
                }
            }
            Optimizer::Adam => {
                let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
                let c1 = 1.0 - b1.powi(self.step);
                let c2 = 1.0 - b2.powi(self.step);
                for (k, p) in params.iter_mut().enumerate() {
                    let g = &grads[k];
                    self.first[k].zip_mut_with(g, |m, &gg| *m = b1 * *m + (1.0 - b1) * gg);
                    self.second[k].zip_mut_with(g, |s, &gg| *s = b2 * *s + (1.0 - b2) * gg * gg);
                    ndarray::Zip::from(p).and(&self.first[k]).and(&self.second[k]).for_each(|pp, &m, &s| {
                        *pp -= lr * (m / c1) / ((s / c2).sqrt() + eps);
                    });
                }
            }
        }
    }
}

/// Loss and gradients of one example at a given level and noise.
pub fn example_gradients(
    model: &Denoiser,
    example: &TrainingExample,
    t: usize,
    noise: &Array2<f64>,
) -> Result<(f64, Vec<(usize, Array2<f64>)>)> {
    let xt = model.schedule.forward_diffuse(&example.target.boxes, t, noise)?;
    let state = example.target.with_boxes(xt);
    let mut tape = Tape::new();
    let pred = model.forward(&mut tape, &state, t, &example.cond);
    let loss = tape.mse(pred, noise.clone());
    let value = tape.value(loss)[[0, 0]];
    Ok((value, tape.backward(loss)))
}

/// Trains a fresh denoiser by minimizing the noise-prediction MSE.
///
/// The dataset is put into a canonical order first, so the result does not
/// depend on the order examples were supplied in.
pub fn train_denoiser(dataset: &[TrainingExample], cfg: &TrainConfig, schedule: NoiseSchedule) -> Result<TrainOutcome> {
    train_denoiser_with(dataset, cfg, schedule, |_| {})
}

pub fn train_denoiser_with(
    dataset: &[TrainingExample],
    cfg: &TrainConfig,
    schedule: NoiseSchedule,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(GeoError::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(GeoError::InvalidInput("batch size must be positive".into()));
    }
    let mut data: Vec<(Vec<f64>, &TrainingExample)> = dataset.iter().map(|e| (e.sort_key(), e)).collect();
    data.sort_by(|a, b| compare_keys(&a.0, &b.0));
    let data: Vec<&TrainingExample> = data.into_iter().map(|(_, e)| e).collect();
    let num_faces = data.iter().map(|e| e.target.len()).max().unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Denoiser::new(cfg.model, schedule, num_faces, rng.random());
    let mut opt = OptState::new(&model);
    let steps = model.schedule.steps();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads: Vec<Array2<f64>> = model.params().iter().map(|p| Array2::zeros(p.dim())).collect();
            for &idx in batch {
                let ex = data[idx];
                let t = rng.random_range(0..steps);
                let noise = Array2::from_shape_fn(ex.target.boxes.dim(), |_| StandardNormal.sample(&mut rng));
                let (loss, g) = example_gradients(&model, ex, t, &noise)?;
                if !loss.is_finite() {
                    return Err(GeoError::Diverged);
                }
                total += loss;
                for (id, gi) in g {
                    grads[id] += &gi;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for g in &mut grads {
                g.mapv_inplace(|v| v * scale);
            }
            opt.apply(cfg, model.params_mut(), &grads);
            if model.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
                return Err(GeoError::Diverged);
            }
        }
        let entry = EpochLog { epoch, mean_loss: total / data.len() as f64 };
        log::info!("epoch {epoch}: loss {:.6}", entry.mean_loss);
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(TrainOutcome { model, log })
}
