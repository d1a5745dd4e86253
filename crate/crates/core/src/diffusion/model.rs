use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::autograd::{Tape, Var};
use super::boxset::{BoxSet, CONTACT_SLOTS};
use super::schedule::NoiseSchedule;
use super::text::{embed_text, TEXT_WIDTH};
use crate::error::{GeoError, Result};
use crate::geometry::part::PartModel;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Anything that predicts the noise in a state at a noise level.
pub trait NoisePredictor: Sync {
    fn predict(&self, state: &BoxSet, t: usize, cond: &ConditionInputs) -> Array2<f64>;
}

/// Raw conditioning data for the denoiser: prompt embedding, condition
/// face boxes and their contact flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionInputs {
    pub text: Array2<f64>,
    pub cond_boxes: Array2<f64>,
    pub cond_contact: Vec<bool>,
}

impl ConditionInputs {
    pub fn new(cond: &PartModel, prompt: &str) -> Result<Self> {
        if cond.is_empty() {
            return Err(GeoError::EmptyModel);
        }
        let flat: Vec<f64> = cond.faces().iter().flat_map(|f| f.bbox.to_array()).collect();
        let cond_boxes =
            Array2::from_shape_vec((cond.len(), 6), flat).map_err(|e| GeoError::ShapeMismatch(e.to_string()))?;
        let cond_contact = (0..cond.len()).map(|i| cond.contact_indices().contains(&i)).collect();
        Ok(Self { text: embed_text(prompt), cond_boxes, cond_contact })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub width: usize,
    pub blocks: usize,
    pub mlp_hidden: usize,
    /// When false the network never sees the noisy state.
    pub use_state: bool,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self { width: 64, blocks: 2, mlp_hidden: 128, use_state: true }
    }
}

#[derive(Debug, Clone, Copy)]
struct BlockIds {
    self_q: usize,
    self_k: usize,
    self_v: usize,
    self_o: usize,
    cross_q: usize,
    cross_k: usize,
    cross_v: usize,
    cross_o: usize,
    mlp_in: usize,
    mlp_in_bias: usize,
    mlp_out: usize,
    mlp_out_bias: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    state_in: usize,
    state_in_bias: usize,
    time: usize,
    time_bias: usize,
    contact: usize,
    text: usize,
    cond_in: usize,
    cond_in_bias: usize,
    cond_contact: usize,
    blocks: Vec<BlockIds>,
    out: usize,
    out_bias: usize,
}

/// Parameter shape plus init scale (0 = zeros).
type Spec = (String, usize, usize, f64);

impl Layout {
    fn new(cfg: &DenoiserConfig) -> (Self, Vec<Spec>) {
        let d = cfg.width;
        let mut specs: Vec<Spec> = Vec::new();
        let mut add = |name: String, r: usize, c: usize, scale: f64| {
            specs.push((name, r, c, scale));
            specs.len() - 1
        };
        let fan = |n: usize| 1.0 / (n as f64).sqrt();
        let state_in = add("state_in".into(), 6, d, fan(6));
        let state_in_bias = add("state_in_bias".into(), 1, d, 0.0);
        let time = add("time".into(), d, d, fan(d));
        let time_bias = add("time_bias".into(), 1, d, 0.0);
        let contact = add("contact".into(), 1, d, 1.0);
        let text = add("text".into(), TEXT_WIDTH, d, fan(TEXT_WIDTH));
        let cond_in = add("cond_in".into(), 6, d, fan(6));
        let cond_in_bias = add("cond_in_bias".into(), 1, d, 0.0);
        let cond_contact = add("cond_contact".into(), 1, d, 1.0);
        let mut blocks = Vec::new();
        for b in 0..cfg.blocks {
            let mut m = |n: &str, r, c, s| add(format!("block{b}.{n}"), r, c, s);
            blocks.push(BlockIds {
                self_q: m("self_q", d, d, fan(d)),
                self_k: m("self_k", d, d, fan(d)),
                self_v: m("self_v", d, d, fan(d)),
                self_o: m("self_o", d, d, 0.1 * fan(d)),
                cross_q: m("cross_q", d, d, fan(d)),
                cross_k: m("cross_k", d, d, fan(d)),
                cross_v: m("cross_v", d, d, fan(d)),
                cross_o: m("cross_o", d, d, 0.1 * fan(d)),
                mlp_in: m("mlp_in", d, cfg.mlp_hidden, fan(d)),
                mlp_in_bias: m("mlp_in_bias", 1, cfg.mlp_hidden, 0.0),
                mlp_out: m("mlp_out", cfg.mlp_hidden, d, 0.1 * fan(cfg.mlp_hidden)),
                mlp_out_bias: m("mlp_out_bias", 1, d, 0.0),
            });
        }
        let out = add("out".into(), d, 6, 0.0);
        let out_bias = add("out_bias".into(), 1, 6, 0.0);
        let layout = Layout {
            state_in,
            state_in_bias,
            time,
            time_bias,
            contact,
            text,
            cond_in,
            cond_in_bias,
            cond_contact,
            blocks,
            out,
            out_bias,
        };
        (layout, specs)
    }
}

/// Set-attention noise predictor over face boxes.
#[derive(Debug, Clone)]
pub struct Denoiser {
    pub config: DenoiserConfig,
    pub schedule: NoiseSchedule,
    /// Face count of generated box sets.
    pub num_faces: usize,
    names: Vec<String>,
    params: Vec<Array2<f64>>,
    layout: Layout,
}

/// Sinusoidal features of a noise level, `1 × width`.
pub fn timestep_features(t: usize, width: usize) -> Array2<f64> {
    let half = width / 2;
    Array2::from_shape_fn((1, width), |(_, k)| {
        let i = k % half.max(1);
        let freq = (-(10_000f64).ln() * i as f64 / half.max(1) as f64).exp();
        let a = t as f64 * freq;
        if k < half {
            a.sin()
        } else {
            a.cos()
        }
    })
}

fn mask_column(mask: &[bool]) -> Array2<f64> {
    Array2::from_shape_fn((mask.len(), 1), |(i, _)| if mask[i] { 1.0 } else { 0.0 })
}

impl Denoiser {
    pub fn new(config: DenoiserConfig, schedule: NoiseSchedule, num_faces: usize, seed: u64) -> Self {
        let (layout, specs) = Layout::new(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = specs
            .iter()
            .map(|(_, r, c, s)| {
                Array2::from_shape_fn((*r, *c), |_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * s
                })
            })
            .collect();
        let names = specs.into_iter().map(|s| s.0).collect();
        Self { config, schedule, num_faces, names, params, layout }
    }

    pub fn params(&self) -> &[Array2<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Array2::len).sum()
    }

    fn attention<'a>(&'a self, tape: &mut Tape<'a>, q_src: Var, kv_src: Var, ids: [usize; 4]) -> Var {
        let [wq, wk, wv, wo] = ids.map(|i| tape.param(i, &self.params[i]));
        let q = tape.matmul(q_src, wq);
        let k = tape.matmul(kv_src, wk);
        let v = tape.matmul(kv_src, wv);
        let scores = tape.matmul_t(q, k);
        let scores = tape.scale(scores, 1.0 / (self.config.width as f64).sqrt());
        let attn = tape.softmax_rows(scores);
        let mixed = tape.matmul(attn, v);
        tape.matmul(mixed, wo)
    }

    /// Records the forward pass on `tape`; returns the `N × 6` noise estimate.
    pub fn forward<'a>(&'a self, tape: &mut Tape<'a>, state: &BoxSet, t: usize, cond: &ConditionInputs) -> Var {
        let l = &self.layout;
        let n = state.len();
        let p = |tape: &mut Tape<'a>, id: usize| tape.param(id, &self.params[id]);

        // Condition sequence: projected text tokens, then condition faces.
        let text = tape.constant(cond.text.clone());
        let w_text = p(tape, l.text);
        let text_tokens = tape.matmul(text, w_text);
        let cb = tape.constant(cond.cond_boxes.clone());
        let w_cond = p(tape, l.cond_in);
        let b_cond = p(tape, l.cond_in_bias);
        let cond_tokens = tape.matmul(cb, w_cond);
        let cond_tokens = tape.add_row(cond_tokens, b_cond);
        let cmask = tape.constant(mask_column(&cond.cond_contact));
        let e_cc = p(tape, l.cond_contact);
        let cc = tape.matmul(cmask, e_cc);
        let cond_tokens = tape.add(cond_tokens, cc);
        let context = tape.concat_rows(text_tokens, cond_tokens);

        // Face tokens.
        let x = if self.config.use_state { state.boxes.clone() } else { Array2::zeros((n, 6)) };
        let x = tape.constant(x);
        let w_in = p(tape, l.state_in);
        let b_in = p(tape, l.state_in_bias);
        let h = tape.matmul(x, w_in);
        let mut h = tape.add_row(h, b_in);
        let tf = tape.constant(timestep_features(t, self.config.width));
        let w_t = p(tape, l.time);
        let b_t = p(tape, l.time_bias);
        let temb = tape.matmul(tf, w_t);
        let temb = tape.add_row(temb, b_t);
        h = tape.add_row(h, temb);
        let mask = tape.constant(mask_column(&state.contact_mask));
        let e_c = p(tape, l.contact);
        let ce = tape.matmul(mask, e_c);
        h = tape.add(h, ce);

        for b in &l.blocks {
            let sa = self.attention(tape, h, h, [b.self_q, b.self_k, b.self_v, b.self_o]);
            h = tape.add(h, sa);
            let ca = self.attention(tape, h, context, [b.cross_q, b.cross_k, b.cross_v, b.cross_o]);
            h = tape.add(h, ca);
            let w1 = p(tape, b.mlp_in);
            let b1 = p(tape, b.mlp_in_bias);
            let w2 = p(tape, b.mlp_out);
            let b2 = p(tape, b.mlp_out_bias);
            let m = tape.matmul(h, w1);
            let m = tape.add_row(m, b1);
            let m = tape.silu(m);
            let m = tape.matmul(m, w2);
            let m = tape.add_row(m, b2);
            h = tape.add(h, m);
        }
        let w_out = p(tape, l.out);
        let b_out = p(tape, l.out_bias);
        let o = tape.matmul(h, w_out);
        tape.add_row(o, b_out)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config,
            contact_slots: CONTACT_SLOTS,
            num_faces: self.num_faces,
            schedule: self.schedule.clone(),
            params: self
                .names
                .iter()
                .zip(&self.params)
                .map(|(name, a)| NamedTensor {
                    name: name.clone(),
                    rows: a.nrows(),
                    cols: a.ncols(),
                    data: a.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        if ck.version != CHECKPOINT_VERSION {
            return Err(GeoError::InvalidInput(format!("unsupported checkpoint version {}", ck.version)));
        }
        if ck.contact_slots != CONTACT_SLOTS {
            return Err(GeoError::ShapeMismatch(format!(
                "checkpoint has {} contact slots, expected {CONTACT_SLOTS}",
                ck.contact_slots
            )));
        }
        let mut model = Denoiser::new(ck.config, ck.schedule, ck.num_faces, 0);
        if ck.params.len() != model.params.len() {
            return Err(GeoError::ShapeMismatch(format!(
                "checkpoint has {} tensors, model needs {}",
                ck.params.len(),
                model.params.len()
            )));
        }
        for (k, t) in ck.params.into_iter().enumerate() {
            let want = model.params[k].dim();
            if t.name != model.names[k] || (t.rows, t.cols) != want {
                return Err(GeoError::ShapeMismatch(format!(
                    "tensor {} ({}×{}) does not match {} {:?}",
                    t.name, t.rows, t.cols, model.names[k], want
                )));
            }
            model.params[k] =
                Array2::from_shape_vec(want, t.data).map_err(|e| GeoError::ShapeMismatch(e.to_string()))?;
        }
        Ok(model)
    }
}

impl NoisePredictor for Denoiser {
    fn predict(&self, state: &BoxSet, t: usize, cond: &ConditionInputs) -> Array2<f64> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, state, t, cond);
        tape.value(out).clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Versioned JSON container for a trained denoiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: DenoiserConfig,
    pub contact_slots: usize,
    pub num_faces: usize,
    pub schedule: NoiseSchedule,
    pub params: Vec<NamedTensor>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::face::{FaceGrid, FaceKind};
    use crate::geometry::point::Point3;

    fn cond() -> ConditionInputs {
        let g = |z: f64| FaceGrid::from_fn(FaceKind::Planar, 1, |u, v| Point3::new(u, v, z)).unwrap();
        let part = PartModel::from_grids(vec![g(0.0), g(1.0), g(2.0)], vec![1], "").unwrap();
        ConditionInputs::new(&part, "a plate").unwrap()
    }

    fn randomized(seed: u64) -> Denoiser {
        let mut m = Denoiser::new(DenoiserConfig::default(), NoiseSchedule::default(), 5, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        for p in m.params_mut() {
            p.mapv_inplace(|v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v + 0.1 * z
            });
        }
        m
    }

    #[test]
    fn equivariant_on_non_contact_rows() {
        let m = randomized(7);
        let boxes = Array2::from_shape_fn((5, 6), |(i, j)| (i * 6 + j) as f64 * 0.1 - 1.0);
        let mask = vec![true, false, false, false, false];
        let s = BoxSet::new(boxes.clone(), mask.clone()).unwrap();
        let perm = [0, 3, 1, 4, 2];
        let pb = Array2::from_shape_fn((5, 6), |(i, j)| boxes[[perm[i], j]]);
        let sp = BoxSet::new(pb, mask).unwrap();
        let out = m.predict(&s, 300, &cond());
        let outp = m.predict(&sp, 300, &cond());
        for i in 0..5 {
            for j in 0..6 {
                assert!((outp[[i, j]] - out[[perm[i], j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = randomized(3);
        let json = serde_json::to_string(&m.to_checkpoint()).unwrap();
        let back = Denoiser::from_checkpoint(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.num_faces, 5);
    }

    #[test]
    fn conditioning_changes_output() {
        let m = randomized(11);
        let s = BoxSet::new(Array2::from_elem((5, 6), 0.3), vec![false; 5]).unwrap();
        let mut other = cond();
        other.cond_boxes[[0, 2]] += 1.0;
        assert_ne!(m.predict(&s, 100, &cond()), m.predict(&s, 100, &other));
    }
}
