pub mod autograd;
pub mod boxset;
pub mod model;
pub mod sampler;
pub mod schedule;
pub mod text;
pub mod train;

pub use boxset::{BoxSet, CONTACT_SLOTS, MAX_FACES};
pub use model::{Checkpoint, ConditionInputs, Denoiser, DenoiserConfig, NoisePredictor};
pub use sampler::{reverse_step, reverse_step_with_noise, sample_chain, ula_neighbors, UlaParams};
pub use schedule::NoiseSchedule;
pub use text::embed_text;
pub use train::{train_denoiser, EpochLog, Optimizer, TrainConfig, TrainingExample};
