//! Geometry-guided search around the reverse diffusion chain.

pub mod config;
pub mod costs;
pub mod decode;
pub mod predictor;
pub mod search;

pub use config::GuidanceConfig;
pub use costs::{c_angle, c_len, c_pos, c_shape, d_geo, ShapeWeights};
pub use decode::{decode_part, decode_rows};
pub use predictor::{predict_guiding_sample, FaceOptimVariables, GuidingSample};
pub use search::{candidate_scores, generate, generation_mask, select_candidate, GuidanceRecord, GuidedSampler};
