//! Geometry-guided diffusion sampling for generating CAD parts that mate
//! with a given condition part.

pub mod assignment;
pub mod contact;
pub mod diffusion;
pub mod error;
pub mod fgw;
pub mod geometry;
pub mod guidance;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod synth;

pub use error::{GeoError, Result};
