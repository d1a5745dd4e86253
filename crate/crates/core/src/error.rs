use thiserror::Error;

/// Errors produced anywhere in the geoknit pipeline.
///
/// The `Display` strings of the geometric variants are stable identifiers
/// (`degenerate-box`, `empty-mesh`, ...) so callers and file-level tooling can
/// match on them.
#[derive(Error, Debug)]
pub enum GeoError {
    #[error("degenerate-box")]
    DegenerateBox,
    #[error("degenerate-normal")]
    DegenerateNormal,
    #[error("empty-mesh")]
    EmptyMesh,
    #[error("empty-model")]
    EmptyModel,
    #[error("empty-set")]
    EmptySet,
    #[error("invalid-cost")]
    InvalidCost,
    #[error("degenerate-segment")]
    DegenerateSegment,
    #[error("no-condition-contacts")]
    NoConditionContacts,
    #[error("not-watertight")]
    NotWatertight,
    #[error("zero-volume")]
    ZeroVolume,
    #[error("diverged")]
    Diverged,
    #[error("empty-dataset")]
    EmptyDataset,
    #[error("timestep {t} out of range (schedule has {steps} steps)")]
    TimestepOutOfRange { t: usize, steps: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

impl GeoError {
    /// True for failures caused by unreadable or ill-formed input files.
    pub fn is_malformed_input(&self) -> bool {
        matches!(
            self,
            GeoError::Io(_) | GeoError::Json(_) | GeoError::ShapeMismatch(_) | GeoError::InvalidInput(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, GeoError>;
