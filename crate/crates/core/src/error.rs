use thiserror::Error;

/// Errors raised across the navigation stack.
#[derive(Debug, Error)]
pub enum NavError {
    #[error("position ({x:.3}, {y:.3}) is outside the usable map area")]
    OutOfBounds { x: f64, y: f64 },
    #[error("surface normal z-component {nz:.4} exceeds the slope cap")]
    SlopeCap { nz: f64 },
    #[error("attitude singularity: cos(pitch) = {cos_pitch:.3e}")]
    AttitudeSingularity { cos_pitch: f64 },
    #[error("non-positive total vertical load {load:.3e} N")]
    DegenerateLoad { load: f64 },
    #[error("log timestamps are not uniformly spaced (expected dt {expected}, found {found} at entry {index})")]
    NonUniformLog { expected: f64, found: f64, index: usize },
    #[error("kernel matrix is not positive definite even with jitter {jitter:e}")]
    Conditioning { jitter: f64 },
    #[error("no GP model registered for terrain class `{0}`")]
    UnknownTerrain(String),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("goal is unreachable on the cost map")]
    Unreachable,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid map file: {0}")]
    MapFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl NavError {
    /// Short machine-readable tag used by the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            NavError::OutOfBounds { .. } => "out_of_bounds",
            NavError::SlopeCap { .. } => "slope_cap",
            NavError::AttitudeSingularity { .. } => "attitude_singularity",
            NavError::DegenerateLoad { .. } => "degenerate_load",
            NavError::NonUniformLog { .. } => "non_uniform_log",
            NavError::Conditioning { .. } => "conditioning",
            NavError::UnknownTerrain(_) => "unknown_terrain",
            NavError::InsufficientSamples { .. } => "insufficient_data",
            NavError::Unreachable => "unreachable",
            NavError::Config(_) => "config",
            NavError::MapFormat(_) => "map_format",
            NavError::Io(_) => "io",
            NavError::Json(_) | NavError::TomlDe(_) | NavError::TomlSer(_) => "serialization",
        }
    }
}

pub type Result<T> = std::result::Result<T, NavError>;
