use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed WAV: {0}")]
    WavFormat(String),

    #[error("malformed capsule layout: {0}")]
    LayoutFormat(String),

    #[error("malformed config: {0}")]
    ConfigFormat(String),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("malformed HOA dump: {0}")]
    HoaFormat(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("room too absorbent: Sabine absorption {alpha:.3} >= 1 for requested T60")]
    InfeasibleT60 { alpha: f64 },

    #[error("capsule grid ill-conditioned: condition number {cond:.3e} exceeds 1e6")]
    IllConditioned { cond: f64 },

    #[error("selection matched no frames or bins")]
    EmptySelection,

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("no matching candidate")]
    NotFound,

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize, checkpoint: Box<crate::mlp::MlpModel> },

    #[error("sampling infeasible: {0}")]
    Infeasible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
