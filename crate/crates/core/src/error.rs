use std::path::PathBuf;

use thiserror::Error;

use crate::classifier::TrainingTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("numerical blowup in sample {sample} at step {step} (|x| = {magnitude:e})")]
    NumericalBlowup {
        sample: usize,
        step: usize,
        magnitude: f64,
    },

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged {
        epoch: usize,
        trace: Box<TrainingTrace>,
    },

    #[error("degenerate geometry at t = {t}, m_lift = {m_lift}: classes {class_a} and {class_b} share a centroid")]
    DegenerateGeometry {
        t: f64,
        m_lift: usize,
        class_a: usize,
        class_b: usize,
    },

    #[error("interval estimation failed: {0}; try a longer t-grid")]
    EstimationFailed(String),

    #[error("all {0} sweep cells failed")]
    SweepFailed(usize),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::NonFinite(_) => "non_finite",
            Error::NumericalBlowup { .. } => "numerical_blowup",
            Error::TrainingDiverged { .. } => "training_diverged",
            Error::DegenerateGeometry { .. } => "degenerate_geometry",
            Error::EstimationFailed(_) => "estimation_failed",
            Error::SweepFailed(_) => "sweep_failed",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
