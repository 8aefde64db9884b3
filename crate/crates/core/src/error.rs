use thiserror::Error;

use crate::policy::{AssignmentSet, Certificate};
use crate::synthesis::Synthesis;

/// Errors raised across the synthesis pipeline.
#[derive(Debug, Error)]
pub enum NcpError {
    #[error("integration diverged at t = {time} (non-finite state)")]
    IntegrationDiverged { time: f64 },

    #[error("rollout diverged in segment {segment} at t = {time}")]
    RolloutDiverged { segment: usize, time: f64 },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("infeasible rate: {0}")]
    InfeasibleRate(String),

    #[error("ball radius {radius} is below the split floor {floor}")]
    MaxSplitsExceeded { radius: f64, floor: f64 },

    #[error("degenerate bootstrap candidate: distance to equilibrium {distance} <= radius {radius}")]
    DegenerateCandidate { distance: f64, radius: f64 },

    #[error("invalid config field `{field}`: {constraint}")]
    InvalidConfig { field: String, constraint: String },

    #[error("new region overlaps the certified region: {0}")]
    RegionOverlap(String),

    #[error("synthesis incomplete: {} uncovered samples, {} failed cells", uncovered.len(), partial.report.failed_cells)]
    SynthesisIncomplete {
        uncovered: Vec<Vec<f64>>,
        partial: Box<Synthesis>,
    },

    #[error("expansion incomplete: {} cells could not be certified", cells.len())]
    ExpansionIncomplete {
        cells: Vec<crate::geometry::Cell>,
        partial: Box<(AssignmentSet, Certificate)>,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NcpError>;

impl NcpError {
    pub(crate) fn config(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        NcpError::InvalidConfig {
            field: field.into(),
            constraint: constraint.into(),
        }
    }
}
