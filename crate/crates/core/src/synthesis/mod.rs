//! The synthesis pipeline: grid, search, verify, split, bootstrap, trim;
//! plus refinement and incremental expansion of a verified set.

mod cells;
mod config;
mod expand;
mod refine;
mod synthesize;

use serde::{Deserialize, Serialize};

pub use config::{BootstrapParams, GridMode, SynthesisConfig};
pub use expand::expand;
pub use refine::refine;
pub use synthesize::synthesize;

use crate::geometry::Cell;
use crate::policy::{AssignmentSet, Certificate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub verified_cells: usize,
    pub failed_cells: usize,
    pub bootstrapped_cells: usize,
    pub min_alpha: f64,
    pub mean_alpha: f64,
    pub total_signals: usize,
    pub initial_cells: usize,
    pub covering_ratio: f64,
    pub uncovered_samples: usize,
    /// Not serialized, so reruns write identical reports; the run manifest
    /// records timing.
    #[serde(skip)]
    pub wall_time: f64,
    /// Rates of the input set, for refinement runs.
    pub previous_min_alpha: Option<f64>,
    pub previous_mean_alpha: Option<f64>,
    pub certificate: Certificate,
}

/// Output of [`synthesize`] and [`refine`].
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub assignments: AssignmentSet,
    pub certificate: Certificate,
    pub report: SynthesisReport,
    /// Cells that neither verified directly nor bootstrapped.
    pub failed: Vec<Cell>,
}

/// `(min, mean)` of the per-triple certified rates.
pub fn alpha_stats(set: &AssignmentSet) -> (f64, f64) {
    if set.triples.is_empty() {
        return (0.0, 0.0);
    }
    let min = set.triples.iter().map(|t| t.alpha).fold(f64::INFINITY, f64::min);
    let mean = set.triples.iter().map(|t| t.alpha).sum::<f64>() / set.triples.len() as f64;
    (min, mean)
}
