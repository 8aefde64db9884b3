//! The chain policy: assignment sets, the normalized nearest-neighbor index
//! map, closed-loop rollout and certified constants.

mod assignment;
mod certificate;
mod rollout;

pub use assignment::{AssignmentSet, ModelRef, Triple, TripleKind, SCHEMA_VERSION};
pub use certificate::{certificate_constants, Certificate, Constants, CoverageSummary};
pub use rollout::{chain_points, envelope_check, rollout, EnvelopeCheck};
