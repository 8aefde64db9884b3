//! System models, fixed-step integration and sampled system constants.

mod estimate;
mod integrate;
mod model;
pub mod models;
mod signal;

pub use estimate::{estimate_lipschitz, estimate_speed_bound, estimate_tube, EstimationParams, TubeEstimate};
pub use integrate::{integrate, integrate_final, integrate_flat, rk4_step, Rk4Scratch};
pub use model::{SystemModel, VectorField};
pub use models::ModelRegistry;
pub use signal::{steps_for, ControlSignal, Segment, Trajectory};
