//! Norms, regions, balls and the annulus covering grid.

mod grid;
mod index;
mod norm;
mod region;
mod sampling;

pub use grid::{
    annulus_count, build_annulus_grid, compute_rho, grid_count_bound, split_ball, split_depth,
    AnnulusGrid, Cell,
};
pub use index::BallIndex;
pub use norm::{wrap_angle, Metric, Norm, NormKind};
pub use region::{signed_distance, Ball, Region};
pub use sampling::Halton;
