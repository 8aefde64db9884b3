//! Nonparametric chain policies: sampled open-loop control signals attached
//! to a covering of the state space by norm balls, verified with Lipschitz
//! reachability bounds, and executed as a chain of nearest-ball lookups.
//!
//! The pipeline is [`synthesis::synthesize`] → [`policy::rollout`], with
//! [`synthesis::refine`] and [`synthesis::expand`] for improving or growing
//! an existing [`policy::AssignmentSet`].

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod policy;
pub mod search;
pub mod synthesis;
pub mod verification;

pub use error::{NcpError, Result};
