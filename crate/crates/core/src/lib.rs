//! Numerical laboratory for time-frequency model sums: intervals and grids,
//! tiles and 1-trees, adapted wave packets, model-sum evaluation, maximal and
//! singular-integral operators, and the tree-decomposition pipeline.

pub mod decomposition;
pub mod error;
pub mod grids;
pub mod harness;
pub mod intervals;
pub mod packets;
pub mod model_sum;
pub mod operators;
pub mod par;
pub mod rng;
pub mod signal;
pub mod tiles;

pub use error::{LabError, Result};
