//! Outlier-robust planar pose graph optimization via convex relaxations.

pub mod baselines;
pub mod brute;
pub mod costs;
pub mod detect;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod harness;
pub mod posegraph;
pub mod relax;
pub mod rounding;
pub mod sdp;
pub mod synth;

pub use error::{Error, Result};
