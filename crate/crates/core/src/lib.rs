//! Planning with learned skill-effect models in a tabletop block world.
//!
//! The crate bundles an analytic ground-truth world, a weighted A* planner
//! over sampled skill parameters, graph-network effect models trained from
//! scratch, the iterative plan/collect/train loop, and empirical checks of
//! the planner's error bounds.

pub mod cli;
pub mod error;
pub mod lifelong;
pub mod neural;
pub mod planner;
pub mod sem;
pub mod theory;
pub mod worldsim;

pub use error::{Error, Result};
