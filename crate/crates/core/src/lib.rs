//! Performance modelling of multi-mirror reflective optical wireless links
//! under pointing jitter and random path obstruction.

pub mod alloc;
pub mod analytic;
pub mod channel;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod rng;
pub mod scenario;
pub mod special;
pub mod table;
pub mod units;

pub use error::{Error, Result};
