//! WaDiRo-SCNN: Wasserstein distributionally robust shallow convex neural
//! networks trained by exact conic programs, with physics constraints,
//! post-training ε-stability certification and robustness benchmarks.

pub mod conic;
pub mod data;
pub mod error;
pub mod guarantees;
pub mod harness;
pub mod model;
pub mod robustness;
pub mod train;

pub use error::{Error, Result};
