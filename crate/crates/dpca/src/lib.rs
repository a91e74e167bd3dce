//! Simulated multi-machine laboratory for distributed estimation of the
//! leading principal component: one-shot aggregation of local solutions,
//! iterative distributed eigensolvers, shift-and-invert with local
//! preconditioning, and numerical checkers for the associated bounds.

pub mod cluster;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod iterative;
pub mod linalg;
pub mod oneshot;
pub mod rng;
pub mod shift_invert;
pub mod theory;

pub use error::{Error, Result};
