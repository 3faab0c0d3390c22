//! Sequential mixed-distance designs for two-layer computer simulators.
//!
//! The inner simulator maps `x in [0,1]^K` to `L` outputs that become part of
//! the outer simulator's input. Designs are grown one point at a time from a
//! sliced Latin hypercube candidate pool, picking the candidate whose
//! predicted inner outputs sit farthest (in the φ_q sense) from the outputs
//! already observed, where the distance accounts for the uncertainty of the
//! Gaussian-process surrogates of the principal-component scores.

pub mod bench;
pub mod design;
pub mod engine;
pub mod error;
pub mod gp;
pub mod metrics;
pub mod pca;
pub mod rng;

pub use error::{Result, SmddError};
