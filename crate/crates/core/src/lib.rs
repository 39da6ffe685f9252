//! Learning per-individual influence and susceptibility from information
//! cascades, plus the pairwise estimators, synthetic generators and metrics
//! used to benchmark the learned model.

pub mod baselines;
pub mod cascades;
pub mod cli;
pub mod error;
pub mod eval;
pub mod im;
pub mod node;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use node::NodeId;
