//! Cascade logs and everything derived directly from them: parsing,
//! pruning, time windows, the diffusion network and per-node exposure
//! statistics.

mod exposure;
mod log;
mod network;

pub use exposure::{extract_exposures, AssembleMode, Diagnostics, ExposureKey, ExposureTable, ModeCounts};
pub use log::{parse_cascades, prune, split_by_time, CascadeEvent, CascadeLog, TimeSplit};
pub use network::{build_diffusion_network, DiffusionNetwork};
