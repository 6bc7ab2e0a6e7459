//! End-to-end encodings of the leakage primitives, the branch-predictor
//! structure experiment, and the parameterized eviction strategy, all
//! running against the simulator.

mod branch_experiment;
mod channels;
mod eviction;
mod lt_builders;

pub use branch_experiment::{run_bp_experiment, BpError, BpExperiment};
pub use channels::{encode_decode, Channel, ChannelError};
pub use eviction::{
    eviction_gts, eviction_tag_sequence, lru_eviction_oracle, run_eviction_grid, EvictionParams,
};
pub use lt_builders::{eviction_lt, prefetch_lt, previction_lt};
