//! Leakage-template derivation workbench: a testcase-generation DSL, a
//! deterministic microarchitecture simulator standing in for hardware, a
//! statistical analyzer that recovers the simulator's behavioral rules as
//! relations over instruction operands, and a matcher that finds template
//! instances in assembly listings and classifies access traces.

pub mod analyze;
pub mod archive;
pub mod config;
pub mod expand;
pub mod experiment;
pub mod geometry;
pub mod gts;
pub mod instantiate;
pub mod lt;
pub mod matcher;
pub mod report;
pub mod scenarios;
pub mod sim;

pub use geometry::{CacheGeometry, Field, PhysAddr};
