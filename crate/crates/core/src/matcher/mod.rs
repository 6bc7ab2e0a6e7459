//! Static assembly-pattern matching and dynamic trace classification.
//!
//! The static half scans textual disassembly for instruction patterns with
//! operand capture groups and backreferences; the dynamic half classifies
//! load traces against a leakage template's relations.

mod confusion;
pub mod corpus;
mod listing;
mod pattern;
mod trace;

pub use confusion::{confusion_report, ConfusionMatrix};
pub use listing::{parse_listing, AsmInstr, AsmListing, InstrClass, MnemonicTable, ParseOutcome};
pub use pattern::{compile_pattern, match_pattern, AsmPattern, CandidateSection, PatternError};
pub use trace::{
    classify_trace, read_trace, trace_from_observation, write_trace, AccessTrace, TraceError,
    TraceRecord,
};

pub const UNDECIDABLE: &str = "undecidable";
