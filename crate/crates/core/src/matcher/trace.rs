//! Access traces and their classification against a leakage template.

use crate::geometry::{CacheGeometry, PhysAddr};
use crate::lt::{Binding, LeakageTemplate, LtError};
use crate::matcher::UNDECIDABLE;
use crate::sim::INSTR_SIZE;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

/// One load of an access trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub instr_addr: u64,
    pub data_addr: u64,
}

pub type AccessTrace = Vec<TraceRecord>;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace holds fewer than three loads from distinct cache lines")]
    InsufficientTrace,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Lt(#[from] LtError),
}

/// Export the loads of an observation as an access trace, using the
/// simulator's instruction addressing.
pub fn trace_from_observation(obs: &crate::sim::Observation) -> AccessTrace {
    obs.loads
        .iter()
        .map(|l| TraceRecord {
            instr_addr: crate::sim::INSTR_BASE + l.instr_idx as u64 * INSTR_SIZE,
            data_addr: l.addr.value(),
        })
        .collect()
}

pub fn write_trace<W: Write>(out: &mut W, trace: &AccessTrace) -> Result<(), TraceError> {
    for r in trace {
        let mut line = serde_json::to_string(r).expect("record serializes");
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<AccessTrace, TraceError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: TraceRecord = serde_json::from_str(&line).map_err(|e| TraceError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

/// Classify a trace against a template.
///
/// Takes the first three loads that target pairwise-distinct cache lines,
/// computes the inter-load instruction counts from instruction-address
/// distances, and evaluates the template's relations in order. Counts
/// outside the template's tested ranges yield "undecidable".
pub fn classify_trace(
    trace: &AccessTrace,
    lt: &LeakageTemplate,
    geom: &CacheGeometry,
) -> Result<String, TraceError> {
    let mut picked: Vec<TraceRecord> = Vec::with_capacity(3);
    let mut lines = Vec::with_capacity(3);
    for r in trace {
        let line = geom.line_of(PhysAddr(r.data_addr));
        if !lines.contains(&line) {
            lines.push(line);
            picked.push(*r);
            if picked.len() == 3 {
                break;
            }
        }
    }
    if picked.len() < 3 {
        return Err(TraceError::InsufficientTrace);
    }

    let mut binding = Binding::default();
    for (i, r) in picked.iter().enumerate() {
        binding
            .loads
            .insert(format!("l{}", i + 1), geom.addr(r.data_addr));
    }
    for i in 0..2 {
        let distance = picked[i + 1].instr_addr.saturating_sub(picked[i].instr_addr);
        let between = (distance / INSTR_SIZE).saturating_sub(1);
        binding.counts.insert(format!("n{}", i + 1), between);
    }

    match lt.classify_binding(&binding, geom)? {
        Some(label) => Ok(label),
        None => Ok(UNDECIDABLE.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trips() {
        let trace = vec![
            TraceRecord {
                instr_addr: 0x1000,
                data_addr: 0x8000_0000,
            },
            TraceRecord {
                instr_addr: 0x1008,
                data_addr: 0x8000_0040,
            },
        ];
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        assert_eq!(read_trace(&buf[..]).unwrap(), trace);
    }

    #[test]
    fn short_trace_is_an_error() {
        let geom = CacheGeometry::default();
        let lt = crate::scenarios::prefetch_lt(&geom);
        // two loads of the same line plus one distinct line
        let trace = vec![
            TraceRecord {
                instr_addr: 0x1000,
                data_addr: 0x100,
            },
            TraceRecord {
                instr_addr: 0x1004,
                data_addr: 0x108,
            },
            TraceRecord {
                instr_addr: 0x1008,
                data_addr: 0x140,
            },
        ];
        assert!(matches!(
            classify_trace(&trace, &lt, &geom),
            Err(TraceError::InsufficientTrace)
        ));
    }
}
