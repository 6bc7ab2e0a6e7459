//! Observation archives: one JSON Lines record per testcase, preceded by a
//! meta record describing the run. Records are written in testcase-id order
//! so archives are byte-identical across worker counts and shardings.

use crate::expand::MutationMode;
use crate::geometry::{CacheGeometry, PhysAddr};
use crate::sim::{Observation, Replacement};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("archive parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("archive schema version {found} unsupported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("archive is missing its meta record")]
    MissingMeta,
}

/// First line of every archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMeta {
    pub schema: u32,
    pub geometry: CacheGeometry,
    pub policy: Replacement,
    pub seed: u64,
    pub mutation_mode: MutationMode,
    /// Instruction indices of mutated loads, the bit-table column order.
    pub targets: Vec<usize>,
    pub gts: String,
}

/// Per-trial behavior digest, enough to classify under any supported key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub previction: bool,
    pub prefetch_count: u32,
    pub prefetched_lines: Vec<u64>,
    pub preloaded_evicted: bool,
    pub branches: u64,
    pub mispredictions: u64,
}

impl TrialSummary {
    pub fn from_observation(obs: &Observation, pre_loads: &[PhysAddr], geom: &CacheGeometry) -> Self {
        let cached: std::collections::HashSet<u64> = obs
            .final_cache
            .iter()
            .flat_map(|(_, lines)| lines.iter().map(|(l, _)| *l))
            .collect();
        let preloaded_evicted = pre_loads
            .iter()
            .any(|a| !cached.contains(&geom.line_of(*a)));
        TrialSummary {
            previction: !obs.previctions.is_empty(),
            prefetch_count: obs.prefetched.len() as u32,
            prefetched_lines: {
                let mut v = obs.prefetched.clone();
                v.sort_unstable();
                v
            },
            preloaded_evicted,
            branches: obs.counters.branches,
            mispredictions: obs.counters.mispredictions,
        }
    }
}

/// Mutated-operand coordinate of one testcase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutCoord {
    pub instr_idx: usize,
    pub value: u64,
    pub addr: PhysAddr,
}

/// One testcase's archived outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: u64,
    /// Operator path of the variant this testcase came from.
    #[serde(default)]
    pub provenance: String,
    pub coords: Vec<MutCoord>,
    pub run_count: u64,
    pub observation: Observation,
    pub trials: Vec<TrialSummary>,
}

pub fn write_archive<W: Write>(
    out: &mut W,
    meta: &ArchiveMeta,
    records: &[Record],
) -> Result<(), ArchiveError> {
    let mut line = serde_json::to_string(meta).expect("meta serializes");
    line.push('\n');
    out.write_all(line.as_bytes())?;
    for r in records {
        let mut line = serde_json::to_string(r).expect("record serializes");
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn read_archive<R: BufRead>(input: R) -> Result<(ArchiveMeta, Vec<Record>), ArchiveError> {
    let mut lines = input.lines().enumerate();
    let meta: ArchiveMeta = match lines.next() {
        Some((i, line)) => {
            let line = line?;
            serde_json::from_str(&line).map_err(|e| ArchiveError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?
        }
        None => return Err(ArchiveError::MissingMeta),
    };
    if meta.schema != SCHEMA_VERSION {
        return Err(ArchiveError::SchemaVersion {
            found: meta.schema,
            expected: SCHEMA_VERSION,
        });
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: Record = serde_json::from_str(&line).map_err(|e| ArchiveError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        records.push(r);
    }
    records.sort_by_key(|r| r.id);
    Ok((meta, records))
}

/// Merge shard archives into one record list ordered by testcase id.
pub fn merge_records(mut shards: Vec<Vec<Record>>) -> Vec<Record> {
    let mut all: Vec<Record> = shards.drain(..).flatten().collect();
    all.sort_by_key(|r| r.id);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Counters;

    fn dummy_record(id: u64) -> Record {
        Record {
            id,
            provenance: "seq".into(),
            coords: vec![MutCoord {
                instr_idx: 0,
                value: id,
                addr: PhysAddr(id * 64),
            }],
            run_count: 1,
            observation: Observation {
                final_cache: vec![],
                loads: vec![],
                previctions: vec![],
                prefetched: vec![],
                branches: vec![],
                counters: Counters::default(),
                probe_results: vec![],
            },
            trials: vec![TrialSummary {
                previction: false,
                prefetch_count: 0,
                prefetched_lines: vec![],
                preloaded_evicted: false,
                branches: 0,
                mispredictions: 0,
            }],
        }
    }

    fn meta() -> ArchiveMeta {
        ArchiveMeta {
            schema: SCHEMA_VERSION,
            geometry: CacheGeometry::default(),
            policy: Replacement::Lru,
            seed: 1,
            mutation_mode: MutationMode::None,
            targets: vec![],
            gts: "M".into(),
        }
    }

    #[test]
    fn round_trip() {
        let records: Vec<Record> = (0..4).map(dummy_record).collect();
        let mut buf = Vec::new();
        write_archive(&mut buf, &meta(), &records).unwrap();
        let (m, rs) = read_archive(&buf[..]).unwrap();
        assert_eq!(m, meta());
        assert_eq!(rs, records);
    }

    #[test]
    fn shard_merge_restores_order() {
        let even: Vec<Record> = (0..6).step_by(2).map(dummy_record).collect();
        let odd: Vec<Record> = (1..6).step_by(2).map(dummy_record).collect();
        let merged = merge_records(vec![odd, even]);
        let ids: Vec<u64> = merged.iter().map(|r| r.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn schema_mismatch_rejected() {
        let mut m = meta();
        m.schema = 99;
        let mut buf = Vec::new();
        write_archive(&mut buf, &m, &[]).unwrap();
        assert!(matches!(
            read_archive(&buf[..]),
            Err(ArchiveError::SchemaVersion { found: 99, .. })
        ));
    }
}
