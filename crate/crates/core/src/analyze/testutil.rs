//! Shared builders for analyzer tests.

use crate::archive::{MutCoord, Record, TrialSummary};
use crate::geometry::CacheGeometry;
use crate::sim::{Counters, Observation};

pub fn empty_observation() -> Observation {
    Observation {
        final_cache: vec![],
        loads: vec![],
        previctions: vec![],
        prefetched: vec![],
        branches: vec![],
        counters: Counters::default(),
        probe_results: vec![],
    }
}

pub fn quiet_trial() -> TrialSummary {
    TrialSummary {
        previction: false,
        prefetch_count: 0,
        prefetched_lines: vec![],
        preloaded_evicted: false,
        branches: 0,
        mispredictions: 0,
    }
}

/// Records whose mutated operands are word offsets of same-set loads.
pub fn word_records(geom: &CacheGeometry, tuples: &[Vec<u64>]) -> Vec<Record> {
    tuples
        .iter()
        .enumerate()
        .map(|(i, words)| Record {
            id: i as u64,
            provenance: "seq".into(),
            coords: words
                .iter()
                .enumerate()
                .map(|(k, w)| MutCoord {
                    instr_idx: k,
                    value: *w,
                    addr: geom.compose_addr(0x40080, 0, w << 2).unwrap(),
                })
                .collect(),
            run_count: 1,
            observation: empty_observation(),
            trials: vec![quiet_trial()],
        })
        .collect()
}

/// Records whose mutated operands are set indices of same-tag loads.
pub fn set_records(geom: &CacheGeometry, tuples: &[Vec<u64>]) -> Vec<Record> {
    tuples
        .iter()
        .enumerate()
        .map(|(i, sets)| Record {
            id: i as u64,
            provenance: "seq".into(),
            coords: sets
                .iter()
                .enumerate()
                .map(|(k, s)| MutCoord {
                    instr_idx: k,
                    value: *s,
                    addr: geom.compose_addr(1, *s, 0).unwrap(),
                })
                .collect(),
            run_count: 1,
            observation: empty_observation(),
            trials: vec![quiet_trial()],
        })
        .collect()
}

pub fn class_of_all(records: &[Record], label: &str) -> super::BehaviorClass {
    super::BehaviorClass {
        label: label.to_string(),
        members: records.iter().map(|r| r.id).collect(),
        stats: vec![],
    }
}
