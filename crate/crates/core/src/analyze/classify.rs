//! Behavior classification with thresholded trial agreement.

use crate::archive::{Record, TrialSummary};
use std::collections::BTreeMap;

/// Supported classification keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKey {
    PrevictionOccurred,
    PrefetchCount,
    PrefetchedAddressSet,
    EvictionOfPreloaded,
    MispredictionRateBucket,
}

impl std::str::FromStr for ClassKey {
    type Err = super::AnalyzeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "previction-occurred" => Ok(ClassKey::PrevictionOccurred),
            "prefetch-count" => Ok(ClassKey::PrefetchCount),
            "prefetched-address-set" => Ok(ClassKey::PrefetchedAddressSet),
            "eviction-of-preloaded" => Ok(ClassKey::EvictionOfPreloaded),
            "misprediction-rate-bucket" => Ok(ClassKey::MispredictionRateBucket),
            other => Err(super::AnalyzeError::UnknownKey(other.to_string())),
        }
    }
}

impl ClassKey {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassKey::PrevictionOccurred => "previction-occurred",
            ClassKey::PrefetchCount => "prefetch-count",
            ClassKey::PrefetchedAddressSet => "prefetched-address-set",
            ClassKey::EvictionOfPreloaded => "eviction-of-preloaded",
            ClassKey::MispredictionRateBucket => "misprediction-rate-bucket",
        }
    }

    pub fn label_of(&self, t: &TrialSummary) -> String {
        match self {
            ClassKey::PrevictionOccurred => {
                if t.previction {
                    "previct".into()
                } else {
                    "no-previct".into()
                }
            }
            ClassKey::PrefetchCount => format!("P{}", t.prefetch_count),
            ClassKey::PrefetchedAddressSet => {
                let lines: Vec<String> =
                    t.prefetched_lines.iter().map(|l| format!("{l:#x}")).collect();
                format!("lines:{{{}}}", lines.join(","))
            }
            ClassKey::EvictionOfPreloaded => {
                if t.preloaded_evicted {
                    "evict".into()
                } else {
                    "no-evict".into()
                }
            }
            ClassKey::MispredictionRateBucket => match t.mispredictions.checked_mul(10) {
                Some(scaled) if t.branches > 0 => format!("mr{}", (scaled / t.branches) * 10),
                _ => "mr-none".into(),
            },
        }
    }
}

/// Per-member agreement statistics: trials matching the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberStat {
    pub id: u64,
    pub fires: u32,
    pub trials: u32,
}

/// One behavior class: its label and the testcases assigned to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorClass {
    pub label: String,
    pub members: Vec<u64>,
    pub stats: Vec<MemberStat>,
}

/// Partition records by behavior label. A testcase joins the class of its
/// modal per-trial label when that label holds in at least `threshold` of
/// the trials; otherwise it is excluded and counted as unstable.
pub fn classify(records: &[Record], key: ClassKey, threshold: f64) -> (Vec<BehaviorClass>, u64) {
    let mut classes: BTreeMap<String, BehaviorClass> = BTreeMap::new();
    let mut unstable = 0u64;
    for r in records {
        if r.trials.is_empty() {
            continue;
        }
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in &r.trials {
            *counts.entry(key.label_of(t)).or_insert(0) += 1;
        }
        let total = r.trials.len() as u32;
        let (label, fires) = counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
            .expect("nonempty trials");
        if f64::from(fires) < threshold * f64::from(total) {
            unstable += 1;
            continue;
        }
        let class = classes.entry(label.clone()).or_insert_with(|| BehaviorClass {
            label,
            members: Vec::new(),
            stats: Vec::new(),
        });
        class.members.push(r.id);
        class.stats.push(MemberStat {
            id: r.id,
            fires,
            trials: total,
        });
    }
    (classes.into_values().collect(), unstable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::MutCoord;
    use crate::geometry::PhysAddr;
    use crate::sim::{Counters, Observation};

    fn record(id: u64, trials: Vec<TrialSummary>) -> Record {
        Record {
            id,
            provenance: "seq".into(),
            coords: vec![MutCoord {
                instr_idx: 0,
                value: 0,
                addr: PhysAddr(0),
            }],
            run_count: trials.len() as u64,
            observation: Observation {
                final_cache: vec![],
                loads: vec![],
                previctions: vec![],
                prefetched: vec![],
                branches: vec![],
                counters: Counters::default(),
                probe_results: vec![],
            },
            trials,
        }
    }

    fn trial(previction: bool, evicted: bool) -> TrialSummary {
        TrialSummary {
            previction,
            prefetch_count: 0,
            prefetched_lines: vec![],
            preloaded_evicted: evicted,
            branches: 0,
            mispredictions: 0,
        }
    }

    #[test]
    fn empty_input_empty_classes() {
        let (classes, unstable) = classify(&[], ClassKey::PrevictionOccurred, 0.95);
        assert!(classes.is_empty());
        assert_eq!(unstable, 0);
    }

    #[test]
    fn partitions_by_previction() {
        let records = vec![
            record(0, vec![trial(true, false)]),
            record(1, vec![trial(false, false)]),
            record(2, vec![trial(true, false)]),
        ];
        let (classes, _) = classify(&records, ClassKey::PrevictionOccurred, 0.95);
        assert_eq!(classes.len(), 2);
        let previct = classes.iter().find(|c| c.label == "previct").unwrap();
        assert_eq!(previct.members, vec![0, 2]);
    }

    #[test]
    fn threshold_marks_unstable() {
        // 90% agreement: below a 95% threshold, excluded
        let mut trials = vec![trial(false, true); 9];
        trials.push(trial(false, false));
        let records = vec![record(0, trials)];
        let (classes, unstable) = classify(&records, ClassKey::EvictionOfPreloaded, 0.95);
        assert!(classes.is_empty());
        assert_eq!(unstable, 1);
        // the same record passes a 0.85 threshold
        let mut trials = vec![trial(false, true); 9];
        trials.push(trial(false, false));
        let (classes, unstable) = classify(&[record(0, trials)], ClassKey::EvictionOfPreloaded, 0.85);
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].label, "evict");
        assert_eq!(classes[0].stats[0].fires, 9);
        assert_eq!(unstable, 0);
    }
}
