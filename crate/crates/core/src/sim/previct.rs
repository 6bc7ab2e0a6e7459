//! Premature-eviction rule: a committed predicate over the last five demand
//! loads of one cache set.

use crate::geometry::{CacheGeometry, Field, PhysAddr};
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct LoadRecord {
    pub tag: u64,
    pub set: u64,
    pub bus: u64,
    pub line: u64,
    pub instr_idx: usize,
}

#[derive(Default)]
pub struct PrevictionWindow {
    records: VecDeque<LoadRecord>,
}

pub const WINDOW: usize = 5;

/// Outcome of a fired check: the line to evict (the triple's line).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrevictionFire {
    pub victim_line: u64,
    pub set: u64,
    pub instr_idx: usize,
}

impl PrevictionWindow {
    pub fn new() -> Self {
        PrevictionWindow {
            records: VecDeque::with_capacity(WINDOW),
        }
    }

    pub fn clear(&mut self) {
        self.records.clear();
    }

    pub fn push(&mut self, geom: &CacheGeometry, addr: PhysAddr, instr_idx: usize) {
        if self.records.len() == WINDOW {
            self.records.pop_front();
        }
        self.records.push_back(LoadRecord {
            tag: geom.extract_field(addr, Field::Tag),
            set: geom.extract_field(addr, Field::Set),
            bus: geom.extract_field(addr, Field::Bus),
            line: geom.line_of(addr),
            instr_idx,
        });
    }

    /// The rule fires iff all of:
    ///   (i)   the five window loads target one cache set;
    ///   (ii)  some three consecutive loads share one tag while the other
    ///         two carry tags different from it;
    ///   (iii) bus(first of the triple) != bus(second of the triple) + 1 mod 4.
    pub fn check(&self, geom: &CacheGeometry) -> Option<PrevictionFire> {
        if self.records.len() < WINDOW {
            return None;
        }
        let r: Vec<&LoadRecord> = self.records.iter().collect();
        let set0 = r[0].set;
        if !r.iter().all(|x| x.set == set0) {
            return None;
        }
        let bus_values = geom.field_range(Field::Bus).value_count();
        for p in 0..=WINDOW - 3 {
            let t = r[p].tag;
            if r[p + 1].tag != t || r[p + 2].tag != t {
                continue;
            }
            let others_differ = (0..WINDOW)
                .filter(|i| *i < p || *i > p + 2)
                .all(|i| r[i].tag != t);
            if !others_differ {
                continue;
            }
            if r[p].bus != (r[p + 1].bus + 1) % bus_values {
                return Some(PrevictionFire {
                    victim_line: r[p].line,
                    set: set0,
                    instr_idx: r[WINDOW - 1].instr_idx,
                });
            }
            return None; // at most one qualifying triple can exist
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(geom: &CacheGeometry, tag: u64, set: u64, word: u64) -> PhysAddr {
        geom.compose_addr(tag, set, word << 2).unwrap()
    }

    fn run(geom: &CacheGeometry, loads: &[PhysAddr]) -> Option<PrevictionFire> {
        let mut w = PrevictionWindow::new();
        let mut fired = None;
        for (i, a) in loads.iter().enumerate() {
            w.push(geom, *a, i);
            if let Some(f) = w.check(geom) {
                fired = Some(f);
            }
        }
        fired
    }

    #[test]
    fn bus_rule_fires_and_blocks() {
        let geom = CacheGeometry::default();
        // triple first/second bus = (2, 0): 2 != 1, fires
        let fires = run(
            &geom,
            &[
                addr(&geom, 10, 0, 8),  // bus 2
                addr(&geom, 10, 0, 0),  // bus 0
                addr(&geom, 10, 0, 1),  // bus 0
                addr(&geom, 11, 0, 0),
                addr(&geom, 12, 0, 0),
            ],
        );
        assert!(fires.is_some());
        // triple first/second bus = (1, 0): direct successor, no fire
        let blocked = run(
            &geom,
            &[
                addr(&geom, 10, 0, 4), // bus 1
                addr(&geom, 10, 0, 0), // bus 0
                addr(&geom, 10, 0, 1),
                addr(&geom, 11, 0, 0),
                addr(&geom, 12, 0, 0),
            ],
        );
        assert!(blocked.is_none());
    }

    #[test]
    fn permuted_offsets_flip_the_outcome() {
        // loads 1..3 share a tag at buses (3, 1, 0); the 2-1-3-5-4 ordering
        // fires while 2-3-1-5-4 does not, mirroring the permutation table
        let geom = CacheGeometry::default();
        let l1 = addr(&geom, 10, 0, 12); // bus 3
        let l2 = addr(&geom, 10, 0, 4); // bus 1
        let l3 = addr(&geom, 10, 0, 0); // bus 0
        let l4 = addr(&geom, 11, 0, 0);
        let l5 = addr(&geom, 12, 0, 0);
        assert!(run(&geom, &[l2, l1, l3, l5, l4]).is_some());
        assert!(run(&geom, &[l2, l3, l1, l5, l4]).is_none());
        // in-order triple fires: first/second buses (3, 1), 3 != 2
        assert!(run(&geom, &[l1, l2, l3, l4, l5]).is_some());
    }

    #[test]
    fn different_sets_never_fire() {
        let geom = CacheGeometry::default();
        assert!(run(
            &geom,
            &[
                addr(&geom, 10, 0, 8),
                addr(&geom, 10, 0, 0),
                addr(&geom, 10, 0, 1),
                addr(&geom, 11, 1, 0),
                addr(&geom, 12, 0, 0),
            ]
        )
        .is_none());
    }

    #[test]
    fn four_loads_never_fire() {
        let geom = CacheGeometry::default();
        assert!(run(
            &geom,
            &[
                addr(&geom, 10, 0, 8),
                addr(&geom, 10, 0, 0),
                addr(&geom, 10, 0, 1),
                addr(&geom, 11, 0, 0),
            ]
        )
        .is_none());
    }

    #[test]
    fn extra_same_tag_load_blocks() {
        // four loads of the triple tag leave no valid "other two"
        let geom = CacheGeometry::default();
        assert!(run(
            &geom,
            &[
                addr(&geom, 10, 0, 8),
                addr(&geom, 10, 0, 0),
                addr(&geom, 10, 0, 1),
                addr(&geom, 10, 0, 2),
                addr(&geom, 12, 0, 0),
            ]
        )
        .is_none());
    }
}
