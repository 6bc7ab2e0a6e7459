//! Bit tables: per-class matrices of mutated operand values, with the
//! `select`/`count`/`nocc` primitives relations are built from.

use super::{AnalyzeError, BehaviorClass};
use crate::archive::Record;
use crate::geometry::{BitRange, CacheGeometry, Field};
use std::collections::HashMap;

/// Matrix of operand bit patterns for one behavior class. Rows are sorted
/// by testcase id; one column per mutated load.
#[derive(Debug, Clone)]
pub struct BitTable {
    /// Instruction index per column.
    pub columns: Vec<usize>,
    /// (testcase id, full operand addresses per column).
    pub rows: Vec<(u64, Vec<u64>)>,
    pub width: u32,
    /// Bits that never vary, per column.
    pub constant_mask: Vec<u64>,
    /// Contiguous span of varying bits per column, None if fully constant.
    pub var_ranges: Vec<Option<BitRange>>,
    /// Page field range, for page-equality checks.
    pub page_range: BitRange,
}

/// Row predicate for `select`/`nocc`.
#[derive(Debug, Clone)]
pub enum Cond {
    True,
    /// Bits `range` of column equal `value`.
    ColEq {
        col: usize,
        range: BitRange,
        value: u64,
    },
    /// y = a*x + b mod 2^range.width()
    LinearEq {
        x: usize,
        y: usize,
        range: BitRange,
        a: u64,
        b: u64,
    },
    And(Vec<Cond>),
    Not(Box<Cond>),
}

pub fn build_bit_table(
    class: &BehaviorClass,
    records: &[Record],
    geom: &CacheGeometry,
) -> Result<BitTable, AnalyzeError> {
    if class.members.is_empty() {
        return Err(AnalyzeError::EmptyClass(class.label.clone()));
    }
    let by_id: HashMap<u64, &Record> = records.iter().map(|r| (r.id, r)).collect();
    let first = by_id[&class.members[0]];
    let columns: Vec<usize> = first.coords.iter().map(|c| c.instr_idx).collect();

    // structurally mixed families (subsets, merges) can put records with
    // different operand layouts in one class; keep the rows that share the
    // first member's column signature
    let mut rows = Vec::with_capacity(class.members.len());
    for id in &class.members {
        let r = by_id[id];
        let signature: Vec<usize> = r.coords.iter().map(|c| c.instr_idx).collect();
        if signature != columns {
            continue;
        }
        let values: Vec<u64> = r.coords.iter().map(|c| c.addr.value()).collect();
        rows.push((*id, values));
    }
    rows.sort_by_key(|(id, _)| *id);

    let width = geom.addr_bits();
    let ncols = columns.len();
    let mut constant_mask = vec![u64::MAX; ncols];
    if !rows.is_empty() {
        let base = rows[0].1.clone();
        for (_, vals) in &rows {
            for c in 0..ncols {
                // a bit stays in the mask while every row agrees with row 0
                constant_mask[c] &= !(vals[c] ^ base[c]);
            }
        }
    }
    let addr_mask = if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    };
    let var_ranges = constant_mask
        .iter()
        .map(|m| {
            let varying = !m & addr_mask;
            if varying == 0 {
                None
            } else {
                Some(BitRange {
                    lo: varying.trailing_zeros(),
                    hi: 63 - varying.leading_zeros(),
                })
            }
        })
        .collect();

    Ok(BitTable {
        columns,
        rows,
        width,
        constant_mask,
        var_ranges,
        page_range: geom.field_range(Field::Page),
    })
}

impl BitTable {
    pub fn count(&self) -> u64 {
        self.rows.len() as u64
    }

    pub fn check_range(&self, col: usize, range: BitRange) -> Result<(), AnalyzeError> {
        if col >= self.columns.len() || range.hi >= 64 || range.lo > range.hi {
            return Err(AnalyzeError::BadRange {
                col,
                lo: range.lo,
                hi: range.hi,
            });
        }
        Ok(())
    }

    fn eval(&self, cond: &Cond, values: &[u64]) -> bool {
        match cond {
            Cond::True => true,
            Cond::ColEq { col, range, value } => range.slice(values[*col]) == *value,
            Cond::LinearEq { x, y, range, a, b } => {
                let n = range.value_count();
                let xv = range.slice(values[*x]);
                let yv = range.slice(values[*y]);
                yv == (a.wrapping_mul(xv).wrapping_add(*b)) % n
            }
            Cond::And(cs) => cs.iter().all(|c| self.eval(c, values)),
            Cond::Not(c) => !self.eval(c, values),
        }
    }

    fn validate_cond(&self, cond: &Cond) -> Result<(), AnalyzeError> {
        match cond {
            Cond::True => Ok(()),
            Cond::ColEq { col, range, .. } => self.check_range(*col, *range),
            Cond::LinearEq { x, y, range, .. } => {
                self.check_range(*x, *range)?;
                self.check_range(*y, *range)
            }
            Cond::And(cs) => cs.iter().try_for_each(|c| self.validate_cond(c)),
            Cond::Not(c) => self.validate_cond(c),
        }
    }

    /// CSV export: one row per testcase, one binary-string column per
    /// operand, mirroring the published bit-table figure layout.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("testcase_id");
        for c in &self.columns {
            out.push_str(&format!(",load_{c}"));
        }
        out.push('\n');
        for (id, vals) in &self.rows {
            out.push_str(&id.to_string());
            for v in vals {
                out.push_str(&format!(",{v:0width$b}", width = self.width as usize));
            }
            out.push('\n');
        }
        out
    }
}

/// Rows whose fields satisfy the condition (indices into `table.rows`).
pub fn select(table: &BitTable, cond: &Cond) -> Result<Vec<usize>, AnalyzeError> {
    table.validate_cond(cond)?;
    Ok(table
        .rows
        .iter()
        .enumerate()
        .filter(|(_, (_, vals))| table.eval(cond, vals))
        .map(|(i, _)| i)
        .collect())
}

/// Occurrence count: composition of `count` and `select`.
pub fn nocc(table: &BitTable, cond: &Cond) -> Result<u64, AnalyzeError> {
    Ok(select(table, cond)?.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::{MutCoord, TrialSummary};
    use crate::sim::{Counters, Observation};

    pub(crate) fn synth_records(word_pairs: &[(u64, u64)], geom: &CacheGeometry) -> Vec<Record> {
        word_pairs
            .iter()
            .enumerate()
            .map(|(i, (w0, w1))| Record {
                id: i as u64,
                provenance: "seq".into(),
                coords: vec![
                    MutCoord {
                        instr_idx: 0,
                        value: *w0,
                        addr: geom.compose_addr(0x40080, 0, w0 << 2).unwrap(),
                    },
                    MutCoord {
                        instr_idx: 1,
                        value: *w1,
                        addr: geom.compose_addr(0x40080, 0, w1 << 2).unwrap(),
                    },
                ],
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
            })
            .collect()
    }

    fn class_of(records: &[Record]) -> BehaviorClass {
        BehaviorClass {
            label: "all".into(),
            members: records.iter().map(|r| r.id).collect(),
            stats: vec![],
        }
    }

    #[test]
    fn nocc_counts_missing_bus_rows() {
        let geom = CacheGeometry::default();
        // previction-style table: first-load bus 1 rows are missing
        let mut pairs = Vec::new();
        for w0 in 0..16u64 {
            if (w0 >> 2) & 3 == 1 {
                continue;
            }
            pairs.push((w0, 0u64));
        }
        let records = synth_records(&pairs, &geom);
        let table = build_bit_table(&class_of(&records), &records, &geom).unwrap();
        let bus = geom.field_range(Field::Bus);
        let n = nocc(
            &table,
            &Cond::ColEq {
                col: 0,
                range: bus,
                value: 1,
            },
        )
        .unwrap();
        assert_eq!(n, 0);
        assert_eq!(nocc(&table, &Cond::True).unwrap(), 12);
    }

    #[test]
    fn partition_law() {
        let geom = CacheGeometry::default();
        let pairs: Vec<(u64, u64)> = (0..16).map(|w| (w, 15 - w)).collect();
        let records = synth_records(&pairs, &geom);
        let table = build_bit_table(&class_of(&records), &records, &geom).unwrap();
        let c = Cond::ColEq {
            col: 0,
            range: BitRange { lo: 2, hi: 3 },
            value: 2,
        };
        let a = nocc(&table, &c).unwrap();
        let b = nocc(&table, &Cond::Not(Box::new(c))).unwrap();
        assert_eq!(a + b, table.count());
    }

    #[test]
    fn single_row_table_is_all_constant() {
        let geom = CacheGeometry::default();
        let records = synth_records(&[(5, 9)], &geom);
        let table = build_bit_table(&class_of(&records), &records, &geom).unwrap();
        assert!(table.var_ranges.iter().all(|r| r.is_none()));
    }

    #[test]
    fn var_range_spans_word_bits() {
        let geom = CacheGeometry::default();
        let pairs: Vec<(u64, u64)> = (0..16).flat_map(|a| (0..16).map(move |b| (a, b))).collect();
        let records = synth_records(&pairs, &geom);
        let table = build_bit_table(&class_of(&records), &records, &geom).unwrap();
        assert_eq!(table.var_ranges[0], Some(BitRange { lo: 2, hi: 5 }));
        assert_eq!(table.var_ranges[1], Some(BitRange { lo: 2, hi: 5 }));
    }

    #[test]
    fn mixed_layout_rows_are_skipped() {
        let geom = CacheGeometry::default();
        let mut records = synth_records(&[(1, 2), (3, 4)], &geom);
        // a record from a structurally different variant: one operand only
        records.push(Record {
            id: 9,
            provenance: "subset[1]/seq".into(),
            coords: vec![MutCoord {
                instr_idx: 0,
                value: 5,
                addr: geom.compose_addr(0x40080, 0, 5 << 2).unwrap(),
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
        });
        let mut class = class_of(&records);
        class.members = vec![0, 1, 9];
        let table = build_bit_table(&class, &records, &geom).unwrap();
        assert_eq!(table.rows.len(), 2);
    }

    #[test]
    fn bad_range_rejected() {
        let geom = CacheGeometry::default();
        let records = synth_records(&[(0, 1), (1, 2)], &geom);
        let table = build_bit_table(&class_of(&records), &records, &geom).unwrap();
        assert!(matches!(
            nocc(
                &table,
                &Cond::ColEq {
                    col: 7,
                    range: BitRange { lo: 0, hi: 1 },
                    value: 0
                }
            ),
            Err(AnalyzeError::BadRange { col: 7, .. })
        ));
    }

    #[test]
    fn csv_has_binary_rows() {
        let geom = CacheGeometry::default();
        let records = synth_records(&[(1, 2)], &geom);
        let table = build_bit_table(&class_of(&records), &records, &geom).unwrap();
        let csv = table.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "testcase_id,load_0,load_1");
        let row = lines.next().unwrap();
        assert!(row.starts_with("0,"));
        assert_eq!(row.split(',').nth(1).unwrap().len(), 32);
    }
}
