//! Candidate selection, relation extraction and validation over bit tables.
//!
//! The single-column pass flags operands whose value distribution deviates
//! from uniformity; constraints come from their missing values. When that
//! yields nothing the pairwise pass looks for interrelated operand pairs
//! and fits exact linear relations, equal-difference chains, or excluded
//! lines (a line no row touches while everything off the line occurs).

use super::table::{nocc, select, BitTable, Cond};
use super::AnalyzeError;
use crate::geometry::BitRange;
use std::collections::{BTreeMap, BTreeSet, HashSet};

/// Candidate columns and column pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Candidates {
    pub single: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
}

/// An extracted relation over table columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Relation {
    /// Values of `range` in one column that never occur.
    ValueConstraint {
        col: usize,
        range: BitRange,
        missing: Vec<u64>,
    },
    /// y = a*x + b mod 2^width over `range` bits; explains every row.
    Linear {
        x: usize,
        y: usize,
        range: BitRange,
        a: u64,
        b: u64,
        modulus: u64,
    },
    /// No row satisfies y = a*x + b mod 2^width while every off-line value
    /// combination occurs.
    ExcludedLinear {
        x: usize,
        y: usize,
        range: BitRange,
        a: u64,
        b: u64,
        modulus: u64,
    },
    /// Consecutive signed differences over the chain columns are equal
    /// within every row.
    DeltaEqual { cols: Vec<usize>, range: BitRange },
    /// The common difference takes only these signed values.
    DeltaRange {
        cols: (usize, usize),
        range: BitRange,
        allowed: Vec<i64>,
    },
    /// All rows agree on the page field across these columns.
    SamePage { cols: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Valid,
    Invalid { witness_row: Option<u64>, reason: String },
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validation::Valid)
    }
}

/// Analysis result for one behavior class.
#[derive(Debug)]
pub struct ClassAnalysis {
    pub label: String,
    pub table: BitTable,
    pub candidates: Candidates,
    pub relations: Vec<(Relation, Validation)>,
}

impl ClassAnalysis {
    pub fn validated_relations(&self) -> Vec<&Relation> {
        self.relations
            .iter()
            .filter(|(_, v)| v.is_valid())
            .map(|(r, _)| r)
            .collect()
    }
}

fn uniform(count: u64, total: u64, values: u64) -> bool {
    count * values == total
}

/// Single-column pass, then the pairwise pass when no column is flagged.
pub fn candidate_selection(table: &BitTable) -> Result<Candidates, AnalyzeError> {
    let single = single_pass(table)?;
    let pairs = if single.is_empty() {
        pair_pass(table)?
    } else {
        Vec::new()
    };
    if single.is_empty() && pairs.is_empty() && table.var_ranges.iter().all(|r| r.is_none()) {
        return Err(AnalyzeError::DegenerateTable);
    }
    Ok(Candidates { single, pairs })
}

fn single_pass(table: &BitTable) -> Result<Vec<usize>, AnalyzeError> {
    let total = table.count();
    let mut flagged = Vec::new();
    for (col, range) in table.var_ranges.iter().enumerate() {
        let Some(range) = range else { continue };
        let values = range.value_count();
        for v in 0..values {
            let c = nocc(
                table,
                &Cond::ColEq {
                    col,
                    range: *range,
                    value: v,
                },
            )?;
            if !uniform(c, total, values) {
                flagged.push(col);
                break;
            }
        }
    }
    Ok(flagged)
}

fn pair_pass(table: &BitTable) -> Result<Vec<(usize, usize)>, AnalyzeError> {
    let total = table.count();
    let cols: Vec<usize> = table
        .var_ranges
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_some())
        .map(|(i, _)| i)
        .collect();
    let mut flagged = Vec::new();
    for (a, &i) in cols.iter().enumerate() {
        for &j in &cols[a + 1..] {
            let ri = table.var_ranges[i].unwrap();
            let rj = table.var_ranges[j].unwrap();
            let values = ri.value_count() * rj.value_count();
            // count joint occurrences in one scan
            let mut counts: BTreeMap<(u64, u64), u64> = BTreeMap::new();
            for (_, vals) in &table.rows {
                *counts
                    .entry((ri.slice(vals[i]), rj.slice(vals[j])))
                    .or_insert(0) += 1;
            }
            let seen: u64 = counts.len() as u64;
            let deviates = seen != values || counts.values().any(|&c| !uniform(c, total, values));
            if deviates {
                flagged.push((i, j));
            }
        }
    }
    Ok(flagged)
}

/// Extract relations for the given candidates. Pair relations are tried in
/// order: exact linear fit on the full varying span, equal-difference chain
/// across chained pairs, then excluded lines over sub-ranges.
pub fn extract_relations(
    table: &BitTable,
    candidates: &Candidates,
) -> Result<Vec<Relation>, AnalyzeError> {
    let mut out = Vec::new();

    for &col in &candidates.single {
        let range = table.var_ranges[col].expect("candidate column varies");
        let mut missing = Vec::new();
        for v in 0..range.value_count() {
            if nocc(
                table,
                &Cond::ColEq {
                    col,
                    range,
                    value: v,
                },
            )? == 0
            {
                missing.push(v);
            }
        }
        if !missing.is_empty() {
            out.push(Relation::ValueConstraint {
                col,
                range,
                missing,
            });
        }
    }

    let mut explained: HashSet<(usize, usize)> = HashSet::new();

    // exact fits on the full varying span, both orientations
    for &(i, j) in &candidates.pairs {
        let range = common_range(table, i, j);
        let Some(range) = range else { continue };
        let mut found = Vec::new();
        if let Some((a, b)) = exact_fit(table, i, j, range) {
            found.push(Relation::Linear {
                x: i,
                y: j,
                range,
                a,
                b,
                modulus: range.value_count(),
            });
        }
        if let Some((a, b)) = exact_fit(table, j, i, range) {
            found.push(Relation::Linear {
                x: j,
                y: i,
                range,
                a,
                b,
                modulus: range.value_count(),
            });
        }
        if !found.is_empty() {
            explained.insert((i, j));
            out.push(found.swap_remove(0));
        }
    }

    // equal-difference chain across the candidate columns
    let chain_cols: BTreeSet<usize> = candidates
        .pairs
        .iter()
        .filter(|p| !explained.contains(p))
        .flat_map(|(i, j)| [*i, *j])
        .collect();
    let chain: Vec<usize> = chain_cols.into_iter().collect();
    if chain.len() >= 3 {
        if let Some(range) = chain
            .iter()
            .map(|&c| table.var_ranges[c])
            .reduce(|a, b| match (a, b) {
                (Some(x), Some(y)) if x == y => Some(x),
                _ => None,
            })
            .flatten()
        {
            if delta_chain_holds(table, &chain, range) {
                let allowed = observed_deltas(table, chain[0], chain[1], range);
                for w in chain.windows(2) {
                    explained.insert((w[0], w[1]));
                }
                for &(i, j) in &candidates.pairs {
                    if chain.contains(&i) && chain.contains(&j) {
                        explained.insert((i, j));
                    }
                }
                out.push(Relation::DeltaEqual {
                    cols: chain.clone(),
                    range,
                });
                out.push(Relation::DeltaRange {
                    cols: (chain[0], chain[1]),
                    range,
                    allowed,
                });
            }
        }
    }

    // excluded lines over sub-ranges for still-unexplained pairs
    for &(i, j) in &candidates.pairs {
        if explained.contains(&(i, j)) {
            continue;
        }
        let Some(range) = common_range(table, i, j) else {
            continue;
        };
        'scan: for sub in subranges_widest_first(range) {
            // a linear fit on the sub-range also explains the pair
            for (x, y) in [(i, j), (j, i)] {
                if let Some((a, b)) = exact_fit(table, x, y, sub) {
                    out.push(Relation::Linear {
                        x,
                        y,
                        range: sub,
                        a,
                        b,
                        modulus: sub.value_count(),
                    });
                    explained.insert((i, j));
                    break 'scan;
                }
            }
            if let Some((x, y, a, b)) = excluded_line(table, i, j, sub) {
                out.push(Relation::ExcludedLinear {
                    x,
                    y,
                    range: sub,
                    a,
                    b,
                    modulus: sub.value_count(),
                });
                explained.insert((i, j));
                break 'scan;
            }
        }
    }

    // page agreement across the candidate columns; a side predicate that
    // only accompanies structural relations
    if out.is_empty() {
        return Ok(out);
    }
    let rel_cols: BTreeSet<usize> = if candidates.single.is_empty() {
        candidates.pairs.iter().flat_map(|(i, j)| [*i, *j]).collect()
    } else {
        candidates.single.iter().copied().collect()
    };
    if rel_cols.len() >= 2 {
        let cols: Vec<usize> = rel_cols.into_iter().collect();
        let pr = table.page_range;
        let agree = table.rows.iter().all(|(_, vals)| {
            let first = pr.slice(vals[cols[0]]);
            cols.iter().all(|&c| pr.slice(vals[c]) == first)
        });
        if agree {
            out.push(Relation::SamePage { cols });
        }
    }

    Ok(out)
}

fn common_range(table: &BitTable, i: usize, j: usize) -> Option<BitRange> {
    match (table.var_ranges[i], table.var_ranges[j]) {
        (Some(a), Some(b)) => Some(BitRange {
            lo: a.lo.min(b.lo),
            hi: a.hi.max(b.hi),
        }),
        _ => None,
    }
}

fn subranges_widest_first(range: BitRange) -> Vec<BitRange> {
    let mut subs = Vec::new();
    let width = range.width();
    for w in (1..=width).rev() {
        for lo in range.lo..=range.hi + 1 - w {
            subs.push(BitRange {
                lo,
                hi: lo + w - 1,
            });
        }
    }
    subs
}

/// Fit y = a*x + b mod N over all rows; succeeds only when one (a, b)
/// explains every row and x determines y.
fn exact_fit(table: &BitTable, x: usize, y: usize, range: BitRange) -> Option<(u64, u64)> {
    let n = range.value_count();
    let rows: Vec<(u64, u64)> = table
        .rows
        .iter()
        .map(|(_, vals)| (range.slice(vals[x]), range.slice(vals[y])))
        .collect();
    // candidate (a, b) from the first two distinct-x rows, else slope 0
    let (x0, y0) = rows.first().copied()?;
    let candidates: Vec<(u64, u64)> = match rows.iter().find(|(xv, _)| *xv != x0) {
        Some(&(x1, y1)) => {
            // solve a*(x1 - x0) = y1 - y0 mod n by scanning the slope space
            let dx = (x1 + n - x0) % n;
            let dy = (y1 + n - y0) % n;
            (0..n)
                .filter(|a| (a * dx) % n == dy)
                .map(|a| (a, (y0 + n - (a * x0) % n) % n))
                .collect()
        }
        None => vec![(0, y0 % n)],
    };
    candidates
        .into_iter()
        .find(|(a, b)| rows.iter().all(|(xv, yv)| (a * xv + b) % n == *yv))
}

fn delta_chain_holds(table: &BitTable, chain: &[usize], range: BitRange) -> bool {
    table.rows.iter().all(|(_, vals)| {
        let mut deltas = chain.windows(2).map(|w| {
            range.slice(vals[w[1]]) as i64 - range.slice(vals[w[0]]) as i64
        });
        let first = deltas.next();
        deltas.all(|d| Some(d) == first)
    })
}

fn observed_deltas(table: &BitTable, c0: usize, c1: usize, range: BitRange) -> Vec<i64> {
    let set: BTreeSet<i64> = table
        .rows
        .iter()
        .map(|(_, vals)| range.slice(vals[c1]) as i64 - range.slice(vals[c0]) as i64)
        .collect();
    set.into_iter().collect()
}

/// Find a line no row touches whose complement is fully covered.
/// Returns the lexicographically smallest (a, b) over both orientations.
fn excluded_line(
    table: &BitTable,
    i: usize,
    j: usize,
    range: BitRange,
) -> Option<(usize, usize, u64, u64)> {
    let n = range.value_count();
    if n > 256 {
        return None; // sub-range scans stay small by construction
    }
    let mut best: Option<(u64, u64, usize, usize)> = None;
    for (x, y) in [(i, j), (j, i)] {
        let mut present = vec![false; (n * n) as usize];
        for (_, vals) in &table.rows {
            let xv = range.slice(vals[x]);
            let yv = range.slice(vals[y]);
            present[(xv * n + yv) as usize] = true;
        }
        for a in 0..n {
            'next_b: for b in 0..n {
                for xv in 0..n {
                    let yv = (a * xv + b) % n;
                    if present[(xv * n + yv) as usize] {
                        continue 'next_b;
                    }
                }
                // tightness: every off-line combination occurs
                for xv in 0..n {
                    let on = (a * xv + b) % n;
                    for yv in 0..n {
                        if yv != on && !present[(xv * n + yv) as usize] {
                            continue 'next_b;
                        }
                    }
                }
                if best.is_none() || (a, b) < (best.unwrap().0, best.unwrap().1) {
                    best = Some((a, b, x, y));
                }
            }
        }
    }
    best.map(|(a, b, x, y)| (x, y, a, b))
}

/// Validate a relation: every row must satisfy it, and for constraint-style
/// relations every combination of unrelated varying bits must occur.
pub fn validate(table: &BitTable, relation: &Relation) -> Result<Validation, AnalyzeError> {
    match relation {
        Relation::ValueConstraint { col, range, missing } => {
            table.check_range(*col, *range)?;
            for (id, vals) in &table.rows {
                if missing.contains(&range.slice(vals[*col])) {
                    return Ok(Validation::Invalid {
                        witness_row: Some(*id),
                        reason: "row takes an excluded value".into(),
                    });
                }
            }
            coverage_check(table, &[(*col, *range)])
        }
        Relation::Linear { x, y, range, a, b, .. } => {
            table.check_range(*x, *range)?;
            table.check_range(*y, *range)?;
            let cond = Cond::LinearEq {
                x: *x,
                y: *y,
                range: *range,
                a: *a,
                b: *b,
            };
            let sat = select(table, &cond)?;
            if sat.len() as u64 != table.count() {
                let witness = table
                    .rows
                    .iter()
                    .enumerate()
                    .find(|(i, _)| !sat.contains(i))
                    .map(|(_, (id, _))| *id);
                return Ok(Validation::Invalid {
                    witness_row: witness,
                    reason: "row violates the linear relation".into(),
                });
            }
            coverage_check(table, &[(*x, *range), (*y, *range)])
        }
        Relation::ExcludedLinear { x, y, range, a, b, .. } => {
            table.check_range(*x, *range)?;
            table.check_range(*y, *range)?;
            let cond = Cond::LinearEq {
                x: *x,
                y: *y,
                range: *range,
                a: *a,
                b: *b,
            };
            let on_line = select(table, &cond)?;
            if let Some(&row) = on_line.first() {
                return Ok(Validation::Invalid {
                    witness_row: Some(table.rows[row].0),
                    reason: "row lies on the excluded line".into(),
                });
            }
            coverage_check(table, &[(*x, *range), (*y, *range)])
        }
        Relation::DeltaEqual { cols, range } => {
            for &c in cols {
                table.check_range(c, *range)?;
            }
            if delta_chain_holds(table, cols, *range) {
                Ok(Validation::Valid)
            } else {
                let witness = table
                    .rows
                    .iter()
                    .find(|(_, vals)| {
                        let mut deltas = cols.windows(2).map(|w| {
                            range.slice(vals[w[1]]) as i64 - range.slice(vals[w[0]]) as i64
                        });
                        let first = deltas.next();
                        !deltas.all(|d| Some(d) == first)
                    })
                    .map(|(id, _)| *id);
                Ok(Validation::Invalid {
                    witness_row: witness,
                    reason: "differences are not equal".into(),
                })
            }
        }
        Relation::DeltaRange { cols, range, allowed } => {
            table.check_range(cols.0, *range)?;
            table.check_range(cols.1, *range)?;
            let witness = table.rows.iter().find(|(_, vals)| {
                let d = range.slice(vals[cols.1]) as i64 - range.slice(vals[cols.0]) as i64;
                !allowed.contains(&d)
            });
            match witness {
                Some((id, _)) => Ok(Validation::Invalid {
                    witness_row: Some(*id),
                    reason: "difference outside the allowed set".into(),
                }),
                None => Ok(Validation::Valid),
            }
        }
        Relation::SamePage { cols } => {
            let pr = table.page_range;
            let witness = table.rows.iter().find(|(_, vals)| {
                let first = pr.slice(vals[cols[0]]);
                cols.iter().any(|&c| pr.slice(vals[c]) != first)
            });
            match witness {
                Some((id, _)) => Ok(Validation::Invalid {
                    witness_row: Some(*id),
                    reason: "pages differ".into(),
                }),
                None => Ok(Validation::Valid),
            }
        }
    }
}

/// Check that every combination of unrelated varying bits occurs, where
/// "unrelated" means varying bits of the relation's own columns that lie
/// outside the related range. Falls back to per-coordinate occurrence when
/// the full product is too large to enumerate.
fn coverage_check(
    table: &BitTable,
    related: &[(usize, BitRange)],
) -> Result<Validation, AnalyzeError> {
    let mut unrelated: Vec<(usize, BitRange)> = Vec::new();
    for &(col, rel) in related {
        let Some(vr) = table.var_ranges[col] else {
            continue;
        };
        for bit in vr.lo..=vr.hi {
            let covered = bit >= rel.lo && bit <= rel.hi;
            let varies = table.constant_mask[col] & (1u64 << bit) == 0;
            if !covered && varies {
                unrelated.push((col, BitRange { lo: bit, hi: bit }));
            }
        }
    }
    if unrelated.is_empty() {
        return Ok(Validation::Valid);
    }
    let product: u64 = unrelated
        .iter()
        .map(|(_, r)| r.value_count())
        .product();
    if product <= 1 << 12 {
        let mut assignment = vec![0u64; unrelated.len()];
        loop {
            let cond = Cond::And(
                unrelated
                    .iter()
                    .zip(&assignment)
                    .map(|((col, r), v)| Cond::ColEq {
                        col: *col,
                        range: *r,
                        value: *v,
                    })
                    .collect(),
            );
            if nocc(table, &cond)? == 0 {
                return Ok(Validation::Invalid {
                    witness_row: None,
                    reason: format!(
                        "unrelated combination {assignment:?} never occurs in the table"
                    ),
                });
            }
            // advance the mixed-radix counter
            let mut k = 0;
            loop {
                if k == unrelated.len() {
                    return Ok(Validation::Valid);
                }
                assignment[k] += 1;
                if assignment[k] < unrelated[k].1.value_count() {
                    break;
                }
                assignment[k] = 0;
                k += 1;
            }
        }
    } else {
        for (col, r) in &unrelated {
            for v in 0..r.value_count() {
                if nocc(
                    table,
                    &Cond::ColEq {
                        col: *col,
                        range: *r,
                        value: v,
                    },
                )? == 0
                {
                    return Ok(Validation::Invalid {
                        witness_row: None,
                        reason: format!("value {v} of column {col} never occurs"),
                    });
                }
            }
        }
        Ok(Validation::Valid)
    }
}

/// Candidate selection, extraction and validation for one class table.
/// Single-column constraints are processed first; the pairwise stage then
/// runs among the varying columns regardless, since stride-style classes
/// deviate from uniformity in every single column without excluding any
/// value.
pub fn analyze_class(
    label: &str,
    table: BitTable,
    _geom: &crate::geometry::CacheGeometry,
) -> ClassAnalysis {
    let candidates = candidate_selection(&table).unwrap_or_default();
    let mut relations = extract_relations(&table, &candidates).unwrap_or_default();
    let mut effective = candidates.clone();
    if candidates.pairs.is_empty() {
        if let Ok(pairs) = pair_pass(&table) {
            if !pairs.is_empty() {
                let pair_candidates = Candidates {
                    single: Vec::new(),
                    pairs: pairs.clone(),
                };
                let more = extract_relations(&table, &pair_candidates).unwrap_or_default();
                effective.pairs = pairs;
                for r in more {
                    if !relations.contains(&r) {
                        relations.push(r);
                    }
                }
            }
        }
    }
    let validated = relations
        .into_iter()
        .map(|r| {
            let v = validate(&table, &r).unwrap_or(Validation::Invalid {
                witness_row: None,
                reason: "validation errored".into(),
            });
            (r, v)
        })
        .collect();
    ClassAnalysis {
        label: label.to_string(),
        table,
        candidates: effective,
        relations: validated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyze::table::build_bit_table;
    use crate::analyze::testutil::{class_of_all, set_records, word_records};
    use crate::geometry::CacheGeometry;

    /// Word tuples of the previction class at reduced scale: three mutated
    /// loads where the class excludes bus(first) = bus(second) + 1 mod 4.
    fn previction_class_tuples() -> Vec<Vec<u64>> {
        let mut rows = Vec::new();
        for w0 in 0..16u64 {
            for w1 in 0..16u64 {
                if (w0 >> 2) == ((w1 >> 2) + 1) % 4 {
                    continue;
                }
                for w2 in 0..16u64 {
                    rows.push(vec![w0, w1, w2]);
                }
            }
        }
        rows
    }

    #[test]
    fn previction_table_flags_the_pair_and_extracts_the_excluded_line() {
        let geom = CacheGeometry::default();
        let records = word_records(&geom, &previction_class_tuples());
        let class = class_of_all(&records, "previct");
        let table = build_bit_table(&class, &records, &geom).unwrap();

        let candidates = candidate_selection(&table).unwrap();
        assert!(candidates.single.is_empty(), "word values stay uniform");
        assert!(candidates.pairs.contains(&(0, 1)));
        assert!(!candidates.pairs.contains(&(0, 2)));
        assert!(!candidates.pairs.contains(&(1, 2)));

        let rels = extract_relations(&table, &candidates).unwrap();
        let excl = rels
            .iter()
            .find_map(|r| match r {
                Relation::ExcludedLinear { x, y, a, b, range, modulus } => {
                    Some((*x, *y, *a, *b, *range, *modulus))
                }
                _ => None,
            })
            .expect("excluded line extracted");
        // y = x + 1 mod 4 over the bus bits, oriented second -> first
        assert_eq!(excl, (1, 0, 1, 1, crate::geometry::BitRange { lo: 4, hi: 5 }, 4));
        for r in &rels {
            assert!(validate(&table, r).unwrap().is_valid(), "{r:?}");
        }
    }

    #[test]
    fn stride_one_family_fits_linear() {
        let geom = CacheGeometry::new(64, 16, 4, 16, 4096, 32).unwrap();
        let tuples: Vec<Vec<u64>> = (0..14u64).map(|s| vec![s, s + 1, s + 2]).collect();
        let records = set_records(&geom, &tuples);
        let class = class_of_all(&records, "P3");
        let table = build_bit_table(&class, &records, &geom).unwrap();
        let analysis = analyze_class("P3", table, &geom);
        let fits: Vec<_> = analysis
            .validated_relations()
            .into_iter()
            .filter(|r| matches!(r, Relation::Linear { a: 1, b: 1, .. }))
            .cloned()
            .collect();
        assert!(
            fits.len() >= 2,
            "s2 = s1 + 1 and s3 = s2 + 1 expected, got {:?}",
            analysis.relations
        );
    }

    #[test]
    fn mixed_stride_family_yields_delta_chain() {
        let geom = CacheGeometry::new(64, 16, 4, 16, 4096, 32).unwrap();
        // all equal-stride triples with |d| <= 4 inside 16 sets
        let mut tuples = Vec::new();
        for s1 in 0..16i64 {
            for d in [-4i64, -3, -2, -1, 1, 2, 3, 4] {
                let (s2, s3) = (s1 + d, s1 + 2 * d);
                if (0..16).contains(&s2) && (0..16).contains(&s3) {
                    tuples.push(vec![s1 as u64, s2 as u64, s3 as u64]);
                }
            }
        }
        let records = set_records(&geom, &tuples);
        let class = class_of_all(&records, "P3");
        let table = build_bit_table(&class, &records, &geom).unwrap();
        let analysis = analyze_class("P3", table, &geom);
        let rels = analysis.validated_relations();
        assert!(
            rels.iter()
                .any(|r| matches!(r, Relation::DeltaEqual { cols, .. } if cols == &vec![0, 1, 2])),
            "{:?}",
            analysis.relations
        );
        let allowed = rels
            .iter()
            .find_map(|r| match r {
                Relation::DeltaRange { allowed, .. } => Some(allowed.clone()),
                _ => None,
            })
            .expect("delta range extracted");
        assert_eq!(allowed, vec![-4, -3, -2, -1, 1, 2, 3, 4]);
        assert!(rels
            .iter()
            .any(|r| matches!(r, Relation::SamePage { cols } if cols == &vec![0, 1, 2])));
    }

    #[test]
    fn uniform_table_has_no_candidates() {
        let geom = CacheGeometry::default();
        let tuples: Vec<Vec<u64>> = (0..16u64)
            .flat_map(|a| (0..16u64).map(move |b| vec![a, b]))
            .collect();
        let records = word_records(&geom, &tuples);
        let class = class_of_all(&records, "all");
        let table = build_bit_table(&class, &records, &geom).unwrap();
        let candidates = candidate_selection(&table).unwrap();
        assert!(candidates.single.is_empty());
        assert!(candidates.pairs.is_empty());
    }

    #[test]
    fn single_column_missing_values_become_constraints() {
        let geom = CacheGeometry::default();
        // first column never takes bus 3 (words 12..15)
        let mut tuples = Vec::new();
        for w0 in 0..12u64 {
            for w1 in 0..16u64 {
                tuples.push(vec![w0, w1]);
            }
        }
        let records = word_records(&geom, &tuples);
        let class = class_of_all(&records, "previct");
        let table = build_bit_table(&class, &records, &geom).unwrap();
        let candidates = candidate_selection(&table).unwrap();
        assert_eq!(candidates.single, vec![0]);
        let rels = extract_relations(&table, &candidates).unwrap();
        match &rels[0] {
            Relation::ValueConstraint { col: 0, missing, .. } => {
                assert_eq!(missing, &vec![12, 13, 14, 15]);
            }
            other => panic!("expected value constraint, got {other:?}"),
        }
    }

    #[test]
    fn wrong_stride_relation_is_invalid_with_witness() {
        let geom = CacheGeometry::new(64, 16, 4, 16, 4096, 32).unwrap();
        let tuples: Vec<Vec<u64>> = (0..6u64).map(|s| vec![s, s + 2, s + 4]).collect();
        let records = set_records(&geom, &tuples);
        let class = class_of_all(&records, "P3");
        let table = build_bit_table(&class, &records, &geom).unwrap();
        let range = table.var_ranges[0].unwrap();
        let wrong = Relation::Linear {
            x: 0,
            y: 1,
            range,
            a: 1,
            b: 1,
            modulus: range.value_count(),
        };
        match validate(&table, &wrong).unwrap() {
            Validation::Invalid { witness_row, .. } => assert!(witness_row.is_some()),
            Validation::Valid => panic!("stride-2 family cannot satisfy b=1"),
        }
    }

    #[test]
    fn coverage_failure_invalidates() {
        let geom = CacheGeometry::default();
        // bus exclusion plus an artificial gap: the first load never uses
        // word-low bits 11, so the bus relation loses coverage
        let tuples: Vec<Vec<u64>> = previction_class_tuples()
            .into_iter()
            .filter(|t| t[0] % 4 != 3)
            .collect();
        let records = word_records(&geom, &tuples);
        let class = class_of_all(&records, "previct");
        let table = build_bit_table(&class, &records, &geom).unwrap();
        let rel = Relation::ExcludedLinear {
            x: 1,
            y: 0,
            range: crate::geometry::BitRange { lo: 4, hi: 5 },
            a: 1,
            b: 1,
            modulus: 4,
        };
        match validate(&table, &rel).unwrap() {
            Validation::Invalid { reason, .. } => {
                assert!(reason.contains("never occurs"), "{reason}")
            }
            Validation::Valid => panic!("dropped rows must break coverage"),
        }
    }

    #[test]
    fn fit_uniqueness_over_small_moduli() {
        let geom = CacheGeometry::new(64, 16, 4, 16, 4096, 32).unwrap();
        let tuples: Vec<Vec<u64>> = (0..14u64).map(|s| vec![s, (3 * s + 2) % 16]).collect();
        let records = set_records(&geom, &tuples);
        let class = class_of_all(&records, "f");
        let table = build_bit_table(&class, &records, &geom).unwrap();
        let range = table.var_ranges[0].unwrap();
        let n = range.value_count();
        let mut fits = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let all = table.rows.iter().all(|(_, vals)| {
                    (a * range.slice(vals[0]) + b) % n == range.slice(vals[1])
                });
                if all {
                    fits.push((a, b));
                }
            }
        }
        assert_eq!(fits, vec![(3, 2)]);
    }
}
