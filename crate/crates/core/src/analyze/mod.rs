//! Classifier and analyzer: partition observations into behavior classes,
//! build per-class bit tables of mutated operands, and extract validated
//! constraints and linear relations from them.

mod classify;
mod lt_bridge;
mod relations;
mod table;
#[cfg(test)]
pub(crate) mod testutil;

pub use classify::{classify, BehaviorClass, ClassKey, MemberStat};
pub use lt_bridge::assemble_lt_from_analysis;
pub use relations::{
    analyze_class, extract_relations, validate, Candidates, ClassAnalysis, Relation, Validation,
};
pub use table::{build_bit_table, nocc, select, BitTable, Cond};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalyzeError {
    #[error("unknown classification key `{0}`")]
    UnknownKey(String),
    #[error("bit range {lo}..{hi} invalid for column {col}")]
    BadRange { col: usize, lo: u32, hi: u32 },
    #[error("bit table has no varying operand bits")]
    DegenerateTable,
    #[error("class `{0}` is empty")]
    EmptyClass(String),
}

use crate::archive::Record;
use crate::geometry::CacheGeometry;

/// Full analysis of one experiment family: classes plus per-class relations.
#[derive(Debug)]
pub struct FamilyAnalysis {
    pub classes: Vec<BehaviorClass>,
    pub unstable: u64,
    pub per_class: Vec<ClassAnalysis>,
}

/// Classify, build tables, and run extraction for every class that has a
/// usable bit table. Classes whose tables are degenerate (nothing varies)
/// get an empty relation list.
pub fn analyze_family(
    records: &[Record],
    key: ClassKey,
    threshold: f64,
    geom: &CacheGeometry,
) -> Result<FamilyAnalysis, AnalyzeError> {
    let (classes, unstable) = classify(records, key, threshold);
    let mut per_class = Vec::with_capacity(classes.len());
    for class in &classes {
        let table = build_bit_table(class, records, geom)?;
        per_class.push(analyze_class(&class.label, table, geom));
    }
    Ok(FamilyAnalysis {
        classes,
        unstable,
        per_class,
    })
}
