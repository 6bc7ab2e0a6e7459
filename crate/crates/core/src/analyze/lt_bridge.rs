//! Turn analyzer output into a leakage template: translate validated
//! relations over bit-table columns into predicates over template loads.

use super::relations::{ClassAnalysis, Relation};
use super::FamilyAnalysis;
use crate::geometry::{BitRange, CacheGeometry, Field};
use crate::lt::{
    BehaviorRelations, CmpOp, LeakageTemplate, LtError, LtMetadata, Predicate, RelationStatus,
    TemplateSlot, Term,
};
use std::collections::BTreeMap;

/// Map a bit range onto the geometry field it covers exactly.
fn field_of_range(geom: &CacheGeometry, r: BitRange) -> Option<Field> {
    Field::ALL.into_iter().find(|f| geom.field_range(*f) == r)
}

fn load_id(col: usize) -> String {
    format!("l{}", col + 1)
}

fn field_term(col: usize, f: Field) -> Term {
    Term::Field {
        load: load_id(col),
        field: f,
    }
}

/// Translate one relation; None when the predicate language cannot express
/// it (multiplicative slopes, unnamed bit ranges).
fn translate(geom: &CacheGeometry, r: &Relation) -> Option<Vec<Predicate>> {
    match r {
        Relation::ValueConstraint { col, range, missing } => {
            let f = field_of_range(geom, *range)?;
            let present: Vec<i64> = (0..range.value_count())
                .filter(|v| !missing.contains(v))
                .map(|v| v as i64)
                .collect();
            Some(vec![Predicate::InSet {
                term: field_term(*col, f),
                values: present,
            }])
        }
        Relation::Linear { x, y, range, a, b, modulus } => {
            if *a != 1 {
                return None;
            }
            let f = field_of_range(geom, *range)?;
            Some(vec![Predicate::Cmp {
                lhs: field_term(*y, f),
                op: CmpOp::Eq,
                rhs: Term::Mod {
                    lhs: Box::new(Term::Add {
                        lhs: Box::new(field_term(*x, f)),
                        rhs: Box::new(Term::Const { value: *b as i64 }),
                    }),
                    modulus: *modulus,
                },
            }])
        }
        Relation::ExcludedLinear { x, y, range, a, b, modulus } => {
            if *a != 1 {
                return None;
            }
            let f = field_of_range(geom, *range)?;
            Some(vec![Predicate::Cmp {
                lhs: field_term(*y, f),
                op: CmpOp::Ne,
                rhs: Term::Mod {
                    lhs: Box::new(Term::Add {
                        lhs: Box::new(field_term(*x, f)),
                        rhs: Box::new(Term::Const { value: *b as i64 }),
                    }),
                    modulus: *modulus,
                },
            }])
        }
        Relation::DeltaEqual { cols, range } => {
            let f = field_of_range(geom, *range)?;
            let mut ps = Vec::new();
            for w in cols.windows(3) {
                ps.push(Predicate::Cmp {
                    lhs: Term::Sub {
                        lhs: Box::new(field_term(w[2], f)),
                        rhs: Box::new(field_term(w[1], f)),
                    },
                    op: CmpOp::Eq,
                    rhs: Term::Sub {
                        lhs: Box::new(field_term(w[1], f)),
                        rhs: Box::new(field_term(w[0], f)),
                    },
                });
            }
            Some(ps)
        }
        Relation::DeltaRange { cols, range, allowed } => {
            let f = field_of_range(geom, *range)?;
            Some(vec![Predicate::InSet {
                term: Term::Sub {
                    lhs: Box::new(field_term(cols.1, f)),
                    rhs: Box::new(field_term(cols.0, f)),
                },
                values: allowed.clone(),
            }])
        }
        Relation::SamePage { cols } => Some(vec![Predicate::FieldEq {
            field: Field::Page,
            loads: cols.iter().map(|c| load_id(*c)).collect(),
        }]),
    }
}

fn class_predicates(geom: &CacheGeometry, analysis: &ClassAnalysis) -> (Vec<Predicate>, bool) {
    let mut ps = Vec::new();
    let mut complete = true;
    for r in analysis.validated_relations() {
        match translate(geom, r) {
            Some(mut p) => ps.append(&mut p),
            None => complete = false,
        }
    }
    (ps, complete)
}

/// Assemble a leakage template from a family analysis. Behaviors with
/// more predicates come first so the most specific relation decides; a
/// behavior whose relations could not be derived or expressed is kept with
/// an inconclusive marker and matches as a fallback.
pub fn assemble_lt_from_analysis(
    name: &str,
    analysis: &FamilyAnalysis,
    geom: &CacheGeometry,
    provenance: Vec<String>,
) -> Result<LeakageTemplate, LtError> {
    let columns = analysis
        .per_class
        .first()
        .map(|c| c.table.columns.len())
        .unwrap_or(0);
    let template: Vec<TemplateSlot> = (0..columns)
        .map(|c| TemplateSlot::Load { id: load_id(c) })
        .collect();

    let mut behaviors: Vec<BehaviorRelations> = analysis
        .per_class
        .iter()
        .map(|class| {
            let (predicates, complete) = class_predicates(geom, class);
            let status = if complete && !predicates.is_empty() {
                RelationStatus::Conclusive
            } else {
                RelationStatus::Inconclusive
            };
            BehaviorRelations {
                behavior: class.label.clone(),
                status,
                predicates,
            }
        })
        .collect();
    behaviors.sort_by(|a, b| {
        b.predicates
            .len()
            .cmp(&a.predicates.len())
            .then_with(|| a.behavior.cmp(&b.behavior))
    });

    let metadata = LtMetadata {
        geometry: geom.clone(),
        tested_counts: BTreeMap::new(),
        provenance,
    };
    LeakageTemplate::assemble(name, template, behaviors, metadata)
}
