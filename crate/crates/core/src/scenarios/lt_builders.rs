//! Canonical leakage templates for the behaviors the simulator implements.

use crate::geometry::{CacheGeometry, Field};
use crate::lt::{
    BehaviorRelations, CmpOp, LeakageTemplate, LtMetadata, Predicate, RelationStatus,
    TemplateSlot, Term,
};
use crate::sim::TESTED_GAP_MAX;
use std::collections::BTreeMap;

fn field(load: &str, f: Field) -> Term {
    Term::Field {
        load: load.into(),
        field: f,
    }
}

fn count(sym: &str) -> Term {
    Term::Count { symbol: sym.into() }
}

fn sub(a: Term, b: Term) -> Term {
    Term::Sub {
        lhs: Box::new(a),
        rhs: Box::new(b),
    }
}

fn stride_predicates() -> Vec<Predicate> {
    let delta12 = sub(field("l2", Field::Set), field("l1", Field::Set));
    let delta23 = sub(field("l3", Field::Set), field("l2", Field::Set));
    vec![
        Predicate::Cmp {
            lhs: delta23,
            op: CmpOp::Eq,
            rhs: delta12.clone(),
        },
        Predicate::InSet {
            term: delta12,
            values: vec![-4, -3, -2, -1, 1, 2, 3, 4],
        },
        Predicate::FieldEq {
            field: Field::Page,
            loads: vec!["l1".into(), "l2".into(), "l3".into()],
        },
    ]
}

/// The 3-load prefetching template: stride and page relations plus the
/// inter-load instruction count deciding how many lines are fetched.
/// Relations are ordered most-specific-first; the first match decides.
pub fn prefetch_lt(geom: &CacheGeometry) -> LeakageTemplate {
    let template = vec![
        TemplateSlot::Load { id: "l1".into() },
        TemplateSlot::Gap {
            symbol: "n1".into(),
            min: 0,
            max: 5,
        },
        TemplateSlot::Load { id: "l2".into() },
        TemplateSlot::Gap {
            symbol: "n2".into(),
            min: 0,
            max: 5,
        },
        TemplateSlot::Load { id: "l3".into() },
    ];
    let with_gap = |gaps: &[i64]| {
        let mut ps = stride_predicates();
        ps.push(Predicate::InSet {
            term: count("n2"),
            values: gaps.to_vec(),
        });
        ps
    };
    let relation_map = vec![
        BehaviorRelations {
            behavior: "P7".into(),
            status: RelationStatus::Conclusive,
            predicates: with_gap(&[4]),
        },
        BehaviorRelations {
            behavior: "P4".into(),
            status: RelationStatus::Conclusive,
            predicates: with_gap(&[3]),
        },
        BehaviorRelations {
            behavior: "P3".into(),
            status: RelationStatus::Conclusive,
            predicates: with_gap(&[0, 1, 2, 5, 6, 7, 8, 9, 10]),
        },
        BehaviorRelations {
            behavior: "P0".into(),
            status: RelationStatus::Conclusive,
            predicates: vec![],
        },
    ];
    let metadata = LtMetadata {
        geometry: geom.clone(),
        tested_counts: BTreeMap::from([
            ("n1".into(), (0, TESTED_GAP_MAX)),
            ("n2".into(), (0, TESTED_GAP_MAX)),
        ]),
        provenance: vec![
            "stride-prerequisites".into(),
            "intermediate-instructions".into(),
            "page-boundary".into(),
            "interleaved-streams".into(),
            "cache-hits".into(),
        ],
    };
    LeakageTemplate::assemble("prefetch-3load", template, relation_map, metadata)
        .expect("builtin template is well-formed")
}

/// The 5-load premature-eviction template: one cache set, a same-tag triple
/// in front, and the bus-successor exclusion between the first two loads.
pub fn previction_lt(geom: &CacheGeometry) -> LeakageTemplate {
    let mut slots = Vec::new();
    for i in 1..=5 {
        slots.push(TemplateSlot::Load {
            id: format!("l{i}"),
        });
        if i < 5 {
            slots.push(TemplateSlot::Gap {
                symbol: format!("n{i}"),
                min: 0,
                max: 5,
            });
        }
    }
    let all: Vec<String> = (1..=5).map(|i| format!("l{i}")).collect();
    let bus_values = geom.field_range(Field::Bus).value_count();
    let fire = vec![
        Predicate::FieldEq {
            field: Field::Set,
            loads: all.clone(),
        },
        Predicate::FieldEq {
            field: Field::Tag,
            loads: vec!["l1".into(), "l2".into(), "l3".into()],
        },
        Predicate::Cmp {
            lhs: field("l4", Field::Tag),
            op: CmpOp::Ne,
            rhs: field("l1", Field::Tag),
        },
        Predicate::Cmp {
            lhs: field("l5", Field::Tag),
            op: CmpOp::Ne,
            rhs: field("l1", Field::Tag),
        },
        Predicate::Cmp {
            lhs: field("l1", Field::Bus),
            op: CmpOp::Ne,
            rhs: Term::Mod {
                lhs: Box::new(Term::Add {
                    lhs: Box::new(field("l2", Field::Bus)),
                    rhs: Box::new(Term::Const { value: 1 }),
                }),
                modulus: bus_values,
            },
        },
    ];
    let relation_map = vec![
        BehaviorRelations {
            behavior: "previct".into(),
            status: RelationStatus::Conclusive,
            predicates: fire,
        },
        BehaviorRelations {
            behavior: "no-previct".into(),
            status: RelationStatus::Conclusive,
            predicates: vec![],
        },
    ];
    let mut tested = BTreeMap::new();
    for i in 1..=4 {
        tested.insert(format!("n{i}"), (0, 5));
    }
    let metadata = LtMetadata {
        geometry: geom.clone(),
        tested_counts: tested,
        provenance: vec![
            "minimal-code".into(),
            "instruction-order".into(),
            "tag-set-values".into(),
            "word-offsets".into(),
            "primed-cache".into(),
        ],
    };
    LeakageTemplate::assemble("previction-5load", slots, relation_map, metadata)
        .expect("builtin template is well-formed")
}

/// Eviction-strategy template over the (S, C, D, L) loop parameters: the
/// preloaded line is evicted once the loop touches at least
/// `associativity` distinct lines of the set.
pub fn eviction_lt(geom: &CacheGeometry) -> LeakageTemplate {
    let template = vec![TemplateSlot::Load { id: "victim".into() }];
    let relation_map = vec![
        BehaviorRelations {
            behavior: "evict".into(),
            status: RelationStatus::Conclusive,
            predicates: vec![Predicate::Cmp {
                lhs: count("covered_lines"),
                op: CmpOp::Ge,
                rhs: Term::Const {
                    value: geom.associativity() as i64,
                },
            }],
        },
        BehaviorRelations {
            behavior: "no-evict".into(),
            status: RelationStatus::Conclusive,
            predicates: vec![],
        },
    ];
    let metadata = LtMetadata {
        geometry: geom.clone(),
        tested_counts: BTreeMap::from([
            ("S".into(), (0, 8)),
            ("C".into(), (0, 4)),
            ("D".into(), (0, 4)),
            ("L".into(), (1, 2)),
            ("covered_lines".into(), (0, 16)),
        ]),
        provenance: vec!["eviction-grid".into()],
    };
    LeakageTemplate::assemble("eviction-strategy", template, relation_map, metadata)
        .expect("builtin template is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lt::{deserialize_lt, serialize_lt, Binding};

    #[test]
    fn prefetch_lt_round_trips() {
        let lt = prefetch_lt(&CacheGeometry::default());
        let back = deserialize_lt(&serialize_lt(&lt)).unwrap();
        assert_eq!(lt, back);
        assert_eq!(lt.behaviors, vec!["P7", "P4", "P3", "P0"]);
    }

    #[test]
    fn prefetch_lt_classifies_strides() {
        let geom = CacheGeometry::default();
        let lt = prefetch_lt(&geom);
        let bind = |sets: [u64; 3], n2: u64| {
            let mut b = Binding::default();
            for (i, s) in sets.iter().enumerate() {
                b.loads
                    .insert(format!("l{}", i + 1), geom.compose_addr(2, *s, 0).unwrap());
            }
            b.counts.insert("n1".into(), 0);
            b.counts.insert("n2".into(), n2);
            b
        };
        let g = &geom;
        let lt_of = |sets, n2| lt.classify_binding(&bind(sets, n2), g).unwrap().unwrap();
        assert_eq!(lt_of([8, 9, 10], 1), "P3");
        assert_eq!(lt_of([8, 9, 10], 3), "P4");
        assert_eq!(lt_of([8, 9, 10], 4), "P7");
        assert_eq!(lt_of([8, 9, 13], 0), "P0");
        assert_eq!(lt_of([8, 14, 20], 0), "P0"); // stride 6 exceeds the bound
        // out-of-range count is undecidable
        assert_eq!(
            lt.classify_binding(&bind([8, 9, 10], 40), g).unwrap(),
            None
        );
    }

    #[test]
    fn previction_lt_matches_the_window_rule() {
        let geom = CacheGeometry::default();
        let lt = previction_lt(&geom);
        let bind = |w1: u64, w2: u64| {
            let mut b = Binding::default();
            let words = [w1, w2, 1, 0, 0];
            for (i, w) in words.iter().enumerate() {
                let tag = if i < 3 { 10 } else { 10 + i as u64 };
                b.loads.insert(
                    format!("l{}", i + 1),
                    geom.compose_addr(tag, 0, w << 2).unwrap(),
                );
            }
            for i in 1..=4 {
                b.counts.insert(format!("n{i}"), 0);
            }
            b
        };
        assert_eq!(
            lt.classify_binding(&bind(8, 0), &geom).unwrap().unwrap(),
            "previct"
        );
        assert_eq!(
            lt.classify_binding(&bind(4, 0), &geom).unwrap().unwrap(),
            "no-previct"
        );
    }
}
