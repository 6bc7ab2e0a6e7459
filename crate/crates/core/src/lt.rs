//! Leakage templates: an abstract code template, a set of distinguishable
//! behaviors, and an ordered behavior -> predicate map over the template's
//! attributes, with versioned JSON serialization.

use crate::geometry::{CacheGeometry, Field, PhysAddr};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const LT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LtError {
    #[error("schema version {found} unsupported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("parse error at {path}: {msg}")]
    ParseError { path: String, msg: String },
    #[error("predicate references unbound load `{0}`")]
    MissingBinding(String),
    #[error("predicate references unbound count `{0}`")]
    MissingCount(String),
    #[error("relation map references `{symbol}` absent from the code template")]
    UnboundSymbol { symbol: String },
}

/// Slots of the abstract code template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemplateSlot {
    /// A load with a symbolic operand id (`l1`, `l2`, ...).
    Load { id: String },
    /// A run of non-load instructions counted by `symbol`, bounded for
    /// static matching.
    Gap { symbol: String, min: u64, max: u64 },
}

/// Terms of the predicate language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum Term {
    /// An address field of a template load.
    Field { load: String, field: Field },
    /// An instruction-count symbol (`n1`, `n2`, ...) or an experiment
    /// parameter.
    Count { symbol: String },
    Const { value: i64 },
    Add { lhs: Box<Term>, rhs: Box<Term> },
    Sub { lhs: Box<Term>, rhs: Box<Term> },
    /// lhs mod modulus (always nonnegative).
    Mod { lhs: Box<Term>, modulus: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Eq,
    Ne,
    Le,
    Lt,
    Ge,
    Gt,
}

/// Conjunct of a behavior's relation. Conjunction only; negation is
/// expressed through `Ne` comparisons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "p", rename_all = "snake_case")]
pub enum Predicate {
    Cmp { lhs: Term, op: CmpOp, rhs: Term },
    InRange { term: Term, lo: i64, hi: i64 },
    InSet { term: Term, values: Vec<i64> },
    /// extract_field agrees across the named loads.
    FieldEq { field: Field, loads: Vec<String> },
}

/// Whether a behavior's relations were conclusively derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationStatus {
    Conclusive,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorRelations {
    pub behavior: String,
    pub status: RelationStatus,
    /// Conjunction; empty means "matches anything" (fallback behavior).
    pub predicates: Vec<Predicate>,
}

/// Tested parameter ranges; counts outside them make classification
/// undecidable instead of guessing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LtMetadata {
    pub geometry: CacheGeometry,
    /// symbol -> (min, max) tested values.
    pub tested_counts: BTreeMap<String, (u64, u64)>,
    pub provenance: Vec<String>,
}

/// The leakage template triple: code template, behavior set, and ordered
/// behavior -> predicates map. Relations are checked in order; the first
/// match decides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageTemplate {
    pub schema: u32,
    pub name: String,
    pub code_template: Vec<TemplateSlot>,
    pub behaviors: Vec<String>,
    pub relation_map: Vec<BehaviorRelations>,
    pub metadata: LtMetadata,
}

/// Concrete values a predicate is evaluated against.
#[derive(Debug, Clone, Default)]
pub struct Binding {
    pub loads: BTreeMap<String, PhysAddr>,
    pub counts: BTreeMap<String, u64>,
}

impl LeakageTemplate {
    /// Assemble a template, checking that every load mentioned by the
    /// relation map exists in the code template.
    pub fn assemble(
        name: &str,
        code_template: Vec<TemplateSlot>,
        relation_map: Vec<BehaviorRelations>,
        metadata: LtMetadata,
    ) -> Result<Self, LtError> {
        let loads: Vec<&str> = code_template
            .iter()
            .filter_map(|s| match s {
                TemplateSlot::Load { id } => Some(id.as_str()),
                TemplateSlot::Gap { .. } => None,
            })
            .collect();
        let counts: Vec<&str> = code_template
            .iter()
            .filter_map(|s| match s {
                TemplateSlot::Gap { symbol, .. } => Some(symbol.as_str()),
                TemplateSlot::Load { .. } => None,
            })
            .collect();
        for br in &relation_map {
            for p in &br.predicates {
                for sym in predicate_loads(p) {
                    if !loads.contains(&sym.as_str()) {
                        return Err(LtError::UnboundSymbol { symbol: sym });
                    }
                }
                for sym in predicate_counts(p) {
                    if !counts.contains(&sym.as_str())
                        && !metadata.tested_counts.contains_key(&sym)
                    {
                        return Err(LtError::UnboundSymbol { symbol: sym });
                    }
                }
            }
        }
        let behaviors = relation_map.iter().map(|b| b.behavior.clone()).collect();
        Ok(LeakageTemplate {
            schema: LT_SCHEMA_VERSION,
            name: name.to_string(),
            code_template,
            behaviors,
            relation_map,
            metadata,
        })
    }

    /// Evaluate the relation map against a binding: the first behavior
    /// whose conjunction holds, or None when counts fall outside the
    /// tested ranges ("undecidable").
    pub fn classify_binding(
        &self,
        binding: &Binding,
        geom: &CacheGeometry,
    ) -> Result<Option<String>, LtError> {
        for (sym, (lo, hi)) in &self.metadata.tested_counts {
            if let Some(v) = binding.counts.get(sym) {
                if v < lo || v > hi {
                    return Ok(None);
                }
            }
        }
        for br in &self.relation_map {
            let mut all = true;
            for p in &br.predicates {
                if !eval_predicate(p, binding, geom)? {
                    all = false;
                    break;
                }
            }
            if all {
                return Ok(Some(br.behavior.clone()));
            }
        }
        Ok(None)
    }
}

fn predicate_loads(p: &Predicate) -> Vec<String> {
    fn term_loads(t: &Term, out: &mut Vec<String>) {
        match t {
            Term::Field { load, .. } => out.push(load.clone()),
            Term::Add { lhs, rhs } | Term::Sub { lhs, rhs } => {
                term_loads(lhs, out);
                term_loads(rhs, out);
            }
            Term::Mod { lhs, .. } => term_loads(lhs, out),
            Term::Count { .. } | Term::Const { .. } => {}
        }
    }
    let mut out = Vec::new();
    match p {
        Predicate::Cmp { lhs, rhs, .. } => {
            term_loads(lhs, &mut out);
            term_loads(rhs, &mut out);
        }
        Predicate::InRange { term, .. } | Predicate::InSet { term, .. } => {
            term_loads(term, &mut out)
        }
        Predicate::FieldEq { loads, .. } => out.extend(loads.iter().cloned()),
    }
    out
}

fn predicate_counts(p: &Predicate) -> Vec<String> {
    fn term_counts(t: &Term, out: &mut Vec<String>) {
        match t {
            Term::Count { symbol } => out.push(symbol.clone()),
            Term::Add { lhs, rhs } | Term::Sub { lhs, rhs } => {
                term_counts(lhs, out);
                term_counts(rhs, out);
            }
            Term::Mod { lhs, .. } => term_counts(lhs, out),
            Term::Field { .. } | Term::Const { .. } => {}
        }
    }
    let mut out = Vec::new();
    match p {
        Predicate::Cmp { lhs, rhs, .. } => {
            term_counts(lhs, &mut out);
            term_counts(rhs, &mut out);
        }
        Predicate::InRange { term, .. } | Predicate::InSet { term, .. } => {
            term_counts(term, &mut out)
        }
        Predicate::FieldEq { .. } => {}
    }
    out
}

fn eval_term(t: &Term, binding: &Binding, geom: &CacheGeometry) -> Result<i64, LtError> {
    match t {
        Term::Field { load, field } => {
            let addr = binding
                .loads
                .get(load)
                .ok_or_else(|| LtError::MissingBinding(load.clone()))?;
            Ok(geom.extract_field(*addr, *field) as i64)
        }
        Term::Count { symbol } => binding
            .counts
            .get(symbol)
            .map(|v| *v as i64)
            .ok_or_else(|| LtError::MissingCount(symbol.clone())),
        Term::Const { value } => Ok(*value),
        Term::Add { lhs, rhs } => Ok(eval_term(lhs, binding, geom)? + eval_term(rhs, binding, geom)?),
        Term::Sub { lhs, rhs } => Ok(eval_term(lhs, binding, geom)? - eval_term(rhs, binding, geom)?),
        Term::Mod { lhs, modulus } => {
            Ok(eval_term(lhs, binding, geom)?.rem_euclid(*modulus as i64))
        }
    }
}

/// Evaluate one predicate against bound addresses and counts.
pub fn eval_predicate(
    p: &Predicate,
    binding: &Binding,
    geom: &CacheGeometry,
) -> Result<bool, LtError> {
    match p {
        Predicate::Cmp { lhs, op, rhs } => {
            let l = eval_term(lhs, binding, geom)?;
            let r = eval_term(rhs, binding, geom)?;
            Ok(match op {
                CmpOp::Eq => l == r,
                CmpOp::Ne => l != r,
                CmpOp::Le => l <= r,
                CmpOp::Lt => l < r,
                CmpOp::Ge => l >= r,
                CmpOp::Gt => l > r,
            })
        }
        Predicate::InRange { term, lo, hi } => {
            let v = eval_term(term, binding, geom)?;
            Ok(v >= *lo && v <= *hi)
        }
        Predicate::InSet { term, values } => {
            let v = eval_term(term, binding, geom)?;
            Ok(values.contains(&v))
        }
        Predicate::FieldEq { field, loads } => {
            let addrs: Result<Vec<PhysAddr>, LtError> = loads
                .iter()
                .map(|l| {
                    binding
                        .loads
                        .get(l)
                        .copied()
                        .ok_or_else(|| LtError::MissingBinding(l.clone()))
                })
                .collect();
            Ok(geom.same_field(*field, &addrs?))
        }
    }
}

pub fn serialize_lt(lt: &LeakageTemplate) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(lt).expect("template serializes");
    bytes.push(b'\n');
    bytes
}

pub fn deserialize_lt(bytes: &[u8]) -> Result<LeakageTemplate, LtError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let lt: LeakageTemplate =
        serde_path_to_error::deserialize(de).map_err(|e| LtError::ParseError {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })?;
    if lt.schema != LT_SCHEMA_VERSION {
        return Err(LtError::SchemaVersionMismatch {
            found: lt.schema,
            expected: LT_SCHEMA_VERSION,
        });
    }
    Ok(lt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> CacheGeometry {
        CacheGeometry::default()
    }

    fn set_term(load: &str) -> Term {
        Term::Field {
            load: load.into(),
            field: Field::Set,
        }
    }

    fn successor_predicate() -> Predicate {
        // set(l2) = set(l1) + 1
        Predicate::Cmp {
            lhs: set_term("l2"),
            op: CmpOp::Eq,
            rhs: Term::Add {
                lhs: Box::new(set_term("l1")),
                rhs: Box::new(Term::Const { value: 1 }),
            },
        }
    }

    fn binding(pairs: &[(&str, u64)]) -> Binding {
        Binding {
            loads: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), PhysAddr(*v)))
                .collect(),
            counts: BTreeMap::new(),
        }
    }

    #[test]
    fn successor_sets_evaluate() {
        let g = geom();
        let b = binding(&[
            ("l1", g.compose_addr(1, 10, 0).unwrap().value()),
            ("l2", g.compose_addr(1, 11, 0).unwrap().value()),
        ]);
        assert!(eval_predicate(&successor_predicate(), &b, &g).unwrap());
    }

    #[test]
    fn bus_exclusion_instance() {
        // bus(l1) != bus(l2) + 1 mod 4 at buses (2, 0)
        let g = geom();
        let p = Predicate::Cmp {
            lhs: Term::Field {
                load: "l1".into(),
                field: Field::Bus,
            },
            op: CmpOp::Ne,
            rhs: Term::Mod {
                lhs: Box::new(Term::Add {
                    lhs: Box::new(Term::Field {
                        load: "l2".into(),
                        field: Field::Bus,
                    }),
                    rhs: Box::new(Term::Const { value: 1 }),
                }),
                modulus: 4,
            },
        };
        let b = binding(&[
            ("l1", g.compose_addr(1, 0, 2 << 4).unwrap().value()),
            ("l2", g.compose_addr(1, 0, 0).unwrap().value()),
        ]);
        assert!(eval_predicate(&p, &b, &g).unwrap());
    }

    #[test]
    fn unbound_load_errors() {
        let g = geom();
        let b = binding(&[("l1", 0)]);
        let p = Predicate::FieldEq {
            field: Field::Set,
            loads: vec!["l1".into(), "l3".into()],
        };
        assert!(matches!(
            eval_predicate(&p, &b, &g),
            Err(LtError::MissingBinding(s)) if s == "l3"
        ));
    }

    fn sample_lt() -> LeakageTemplate {
        let template = vec![
            TemplateSlot::Load { id: "l1".into() },
            TemplateSlot::Gap {
                symbol: "n1".into(),
                min: 0,
                max: 5,
            },
            TemplateSlot::Load { id: "l2".into() },
        ];
        let relations = vec![
            BehaviorRelations {
                behavior: "P3".into(),
                status: RelationStatus::Conclusive,
                predicates: vec![successor_predicate()],
            },
            BehaviorRelations {
                behavior: "P0".into(),
                status: RelationStatus::Conclusive,
                predicates: vec![],
            },
        ];
        let metadata = LtMetadata {
            geometry: geom(),
            tested_counts: BTreeMap::from([("n1".into(), (0, 10))]),
            provenance: vec!["stride-family".into()],
        };
        LeakageTemplate::assemble("prefetch-pair", template, relations, metadata).unwrap()
    }

    #[test]
    fn relation_order_yields_one_behavior() {
        let g = geom();
        let lt = sample_lt();
        let mut b = binding(&[
            ("l1", g.compose_addr(1, 10, 0).unwrap().value()),
            ("l2", g.compose_addr(1, 11, 0).unwrap().value()),
        ]);
        b.counts.insert("n1".into(), 2);
        assert_eq!(lt.classify_binding(&b, &g).unwrap(), Some("P3".into()));
        // non-successor falls to the fallback behavior
        let mut b = binding(&[
            ("l1", g.compose_addr(1, 10, 0).unwrap().value()),
            ("l2", g.compose_addr(1, 5, 0).unwrap().value()),
        ]);
        b.counts.insert("n1".into(), 2);
        assert_eq!(lt.classify_binding(&b, &g).unwrap(), Some("P0".into()));
    }

    #[test]
    fn out_of_range_counts_are_undecidable() {
        let g = geom();
        let lt = sample_lt();
        let mut b = binding(&[
            ("l1", g.compose_addr(1, 10, 0).unwrap().value()),
            ("l2", g.compose_addr(1, 11, 0).unwrap().value()),
        ]);
        b.counts.insert("n1".into(), 40);
        assert_eq!(lt.classify_binding(&b, &g).unwrap(), None);
    }

    #[test]
    fn unbound_symbol_rejected_at_assembly() {
        let template = vec![TemplateSlot::Load { id: "l1".into() }];
        let relations = vec![BehaviorRelations {
            behavior: "x".into(),
            status: RelationStatus::Conclusive,
            predicates: vec![Predicate::FieldEq {
                field: Field::Set,
                loads: vec!["l1".into(), "l9".into()],
            }],
        }];
        let metadata = LtMetadata {
            geometry: geom(),
            tested_counts: BTreeMap::new(),
            provenance: vec![],
        };
        assert!(matches!(
            LeakageTemplate::assemble("bad", template, relations, metadata),
            Err(LtError::UnboundSymbol { symbol }) if symbol == "l9"
        ));
    }

    #[test]
    fn serialization_round_trips() {
        let lt = sample_lt();
        let bytes = serialize_lt(&lt);
        let back = deserialize_lt(&bytes).unwrap();
        assert_eq!(lt, back);
        assert_eq!(serialize_lt(&back), bytes);
    }

    #[test]
    fn corrupted_field_reports_path() {
        let lt = sample_lt();
        let text = String::from_utf8(serialize_lt(&lt)).unwrap();
        let bad = text.replace("\"min\": 0", "\"min\": \"zero\"");
        match deserialize_lt(bad.as_bytes()) {
            Err(LtError::ParseError { path, .. }) => {
                assert!(path.contains("code_template"), "{path}")
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let lt = sample_lt();
        let text = String::from_utf8(serialize_lt(&lt)).unwrap();
        let bad = text.replacen("\"schema\": 1", "\"schema\": 9", 1);
        assert!(matches!(
            deserialize_lt(bad.as_bytes()),
            Err(LtError::SchemaVersionMismatch { found: 9, .. })
        ));
    }
}
