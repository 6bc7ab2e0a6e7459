//! Macro and operator expansion: turns a parsed specification into a finite
//! list of concrete directive sequences plus a mutation plan.

use crate::gts::{Directive, GtsAst, OpExpr, SeqItem, StepAttr, Symbol};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use thiserror::Error;

/// Default cap on the number of expanded variants.
pub const DEFAULT_EXPANSION_CAP: u64 = 1 << 22;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExpandError {
    #[error("expansion exceeds the configured cap of {limit} variants")]
    ExpansionTooLarge { limit: u64 },
}

/// Expansion-level instruction: attribute expressions resolved to
/// (symbol, delta) pairs, all macros gone.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ConcreteDirective {
    Load {
        tag: ResolvedAttr,
        set: ResolvedAttr,
        word: Option<u64>,
    },
    Arith,
    Nop,
    SetVar {
        var: Symbol,
        value: bool,
    },
    Branch {
        var: Symbol,
        value: bool,
        steps: u64,
    },
}

/// Attribute after expansion: base symbol plus accumulated delta.
/// `None` base means the shared default symbol for that attribute kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResolvedAttr {
    pub base: Option<Symbol>,
    pub delta: i64,
}

impl ResolvedAttr {
    fn from_opt(a: Option<crate::gts::AttrExpr>) -> Self {
        match a {
            Some(e) => ResolvedAttr {
                base: Some(e.base),
                delta: e.delta,
            },
            None => ResolvedAttr {
                base: None,
                delta: 0,
            },
        }
    }

    fn shifted(self, by: i64) -> Self {
        ResolvedAttr {
            base: self.base,
            delta: self.delta + by,
        }
    }
}

/// How instantiation should enumerate operands of a variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MutationMode {
    None,
    /// Brute-force word offsets of unpinned loads.
    WordOffset,
    /// Brute-force set indices of all loads.
    SetIndex,
}

use serde::{Deserialize, Serialize};

/// Mutation plan attached to one expanded variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationPlan {
    pub mode: MutationMode,
    /// Instruction indices of the loads to enumerate.
    pub targets: Vec<usize>,
}

impl MutationPlan {
    pub fn none() -> Self {
        MutationPlan {
            mode: MutationMode::None,
            targets: Vec::new(),
        }
    }
}

/// One concrete variant of an expanded specification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectiveSeq {
    pub pre: Vec<ConcreteDirective>,
    pub instructions: Vec<ConcreteDirective>,
    /// Operator path that produced this variant, e.g. `shuffle[2]/seq`.
    pub provenance: String,
    /// Trials to run per testcase (statistical repetition).
    pub run_count: u64,
}

/// Expand all macros and operators. Deterministic for a given seed; the
/// seed only feeds wildcard draws.
pub fn expand(
    ast: &GtsAst,
    seed: u64,
    cap: u64,
) -> Result<Vec<(DirectiveSeq, MutationPlan)>, ExpandError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pre: Vec<ConcreteDirective> = ast
        .pre
        .iter()
        .map(|d| concretize(d, &mut rng))
        .collect();

    let expanded = expand_op(&ast.body, &mut rng, cap)?;
    let mut out = Vec::with_capacity(expanded.len());
    for v in expanded {
        let targets = mutation_targets(&v.instrs, v.mode);
        out.push((
            DirectiveSeq {
                pre: pre.clone(),
                instructions: v.instrs,
                provenance: v.prov,
                run_count: v.run_count,
            },
            MutationPlan {
                mode: v.mode,
                targets,
            },
        ));
    }
    Ok(out)
}

fn mutation_targets(instrs: &[ConcreteDirective], mode: MutationMode) -> Vec<usize> {
    match mode {
        MutationMode::None => Vec::new(),
        MutationMode::WordOffset => instrs
            .iter()
            .enumerate()
            .filter_map(|(i, d)| match d {
                ConcreteDirective::Load { word: None, .. } => Some(i),
                _ => None,
            })
            .collect(),
        MutationMode::SetIndex => instrs
            .iter()
            .enumerate()
            .filter_map(|(i, d)| match d {
                ConcreteDirective::Load { .. } => Some(i),
                _ => None,
            })
            .collect(),
    }
}

struct Variant {
    instrs: Vec<ConcreteDirective>,
    prov: String,
    run_count: u64,
    mode: MutationMode,
}

fn check_cap(n: usize, cap: u64) -> Result<(), ExpandError> {
    if n as u64 > cap {
        Err(ExpandError::ExpansionTooLarge { limit: cap })
    } else {
        Ok(())
    }
}

fn expand_op(op: &OpExpr, rng: &mut ChaCha8Rng, cap: u64) -> Result<Vec<Variant>, ExpandError> {
    match op {
        OpExpr::Seq(items) => {
            let mut instrs = Vec::new();
            expand_seq(items, rng, &mut instrs);
            Ok(vec![Variant {
                instrs,
                prov: "seq".into(),
                run_count: 1,
                mode: MutationMode::None,
            }])
        }
        OpExpr::Shuffle(inner) => {
            let children = expand_op(inner, rng, cap)?;
            let mut out = Vec::new();
            for child in &children {
                let perms = permutations(&child.instrs);
                check_cap(out.len() + perms.len(), cap)?;
                for (i, p) in perms.into_iter().enumerate() {
                    out.push(Variant {
                        instrs: p,
                        prov: format!("shuffle[{i}]/{}", child.prov),
                        run_count: child.run_count,
                        mode: child.mode,
                    });
                }
            }
            Ok(dedup(out))
        }
        OpExpr::Subset(inner) => {
            let children = expand_op(inner, rng, cap)?;
            let mut out = Vec::new();
            for child in &children {
                let k = child.instrs.len();
                check_cap(out.len() + (1usize << k) - 1, cap)?;
                // nonempty order-preserving subsequences, full sequence included
                for massk in 1u64..(1u64 << k) {
                    let picked: Vec<ConcreteDirective> = child
                        .instrs
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| massk & (1 << i) != 0)
                        .map(|(_, d)| d.clone())
                        .collect();
                    out.push(Variant {
                        instrs: picked,
                        prov: format!("subset[{massk}]/{}", child.prov),
                        run_count: child.run_count,
                        mode: child.mode,
                    });
                }
            }
            Ok(dedup(out))
        }
        OpExpr::Slide(inner, n) => {
            let children = expand_op(inner, rng, cap)?;
            let mut out = Vec::new();
            check_cap(children.len() * (*n as usize), cap)?;
            for child in &children {
                for k in 0..*n {
                    let shifted: Vec<ConcreteDirective> = child
                        .instrs
                        .iter()
                        .map(|d| match d {
                            ConcreteDirective::Load { tag, set, word } => {
                                ConcreteDirective::Load {
                                    tag: *tag,
                                    set: set.shifted(k as i64),
                                    word: *word,
                                }
                            }
                            other => other.clone(),
                        })
                        .collect();
                    out.push(Variant {
                        instrs: shifted,
                        prov: format!("slide[{k}]/{}", child.prov),
                        run_count: child.run_count,
                        mode: child.mode,
                    });
                }
            }
            Ok(out)
        }
        OpExpr::Merge(a, b) => {
            let left = expand_op(a, rng, cap)?;
            let right = expand_op(b, rng, cap)?;
            let mut out = Vec::new();
            for (li, l) in left.iter().enumerate() {
                for (ri, r) in right.iter().enumerate() {
                    let inter = interleavings(&l.instrs, &r.instrs, cap, out.len())?;
                    for (k, instrs) in inter.into_iter().enumerate() {
                        out.push(Variant {
                            instrs,
                            prov: format!("merge[{li},{ri},{k}]"),
                            run_count: l.run_count.max(r.run_count),
                            mode: combine_mode(l.mode, r.mode),
                        });
                    }
                }
            }
            Ok(dedup(out))
        }
        OpExpr::OffsetMutation(inner) => {
            let mut children = expand_op(inner, rng, cap)?;
            for c in &mut children {
                c.mode = MutationMode::WordOffset;
            }
            Ok(children)
        }
        OpExpr::LineMutation(inner) => {
            let mut children = expand_op(inner, rng, cap)?;
            for c in &mut children {
                c.mode = MutationMode::SetIndex;
            }
            Ok(children)
        }
        OpExpr::Repetition(inner, n) => {
            let mut children = expand_op(inner, rng, cap)?;
            for c in &mut children {
                c.run_count *= n;
            }
            Ok(children)
        }
    }
}

fn combine_mode(a: MutationMode, b: MutationMode) -> MutationMode {
    // parse-time checks keep at most one side mutated
    if a == MutationMode::None {
        b
    } else {
        a
    }
}

fn expand_seq(items: &[SeqItem], rng: &mut ChaCha8Rng, out: &mut Vec<ConcreteDirective>) {
    for item in items {
        match item {
            SeqItem::Directive(d) => out.push(concretize(d, rng)),
            SeqItem::Power { body, n, step } => {
                for k in 0..*n {
                    let start = out.len();
                    expand_seq(body, rng, out);
                    if let Some(s) = step {
                        let delta = s.increment * k as i64;
                        for d in &mut out[start..] {
                            if let ConcreteDirective::Load { tag, set, .. } = d {
                                match s.attr {
                                    StepAttr::Tag => *tag = tag.shifted(delta),
                                    StepAttr::Set => *set = set.shifted(delta),
                                }
                            }
                        }
                    }
                }
            }
            SeqItem::Wildcard(n) => {
                for _ in 0..*n {
                    // non-memory filler drawn from {Arith, Nop}
                    if rng.random_bool(0.5) {
                        out.push(ConcreteDirective::Arith);
                    } else {
                        out.push(ConcreteDirective::Nop);
                    }
                }
            }
        }
    }
}

fn concretize(d: &Directive, _rng: &mut ChaCha8Rng) -> ConcreteDirective {
    match d {
        Directive::Mem { tag, set, word } => ConcreteDirective::Load {
            tag: ResolvedAttr::from_opt(*tag),
            set: ResolvedAttr::from_opt(*set),
            word: *word,
        },
        Directive::Arith { .. } => ConcreteDirective::Arith,
        Directive::Nop => ConcreteDirective::Nop,
        Directive::SetBranch { var, value } => ConcreteDirective::SetVar {
            var: *var,
            value: *value,
        },
        Directive::Branch { var, value, steps } => ConcreteDirective::Branch {
            var: *var,
            value: *value,
            steps: *steps,
        },
    }
}

/// All permutations in lexicographic index order.
fn permutations(items: &[ConcreteDirective]) -> Vec<Vec<ConcreteDirective>> {
    let n = items.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    loop {
        out.push(idx.iter().map(|&i| items[i].clone()).collect());
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| idx[i] < idx[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| idx[j] > idx[i]).unwrap();
        idx.swap(i, j);
        idx[i + 1..].reverse();
    }
    out
}

/// All interleavings of `a` and `b` preserving each side's internal order.
fn interleavings(
    a: &[ConcreteDirective],
    b: &[ConcreteDirective],
    cap: u64,
    already: usize,
) -> Result<Vec<Vec<ConcreteDirective>>, ExpandError> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(a.len() + b.len());
    fn rec(
        a: &[ConcreteDirective],
        b: &[ConcreteDirective],
        current: &mut Vec<ConcreteDirective>,
        out: &mut Vec<Vec<ConcreteDirective>>,
    ) {
        if a.is_empty() && b.is_empty() {
            out.push(current.clone());
            return;
        }
        if let Some((h, rest)) = a.split_first() {
            current.push(h.clone());
            rec(rest, b, current, out);
            current.pop();
        }
        if let Some((h, rest)) = b.split_first() {
            current.push(h.clone());
            rec(a, rest, current, out);
            current.pop();
        }
    }
    rec(a, b, &mut current, &mut out);
    check_cap(already + out.len(), cap)?;
    Ok(out)
}

/// Deduplicate structurally identical variants, keeping first occurrences.
fn dedup(variants: Vec<Variant>) -> Vec<Variant> {
    let mut seen: HashSet<Vec<ConcreteDirective>> = HashSet::new();
    let mut out = Vec::with_capacity(variants.len());
    for v in variants {
        if seen.insert(v.instrs.clone()) {
            out.push(v);
        }
    }
    out
}
