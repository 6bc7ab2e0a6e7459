//! Address binding and testcase enumeration: resolves symbolic tag/set
//! attributes to concrete addresses through a seeded address store and
//! enumerates mutation plans into executable testcases.

use crate::expand::{ConcreteDirective, DirectiveSeq, MutationMode, MutationPlan, ResolvedAttr};
use crate::geometry::{CacheGeometry, PhysAddr};
use crate::gts::Symbol;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstantiateError {
    #[error("unsatisfiable relation: {0}")]
    UnsatisfiableRelation(String),
    #[error("address store exhausted for {0} values")]
    StoreExhausted(&'static str),
}

/// Attribute kinds tracked by the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Kind {
    Tag,
    Set,
}

/// Key for a binding: a user symbol or the shared default symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Default,
    Named(Symbol),
}

impl Key {
    fn of(a: &ResolvedAttr) -> Key {
        match a.base {
            Some(s) => Key::Named(s),
            None => Key::Default,
        }
    }
}

/// Seeded pool of symbol -> field-value bindings. Distinct symbols receive
/// distinct field values; repeated queries return the recorded value.
/// Values may be pinned up front for experiments that need controlled
/// placement (e.g. page-boundary headroom).
pub struct AddressStore {
    rng: ChaCha8Rng,
    tags: HashMap<Key, u64>,
    sets: HashMap<Key, u64>,
    used_tags: HashSet<u64>,
    used_sets: HashSet<u64>,
    log: Vec<(String, &'static str, u64)>,
}

impl AddressStore {
    pub fn new(seed: u64) -> Self {
        AddressStore {
            rng: ChaCha8Rng::seed_from_u64(seed),
            tags: HashMap::new(),
            sets: HashMap::new(),
            used_tags: HashSet::new(),
            used_sets: HashSet::new(),
            log: Vec::new(),
        }
    }

    /// Pin a symbol's tag value before resolution.
    pub fn pin_tag(&mut self, sym: Symbol, value: u64) {
        self.tags.insert(Key::Named(sym), value);
        self.used_tags.insert(value);
    }

    /// Pin a symbol's set value before resolution.
    pub fn pin_set(&mut self, sym: Symbol, value: u64) {
        self.sets.insert(Key::Named(sym), value);
        self.used_sets.insert(value);
    }

    /// Allocation log `(symbol, kind, value)` in allocation order.
    pub fn log(&self) -> &[(String, &'static str, u64)] {
        &self.log
    }

    fn value(
        &mut self,
        kind: Kind,
        key: Key,
        space: u64,
        name: impl Fn() -> String,
    ) -> Result<u64, InstantiateError> {
        let (map, used, label) = match kind {
            Kind::Tag => (&mut self.tags, &mut self.used_tags, "tag"),
            Kind::Set => (&mut self.sets, &mut self.used_sets, "set"),
        };
        if let Some(v) = map.get(&key) {
            return Ok(*v);
        }
        if used.len() as u64 >= space {
            return Err(InstantiateError::StoreExhausted(label));
        }
        // fresh uniform draw from the unused values
        let v = loop {
            let candidate = self.rng.random_range(0..space);
            if !used.contains(&candidate) {
                break candidate;
            }
        };
        map.insert(key, v);
        used.insert(v);
        self.log.push((name(), label, v));
        Ok(v)
    }
}

/// Executable instruction of a testcase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Instr {
    Load(PhysAddr),
    Arith,
    Nop,
    SetVar { var: u32, value: bool },
    Branch { var: u32, value: bool, steps: u64 },
}

/// A concrete program: bound addresses, precondition loads, trial count and
/// the mutation coordinates that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Testcase {
    pub id: u64,
    pub pre_loads: Vec<PhysAddr>,
    pub instructions: Vec<Instr>,
    pub run_count: u64,
    /// (instruction index, enumerated field value) per mutated load.
    pub mutation_coords: Vec<(usize, u64)>,
    /// Addresses probed (non-mutating) after execution.
    pub probes: Vec<PhysAddr>,
}

/// Resolved skeleton of a variant: addresses bound, mutation targets known.
struct Skeleton {
    pre: Vec<PhysAddr>,
    instrs: Vec<Instr>,
    run_count: u64,
    targets: Vec<usize>,
    mode: MutationMode,
    /// (tag value, word offset bytes) per target, needed to rebuild addresses.
    target_bases: Vec<TargetBase>,
}

#[derive(Clone, Copy)]
struct TargetBase {
    tag: u64,
    set: u64,
    word_offset: u64,
    word_bits_lo: u32,
}

/// Allocate one address for a (tag, set) symbol pair.
///
/// Repeated calls with the same symbols return field-consistent addresses;
/// deltas are applied to the base symbol's concrete value (sets wrap modulo
/// the set count, tags error out of range).
pub fn alloc_address(
    store: &mut AddressStore,
    geom: &CacheGeometry,
    tag: ResolvedAttr,
    set: ResolvedAttr,
    word: Option<u64>,
) -> Result<PhysAddr, InstantiateError> {
    let (t, s) = resolve_fields(store, geom, tag, set)?;
    let offset = geom.word_to_offset(word.unwrap_or(0));
    geom.compose_addr(t, s, offset)
        .map_err(|e| InstantiateError::UnsatisfiableRelation(e.to_string()))
}

fn resolve_fields(
    store: &mut AddressStore,
    geom: &CacheGeometry,
    tag: ResolvedAttr,
    set: ResolvedAttr,
) -> Result<(u64, u64), InstantiateError> {
    let tag_base = store.value(Kind::Tag, Key::of(&tag), geom.tag_count(), || {
        format!("{:?}", tag.base)
    })?;
    let set_base = store.value(Kind::Set, Key::of(&set), geom.num_sets(), || {
        format!("{:?}", set.base)
    })?;
    // set arithmetic wraps; tag arithmetic must stay in range
    let set_val = (set_base as i64 + set.delta).rem_euclid(geom.num_sets() as i64) as u64;
    let tag_val = tag_base as i64 + tag.delta;
    if tag_val < 0 || tag_val as u64 >= geom.tag_count() {
        return Err(InstantiateError::UnsatisfiableRelation(format!(
            "tag delta {} overflows the tag range (base {})",
            tag.delta, tag_base
        )));
    }
    Ok((tag_val as u64, set_val))
}

/// Instantiate a variant into a deterministic stream of testcases.
///
/// Word-offset mutation enumerates all word offsets per target load; set
/// mutation enumerates all set indices per target. Without a plan the
/// stream holds exactly one testcase.
pub fn instantiate(
    seq: &DirectiveSeq,
    plan: &MutationPlan,
    store: &mut AddressStore,
    geom: &CacheGeometry,
    first_id: u64,
) -> Result<TestcaseStream, InstantiateError> {
    let mut vars: HashMap<Symbol, u32> = HashMap::new();
    let var_id = |s: Symbol, vars: &mut HashMap<Symbol, u32>| -> u32 {
        let next = vars.len() as u32;
        *vars.entry(s).or_insert(next)
    };

    let mut pre = Vec::with_capacity(seq.pre.len());
    for d in &seq.pre {
        match d {
            ConcreteDirective::Load { tag, set, word } => {
                pre.push(alloc_address(store, geom, *tag, *set, *word)?);
            }
            _ => unreachable!("precondition holds loads only"),
        }
    }

    let mut instrs = Vec::with_capacity(seq.instructions.len());
    let mut target_bases = Vec::new();
    let target_set: HashSet<usize> = plan.targets.iter().copied().collect();
    for (i, d) in seq.instructions.iter().enumerate() {
        let instr = match d {
            ConcreteDirective::Load { tag, set, word } => {
                let (t, s) = resolve_fields(store, geom, *tag, *set)?;
                if target_set.contains(&i) {
                    target_bases.push(TargetBase {
                        tag: t,
                        set: s,
                        word_offset: geom.word_to_offset(word.unwrap_or(0)),
                        word_bits_lo: geom.field_range(crate::geometry::Field::Word).lo,
                    });
                }
                let offset = geom.word_to_offset(word.unwrap_or(0));
                Instr::Load(
                    geom.compose_addr(t, s, offset)
                        .map_err(|e| InstantiateError::UnsatisfiableRelation(e.to_string()))?,
                )
            }
            ConcreteDirective::Arith => Instr::Arith,
            ConcreteDirective::Nop => Instr::Nop,
            ConcreteDirective::SetVar { var, value } => Instr::SetVar {
                var: var_id(*var, &mut vars),
                value: *value,
            },
            ConcreteDirective::Branch { var, value, steps } => Instr::Branch {
                var: var_id(*var, &mut vars),
                value: *value,
                steps: *steps,
            },
        };
        instrs.push(instr);
    }

    Ok(TestcaseStream {
        skeleton: Skeleton {
            pre,
            instrs,
            run_count: seq.run_count,
            targets: plan.targets.clone(),
            mode: plan.mode,
            target_bases,
        },
        geom: geom.clone(),
        next: 0,
        first_id,
    })
}

/// Deterministic iterator over the enumerated testcases of one variant.
pub struct TestcaseStream {
    skeleton: Skeleton,
    geom: CacheGeometry,
    next: u64,
    first_id: u64,
}

impl TestcaseStream {
    /// Values each mutated coordinate ranges over.
    pub fn radix(&self) -> u64 {
        match self.skeleton.mode {
            MutationMode::None => 1,
            MutationMode::WordOffset => self.geom.words_per_line(),
            MutationMode::SetIndex => self.geom.num_sets(),
        }
    }

    /// Total number of testcases this stream yields. Saturates instead of
    /// overflowing so callers can cap oversized requests.
    pub fn len(&self) -> u64 {
        let k = self.skeleton.targets.len() as u32;
        if self.skeleton.mode == MutationMode::None {
            1
        } else {
            self.radix().checked_pow(k).unwrap_or(u64::MAX)
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Iterator for TestcaseStream {
    type Item = Testcase;

    fn next(&mut self) -> Option<Testcase> {
        if self.next >= self.len() {
            return None;
        }
        let index = self.next;
        self.next += 1;

        let sk = &self.skeleton;
        let radix = match sk.mode {
            MutationMode::None => 1,
            MutationMode::WordOffset => self.geom.words_per_line(),
            MutationMode::SetIndex => self.geom.num_sets(),
        };
        let mut instrs = sk.instrs.clone();
        let mut coords = Vec::with_capacity(sk.targets.len());
        // row-major enumeration, last target varies fastest
        let mut rem = index;
        for pos in (0..sk.targets.len()).rev() {
            let value = rem % radix;
            rem /= radix;
            coords.push((sk.targets[pos], value));
        }
        coords.reverse();
        for &(instr_idx, value) in &coords {
            let base = sk.target_bases[sk
                .targets
                .iter()
                .position(|&t| t == instr_idx)
                .expect("target recorded")];
            let addr = match sk.mode {
                MutationMode::WordOffset => self
                    .geom
                    .compose_addr(base.tag, base.set, value << base.word_bits_lo)
                    .expect("word offset in range"),
                MutationMode::SetIndex => self
                    .geom
                    .compose_addr(base.tag, value, base.word_offset)
                    .expect("set index in range"),
                MutationMode::None => unreachable!(),
            };
            instrs[instr_idx] = Instr::Load(addr);
        }

        Some(Testcase {
            id: self.first_id + index,
            pre_loads: sk.pre.clone(),
            instructions: instrs,
            run_count: sk.run_count,
            mutation_coords: coords,
            probes: Vec::new(),
        })
    }
}
