//! Syntax tree for the testcase specification language.

use serde::{Deserialize, Serialize};

/// Interned attribute/variable symbol. Two occurrences of the same name in
/// one specification always carry the same `Symbol`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol(pub u32);

/// Symbol table owned by a [`GtsAst`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymbolTable {
    names: Vec<String>,
}

impl SymbolTable {
    pub fn intern(&mut self, name: &str) -> Symbol {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            Symbol(i as u32)
        } else {
            self.names.push(name.to_string());
            Symbol((self.names.len() - 1) as u32)
        }
    }

    pub fn name(&self, s: Symbol) -> &str {
        &self.names[s.0 as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<Symbol> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| Symbol(i as u32))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Symbolic attribute: a base symbol plus a signed delta (`s1+1`, `t2-3`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AttrExpr {
    pub base: Symbol,
    pub delta: i64,
}

impl AttrExpr {
    pub fn new(base: Symbol) -> Self {
        AttrExpr { base, delta: 0 }
    }

    pub fn shifted(self, by: i64) -> Self {
        AttrExpr {
            base: self.base,
            delta: self.delta + by,
        }
    }
}

/// One instruction-level directive.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Directive {
    /// Memory load with optional tag/set attributes and optional pinned
    /// word offset.
    Mem {
        tag: Option<AttrExpr>,
        set: Option<AttrExpr>,
        word: Option<u64>,
    },
    /// Arithmetic or logical operation; operand value symbols are carried
    /// through but instantiated as fixed immediates.
    Arith { operands: Vec<Symbol> },
    Nop,
    /// Set a boolean variable.
    SetBranch { var: Symbol, value: bool },
    /// Conditional forward branch: jumps `steps` directives when the
    /// variable equals `value`.
    Branch { var: Symbol, value: bool, steps: u64 },
}

impl Directive {
    pub fn is_mem(&self) -> bool {
        matches!(self, Directive::Mem { .. })
    }
}

/// Attribute targeted by a power step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepAttr {
    Tag,
    Set,
}

/// Per-copy attribute increment of a power macro.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PowerStep {
    pub attr: StepAttr,
    pub increment: i64,
}

/// Items of a directive sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SeqItem {
    Directive(Directive),
    /// `( body )^{n[, a+=i]}`: n inline copies, optionally incrementing a
    /// memory attribute per copy.
    Power {
        body: Vec<SeqItem>,
        n: u64,
        step: Option<PowerStep>,
    },
    /// `W(n)`: n non-memory directives drawn at expansion time.
    Wildcard(u64),
}

/// Operator tree over directive sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpExpr {
    Seq(Vec<SeqItem>),
    Shuffle(Box<OpExpr>),
    Subset(Box<OpExpr>),
    Slide(Box<OpExpr>, u64),
    Merge(Box<OpExpr>, Box<OpExpr>),
    OffsetMutation(Box<OpExpr>),
    LineMutation(Box<OpExpr>),
    Repetition(Box<OpExpr>, u64),
}

/// A parsed specification: optional precondition loads plus the body
/// operator tree, with all symbols interned in `symbols`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GtsAst {
    pub pre: Vec<Directive>,
    pub body: OpExpr,
    pub symbols: SymbolTable,
}
