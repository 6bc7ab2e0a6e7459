//! Instruction pattern language with capture groups and backreferences.
//!
//! One element per line:
//!
//! ```text
//! LOAD(op1>g1)      # capture operand 1 into group g1
//! .{0,5}            # 0..5 instructions of any class
//! LOAD(op1=g1)      # operand 1 must equal the captured token
//! .{0,5}
//! LOAD(op1=g1)
//! ```
//!
//! Element syntax: `CLASS[(opconstraint,...)][{n}]`; constraints are
//! `opN>gX` (capture), `opN=gX` (backreference) or `opN:tokenclass` with
//! token classes `reg`, `imm`, `membase`. `{n}` repeats the element.

use super::listing::{AsmListing, InstrClass};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: backreference to undefined group `{group}`")]
    BadBackreference { line: usize, group: String },
    #[error("line {line}: bad gap quantifier")]
    BadQuantifier { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenClass {
    Reg,
    Imm,
    MemBase,
}

impl TokenClass {
    fn matches(&self, token: &str) -> bool {
        match self {
            TokenClass::Reg => {
                let t = token.trim_end_matches(']');
                (t.starts_with('x') || t.starts_with('w'))
                    && t[1..].chars().all(|c| c.is_ascii_digit())
                    || t == "sp"
            }
            TokenClass::Imm => token.starts_with('#'),
            TokenClass::MemBase => token.starts_with('['),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpConstraint {
    Capture { op: usize, group: String },
    BackRef { op: usize, group: String },
    Class { op: usize, class: TokenClass },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    Instr {
        /// None matches any class (`ANY`).
        class: Option<InstrClass>,
        constraints: Vec<OpConstraint>,
    },
    Gap {
        min: u64,
        max: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsmPattern {
    pub elements: Vec<Element>,
    pub groups: Vec<String>,
}

pub fn compile_pattern(text: &str) -> Result<AsmPattern, PatternError> {
    let mut elements = Vec::new();
    let mut groups: Vec<String> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lno = lineno + 1;
        if let Some(rest) = line.strip_prefix('.') {
            let rest = rest.trim();
            let inner = rest
                .strip_prefix('{')
                .and_then(|r| r.strip_suffix('}'))
                .ok_or(PatternError::BadQuantifier { line: lno })?;
            let (min, max) = inner
                .split_once(',')
                .ok_or(PatternError::BadQuantifier { line: lno })?;
            let min: u64 = min
                .trim()
                .parse()
                .map_err(|_| PatternError::BadQuantifier { line: lno })?;
            let max: u64 = max
                .trim()
                .parse()
                .map_err(|_| PatternError::BadQuantifier { line: lno })?;
            if min > max {
                return Err(PatternError::BadQuantifier { line: lno });
            }
            elements.push(Element::Gap { min, max });
            continue;
        }
        // CLASS[(constraints)][{n}]
        let (head, repeat) = match line.rfind('{') {
            Some(i) if line.ends_with('}') && !line[..i].ends_with('(') => {
                let n: u64 = line[i + 1..line.len() - 1].trim().parse().map_err(|_| {
                    PatternError::Syntax {
                        line: lno,
                        msg: "bad repeat count".into(),
                    }
                })?;
                if n == 0 {
                    return Err(PatternError::Syntax {
                        line: lno,
                        msg: "repeat count must be >= 1".into(),
                    });
                }
                (line[..i].trim(), n)
            }
            _ => (line, 1),
        };
        let (class_str, constraints_str) = match head.split_once('(') {
            Some((c, rest)) => {
                let inner = rest.strip_suffix(')').ok_or_else(|| PatternError::Syntax {
                    line: lno,
                    msg: "unclosed constraint list".into(),
                })?;
                (c.trim(), Some(inner))
            }
            None => (head.trim(), None),
        };
        let class = if class_str == "ANY" {
            None
        } else {
            Some(
                InstrClass::parse(class_str).ok_or_else(|| PatternError::Syntax {
                    line: lno,
                    msg: format!("unknown class `{class_str}`"),
                })?,
            )
        };
        let mut constraints = Vec::new();
        if let Some(cs) = constraints_str {
            for c in cs.split(',') {
                let c = c.trim();
                constraints.push(parse_constraint(c, lno, &groups)?);
                if let OpConstraint::Capture { group, .. } = constraints.last().unwrap() {
                    if !groups.contains(group) {
                        groups.push(group.clone());
                    }
                }
            }
        }
        for rep in 0..repeat {
            // captures only bind on the first copy; later copies reference
            let constraints = if rep == 0 {
                constraints.clone()
            } else {
                constraints
                    .iter()
                    .map(|c| match c {
                        OpConstraint::Capture { op, group } => OpConstraint::BackRef {
                            op: *op,
                            group: group.clone(),
                        },
                        other => other.clone(),
                    })
                    .collect()
            };
            elements.push(Element::Instr { class, constraints });
        }
    }
    Ok(AsmPattern { elements, groups })
}

fn parse_constraint(
    c: &str,
    line: usize,
    groups: &[String],
) -> Result<OpConstraint, PatternError> {
    let rest = c.strip_prefix("op").ok_or_else(|| PatternError::Syntax {
        line,
        msg: format!("expected `opN...`, got `{c}`"),
    })?;
    let sep = rest
        .find(['>', '=', ':'])
        .ok_or_else(|| PatternError::Syntax {
            line,
            msg: "expected `>`, `=` or `:` after operand index".into(),
        })?;
    let op: usize = rest[..sep].parse().map_err(|_| PatternError::Syntax {
        line,
        msg: "bad operand index".into(),
    })?;
    let kind = rest.as_bytes()[sep];
    let arg = rest[sep + 1..].trim();
    match kind {
        b'>' => Ok(OpConstraint::Capture {
            op,
            group: arg.to_string(),
        }),
        b'=' => {
            if !groups.contains(&arg.to_string()) {
                return Err(PatternError::BadBackreference {
                    line,
                    group: arg.to_string(),
                });
            }
            Ok(OpConstraint::BackRef {
                op,
                group: arg.to_string(),
            })
        }
        b':' => {
            let class = match arg {
                "reg" => TokenClass::Reg,
                "imm" => TokenClass::Imm,
                "membase" => TokenClass::MemBase,
                other => {
                    return Err(PatternError::Syntax {
                        line,
                        msg: format!("unknown token class `{other}`"),
                    })
                }
            };
            Ok(OpConstraint::Class { op, class })
        }
        _ => unreachable!(),
    }
}

/// One static match: where it starts, the matched pattern instructions and
/// the realized gap lengths between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSection {
    pub section: String,
    pub start_addr: u64,
    /// Addresses of the instructions matched by non-gap elements.
    pub matched_addrs: Vec<u64>,
    /// Realized instruction count per gap element, in order.
    pub gaps: Vec<u64>,
    pub captures: HashMap<String, String>,
}

/// All matches, one per distinct start index; overlapping matches at
/// different starts are all reported.
pub fn match_pattern(listing: &AsmListing, pattern: &AsmPattern) -> Vec<CandidateSection> {
    let mut out = Vec::new();
    for (section, range) in listing.section_ranges() {
        let instrs = &listing.instructions[range.clone()];
        for start in 0..instrs.len() {
            let mut captures = HashMap::new();
            let mut matched = Vec::new();
            let mut gaps = Vec::new();
            if match_at(instrs, start, &pattern.elements, &mut captures, &mut matched, &mut gaps) {
                out.push(CandidateSection {
                    section: listing.sections[section].clone(),
                    start_addr: instrs[start].addr,
                    matched_addrs: matched,
                    gaps,
                    captures,
                });
            }
        }
    }
    out
}

fn match_at(
    instrs: &[super::listing::AsmInstr],
    mut pos: usize,
    elements: &[Element],
    captures: &mut HashMap<String, String>,
    matched: &mut Vec<u64>,
    gaps: &mut Vec<u64>,
) -> bool {
    let Some((first, rest)) = elements.split_first() else {
        return true;
    };
    match first {
        Element::Instr { class, constraints } => {
            let Some(instr) = instrs.get(pos) else {
                return false;
            };
            if class.is_some_and(|c| c != instr.class) {
                return false;
            }
            let save: HashMap<String, String> = captures.clone();
            for c in constraints {
                let ok = match c {
                    OpConstraint::Capture { op, group } => match instr.operands.get(*op) {
                        Some(tok) => {
                            captures.insert(group.clone(), tok.clone());
                            true
                        }
                        None => false,
                    },
                    OpConstraint::BackRef { op, group } => {
                        matches!((instr.operands.get(*op), captures.get(group)),
                            (Some(tok), Some(cap)) if tok == cap)
                    }
                    OpConstraint::Class { op, class } => instr
                        .operands
                        .get(*op)
                        .is_some_and(|tok| class.matches(tok)),
                };
                if !ok {
                    *captures = save;
                    return false;
                }
            }
            matched.push(instr.addr);
            pos += 1;
            if match_at(instrs, pos, rest, captures, matched, gaps) {
                true
            } else {
                matched.pop();
                *captures = save;
                false
            }
        }
        Element::Gap { min, max } => {
            for take in *min..=*max {
                let end = pos + take as usize;
                if end > instrs.len() {
                    break;
                }
                gaps.push(take);
                if match_at(instrs, end, rest, captures, matched, gaps) {
                    return true;
                }
                gaps.pop();
            }
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::listing::{parse_listing, MnemonicTable};

    pub(crate) const PAIR_GAP_PATTERN: &str = "LOAD(op1>g1)\n.{0,5}\nLOAD(op1=g1)\n.{0,5}\nLOAD(op1=g1)\n";

    fn listing(text: &str) -> AsmListing {
        parse_listing(text, &MnemonicTable::default()).listing
    }

    #[test]
    fn prefetch_pattern_compiles() {
        let p = compile_pattern(PAIR_GAP_PATTERN).unwrap();
        assert_eq!(p.elements.len(), 5);
        assert_eq!(p.groups, vec!["g1"]);
        let gaps = p
            .elements
            .iter()
            .filter(|e| matches!(e, Element::Gap { min: 0, max: 5 }))
            .count();
        assert_eq!(gaps, 2);
        let backrefs = p
            .elements
            .iter()
            .filter_map(|e| match e {
                Element::Instr { constraints, .. } => Some(constraints),
                _ => None,
            })
            .flatten()
            .filter(|c| matches!(c, OpConstraint::BackRef { .. }))
            .count();
        assert_eq!(backrefs, 2);
    }

    #[test]
    fn backref_to_later_group_rejected() {
        let err = compile_pattern("LOAD(op1=g1)\nLOAD(op1>g1)").unwrap_err();
        assert!(matches!(err, PatternError::BadBackreference { line: 1, .. }));
    }

    #[test]
    fn bad_quantifier_rejected() {
        assert!(matches!(
            compile_pattern(".{5,2}"),
            Err(PatternError::BadQuantifier { line: 1 })
        ));
        assert!(matches!(
            compile_pattern(".{1}"),
            Err(PatternError::BadQuantifier { line: 1 })
        ));
    }

    #[test]
    fn repeated_element_matches_adjacent_loads() {
        let p = compile_pattern("LOAD(op1>g1){3}").unwrap();
        let l = listing(
            "1000: ldr x0, [x1, x2]\n1004: ldr x3, [x1, x4]\n1008: ldr x5, [x1, x6]",
        );
        let ms = match_pattern(&l, &p);
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].matched_addrs, vec![0x1000, 0x1004, 0x1008]);
        // with a gap inserted, zero-gap repetition fails
        let l2 = listing(
            "1000: ldr x0, [x1, x2]\n1004: nop\n1008: ldr x3, [x1, x4]\n100c: ldr x5, [x1, x6]",
        );
        assert!(match_pattern(&l2, &p).is_empty());
    }

    #[test]
    fn gaps_and_backrefs_match_spread_loads() {
        let p = compile_pattern(PAIR_GAP_PATTERN).unwrap();
        let l = listing(
            "1000: ldr x0, [x1, x2]\n\
             1004: add x9, x9, #1\n\
             1008: nop\n\
             100c: ldr x3, [x1, x5]\n\
             1010: ldr x4, [x1, x6]",
        );
        let ms = match_pattern(&l, &p);
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].gaps, vec![2, 0]);
        assert_eq!(ms[0].captures["g1"], "[x1");
    }

    #[test]
    fn differing_base_registers_do_not_match() {
        let p = compile_pattern(PAIR_GAP_PATTERN).unwrap();
        let l = listing(
            "1000: ldr x0, [x1, x2]\n1004: ldr x3, [x7, x5]\n1008: ldr x4, [x1, x6]",
        );
        assert!(match_pattern(&l, &p).is_empty());
    }

    #[test]
    fn overlapping_starts_all_reported() {
        let p = compile_pattern("LOAD(op1>g1)\n.{0,5}\nLOAD(op1=g1)").unwrap();
        let l = listing(
            "1000: ldr x0, [x1, x2]\n1004: ldr x3, [x1, x5]\n1008: ldr x4, [x1, x6]",
        );
        let ms = match_pattern(&l, &p);
        assert_eq!(ms.len(), 2);
        assert_eq!(ms[0].start_addr, 0x1000);
        assert_eq!(ms[1].start_addr, 0x1004);
    }
}
