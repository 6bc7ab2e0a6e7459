//! Hand-rolled recursive-descent parser for the specification language.

use super::ast::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: expected {expected}")]
    Syntax {
        line: u32,
        col: u32,
        expected: String,
    },
    #[error("unknown directive `{name}` at {line}:{col}")]
    UnknownDirective { line: u32, col: u32, name: String },
    #[error("malformed attribute at {line}:{col}: {msg}")]
    MalformedAttribute { line: u32, col: u32, msg: String },
    #[error("nested or non-root mutation operator at {line}:{col}")]
    NestedMutation { line: u32, col: u32 },
}

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn skip_ws(&mut self) {
        while let Some(&c) = self.src.get(self.pos) {
            if c == b'\n' {
                self.pos += 1;
                self.line += 1;
                self.col = 1;
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
                self.col += 1;
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    /// Peek without consuming whitespace first (for tightly-bound suffixes
    /// like the `[` of `M[...]`).
    fn peek_raw(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.src.get(self.pos).copied();
        if let Some(c) = c {
            self.pos += 1;
            if c == b'\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        c
    }

    fn err(&self, expected: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            col: self.col,
            expected: expected.into(),
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), ParseError> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(token.as_bytes()) {
            for _ in 0..token.len() {
                self.bump();
            }
            Ok(())
        } else {
            Err(self.err(format!("`{token}`")))
        }
    }

    /// Consume `token` if present (after whitespace).
    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(token.as_bytes()) {
            for _ in 0..token.len() {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    /// Match a keyword followed by `{`; the keyword must not be an identifier prefix.
    fn eat_keyword_brace(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        if !rest.starts_with(kw.as_bytes()) {
            return false;
        }
        let mut after = &rest[kw.len()..];
        let mut extra = 0;
        while let Some(&c) = after.first() {
            if c.is_ascii_whitespace() {
                after = &after[1..];
                extra += 1;
            } else {
                break;
            }
        }
        if after.first() == Some(&b'{') {
            for _ in 0..kw.len() + extra + 1 {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(&c) = self.src.get(self.pos) {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.bump();
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(self.err("identifier"));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .to_string())
    }

    fn uint(&mut self) -> Result<u64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(&c) = self.src.get(self.pos) {
            if c.is_ascii_digit() {
                self.bump();
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(self.err("integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("integer in range"))
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        self.skip_ws();
        let neg = self.eat("-");
        if !neg {
            let _ = self.eat("+");
        }
        let v = self.uint()? as i64;
        Ok(if neg { -v } else { v })
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }
}

pub fn parse_gts(text: &str) -> Result<GtsAst, ParseError> {
    let mut cur = Cursor::new(text);
    let mut symbols = SymbolTable::default();

    let pre = if cur.eat_keyword_brace("pre") {
        let seq = parse_seq(&mut cur, &mut symbols)?;
        cur.expect("}")?;
        let mut loads = Vec::new();
        for item in seq {
            match item {
                SeqItem::Directive(d @ Directive::Mem { .. }) => loads.push(d),
                SeqItem::Power { body, n, step } => {
                    // allow simple powers of loads in the precondition
                    for (_, d) in expand_pre_power(&body, n, step, &cur)? {
                        loads.push(d);
                    }
                }
                _ => {
                    return Err(ParseError::MalformedAttribute {
                        line: cur.line,
                        col: cur.col,
                        msg: "precondition may contain only memory loads".into(),
                    })
                }
            }
        }
        loads
    } else {
        Vec::new()
    };

    let body = parse_opexpr(&mut cur, &mut symbols)?;
    cur.skip_ws();
    if !cur.at_end() {
        return Err(cur.err("end of input"));
    }
    check_mutation_position(&body, false, false)?;
    Ok(GtsAst { pre, body, symbols })
}

fn expand_pre_power(
    body: &[SeqItem],
    n: u64,
    step: Option<PowerStep>,
    cur: &Cursor,
) -> Result<Vec<(u64, Directive)>, ParseError> {
    // cursor is read-only here, only for error positions
    let mut out = Vec::new();
    for k in 0..n {
        for item in body {
            match item {
                SeqItem::Directive(Directive::Mem { tag, set, word }) => {
                    let (mut tag, mut set) = (*tag, *set);
                    if let Some(s) = step {
                        let delta = s.increment * k as i64;
                        match s.attr {
                            StepAttr::Tag => tag = tag.map(|a| a.shifted(delta)),
                            StepAttr::Set => set = set.map(|a| a.shifted(delta)),
                        }
                    }
                    out.push((k, Directive::Mem { tag, set, word: *word }));
                }
                _ => {
                    return Err(ParseError::MalformedAttribute {
                        line: cur.line,
                        col: cur.col,
                        msg: "precondition may contain only memory loads".into(),
                    })
                }
            }
        }
    }
    Ok(out)
}

/// Mutation operators may only sit at the root of the operator tree,
/// optionally under `rep`, and may not nest.
fn check_mutation_position(
    op: &OpExpr,
    under_other: bool,
    under_mutation: bool,
) -> Result<(), ParseError> {
    let fail = || ParseError::NestedMutation { line: 0, col: 0 };
    match op {
        OpExpr::OffsetMutation(inner) | OpExpr::LineMutation(inner) => {
            if under_other || under_mutation {
                return Err(fail());
            }
            check_mutation_position(inner, under_other, true)
        }
        OpExpr::Repetition(inner, _) => check_mutation_position(inner, under_other, under_mutation),
        OpExpr::Shuffle(inner) | OpExpr::Subset(inner) | OpExpr::Slide(inner, _) => {
            check_mutation_position(inner, true, under_mutation)
        }
        OpExpr::Merge(a, b) => {
            check_mutation_position(a, true, under_mutation)?;
            check_mutation_position(b, true, under_mutation)
        }
        OpExpr::Seq(_) => Ok(()),
    }
}

fn parse_opexpr(cur: &mut Cursor, sym: &mut SymbolTable) -> Result<OpExpr, ParseError> {
    if cur.eat_keyword_brace("shuffle") {
        let inner = parse_opexpr(cur, sym)?;
        cur.expect("}")?;
        return Ok(OpExpr::Shuffle(Box::new(inner)));
    }
    if cur.eat_keyword_brace("subset") {
        let inner = parse_opexpr(cur, sym)?;
        cur.expect("}")?;
        return Ok(OpExpr::Subset(Box::new(inner)));
    }
    if cur.eat_keyword_brace("slide") {
        let inner = parse_opexpr(cur, sym)?;
        cur.expect(";")?;
        let n = cur.uint()?;
        cur.expect("}")?;
        if n == 0 {
            return Err(cur.err("slide count >= 1"));
        }
        return Ok(OpExpr::Slide(Box::new(inner), n));
    }
    if cur.eat_keyword_brace("merge") {
        let a = parse_opexpr(cur, sym)?;
        cur.expect("|")?;
        let b = parse_opexpr(cur, sym)?;
        cur.expect("}")?;
        return Ok(OpExpr::Merge(Box::new(a), Box::new(b)));
    }
    if cur.eat_keyword_brace("offmut") {
        let inner = parse_opexpr(cur, sym)?;
        cur.expect("}")?;
        return Ok(OpExpr::OffsetMutation(Box::new(inner)));
    }
    if cur.eat_keyword_brace("linemut") {
        let inner = parse_opexpr(cur, sym)?;
        cur.expect("}")?;
        return Ok(OpExpr::LineMutation(Box::new(inner)));
    }
    if cur.eat_keyword_brace("rep") {
        let inner = parse_opexpr(cur, sym)?;
        cur.expect(";")?;
        let n = cur.uint()?;
        cur.expect("}")?;
        if n == 0 {
            return Err(cur.err("repetition count >= 1"));
        }
        return Ok(OpExpr::Repetition(Box::new(inner), n));
    }
    let seq = parse_seq(cur, sym)?;
    if seq.is_empty() {
        return Err(cur.err("directive sequence"));
    }
    Ok(OpExpr::Seq(seq))
}

fn parse_seq(cur: &mut Cursor, sym: &mut SymbolTable) -> Result<Vec<SeqItem>, ParseError> {
    let mut items = Vec::new();
    loop {
        match cur.peek() {
            Some(b'(') => {
                cur.bump();
                let body = parse_seq(cur, sym)?;
                if body.is_empty() {
                    return Err(cur.err("directive sequence inside power"));
                }
                cur.expect(")")?;
                cur.expect("^")?;
                cur.expect("{")?;
                let n = cur.uint()?;
                let step = if cur.eat(",") {
                    let attr = match cur.peek() {
                        Some(b't') => StepAttr::Tag,
                        Some(b's') => StepAttr::Set,
                        _ => return Err(cur.err("`t` or `s`")),
                    };
                    cur.bump();
                    cur.expect("+=")?;
                    let increment = cur.int()?;
                    Some(PowerStep { attr, increment })
                } else {
                    None
                };
                cur.expect("}")?;
                items.push(SeqItem::Power { body, n, step });
            }
            Some(c) if c.is_ascii_alphabetic() => {
                // stop at operator keywords so the caller can close braces
                if looking_at_keyword(cur) {
                    break;
                }
                let save = (cur.pos, cur.line, cur.col);
                match parse_directive(cur, sym)? {
                    Some(item) => items.push(item),
                    None => {
                        cur.pos = save.0;
                        cur.line = save.1;
                        cur.col = save.2;
                        break;
                    }
                }
            }
            _ => break,
        }
    }
    Ok(items)
}

fn looking_at_keyword(cur: &mut Cursor) -> bool {
    cur.skip_ws();
    let rest = &cur.src[cur.pos..];
    for kw in [
        "shuffle", "subset", "slide", "merge", "offmut", "linemut", "rep", "pre",
    ] {
        if rest.starts_with(kw.as_bytes()) {
            let after = rest[kw.len()..]
                .iter()
                .find(|c| !c.is_ascii_whitespace());
            if after == Some(&b'{') {
                return true;
            }
        }
    }
    false
}

/// Parse one directive. Returns Ok(None) when the next word is not a
/// directive starter (lets sequences end before `}`/`|`/`;`).
fn parse_directive(
    cur: &mut Cursor,
    sym: &mut SymbolTable,
) -> Result<Option<SeqItem>, ParseError> {
    cur.skip_ws();
    let (line, col) = (cur.line, cur.col);
    let word_start = cur.pos;
    let mut end = cur.pos;
    while let Some(&c) = cur.src.get(end) {
        if c.is_ascii_alphanumeric() || c == b'_' {
            end += 1;
        } else {
            break;
        }
    }
    let word = std::str::from_utf8(&cur.src[word_start..end]).unwrap();
    match word {
        "M" => {
            for _ in word_start..end {
                cur.bump();
            }
            let mut tag = None;
            let mut set = None;
            let mut wordoff = None;
            if cur.peek_raw() == Some(b'[') {
                cur.bump();
                loop {
                    parse_attr(cur, sym, &mut tag, &mut set, &mut wordoff)?;
                    if cur.eat(",") {
                        continue;
                    }
                    cur.expect("]")?;
                    break;
                }
            }
            Ok(Some(SeqItem::Directive(Directive::Mem {
                tag,
                set,
                word: wordoff,
            })))
        }
        "A" => {
            for _ in word_start..end {
                cur.bump();
            }
            let mut operands = Vec::new();
            if cur.peek_raw() == Some(b'(') {
                cur.bump();
                loop {
                    let id = cur.ident()?;
                    operands.push(sym.intern(&id));
                    if cur.eat(",") {
                        continue;
                    }
                    cur.expect(")")?;
                    break;
                }
            }
            Ok(Some(SeqItem::Directive(Directive::Arith { operands })))
        }
        "NOP" => {
            for _ in word_start..end {
                cur.bump();
            }
            Ok(Some(SeqItem::Directive(Directive::Nop)))
        }
        "SB" => {
            for _ in word_start..end {
                cur.bump();
            }
            cur.expect("(")?;
            let var = cur.ident()?;
            cur.expect(",")?;
            let value = parse_bool(cur)?;
            cur.expect(")")?;
            Ok(Some(SeqItem::Directive(Directive::SetBranch {
                var: sym.intern(&var),
                value,
            })))
        }
        "B" => {
            for _ in word_start..end {
                cur.bump();
            }
            cur.expect("(")?;
            let var = cur.ident()?;
            cur.expect(",")?;
            let value = parse_bool(cur)?;
            cur.expect(",")?;
            let steps = cur.uint()?;
            cur.expect(")")?;
            if steps == 0 {
                return Err(ParseError::MalformedAttribute {
                    line,
                    col,
                    msg: "branch step count must be >= 1".into(),
                });
            }
            Ok(Some(SeqItem::Directive(Directive::Branch {
                var: sym.intern(&var),
                value,
                steps,
            })))
        }
        "W" => {
            for _ in word_start..end {
                cur.bump();
            }
            cur.expect("(")?;
            let n = cur.uint()?;
            cur.expect(")")?;
            Ok(Some(SeqItem::Wildcard(n)))
        }
        "" => Ok(None),
        other => Err(ParseError::UnknownDirective {
            line,
            col,
            name: other.to_string(),
        }),
    }
}

fn parse_bool(cur: &mut Cursor) -> Result<bool, ParseError> {
    if cur.eat("true") {
        Ok(true)
    } else if cur.eat("false") {
        Ok(false)
    } else {
        Err(cur.err("`true` or `false`"))
    }
}

fn parse_attr(
    cur: &mut Cursor,
    sym: &mut SymbolTable,
    tag: &mut Option<AttrExpr>,
    set: &mut Option<AttrExpr>,
    word: &mut Option<u64>,
) -> Result<(), ParseError> {
    cur.skip_ws();
    let (line, col) = (cur.line, cur.col);
    let kind = match cur.peek() {
        Some(b't') => 't',
        Some(b's') => 's',
        Some(b'w') => 'w',
        _ => return Err(cur.err("attribute `t=`, `s=` or `w=`")),
    };
    cur.bump();
    cur.expect("=")?;
    if kind == 'w' {
        let v = cur.uint()?;
        *word = Some(v);
        return Ok(());
    }
    let id = cur.ident()?;
    let base = sym.intern(&id);
    let mut delta = 0i64;
    cur.skip_ws();
    match cur.peek_raw() {
        Some(b'+') => {
            cur.bump();
            delta = cur.uint()? as i64;
        }
        Some(b'-') => {
            cur.bump();
            delta = -(cur.uint()? as i64);
        }
        _ => {}
    }
    let expr = AttrExpr { base, delta };
    let slot = if kind == 't' { tag } else { set };
    if slot.is_some() {
        return Err(ParseError::MalformedAttribute {
            line,
            col,
            msg: format!("duplicate `{kind}` attribute"),
        });
    }
    *slot = Some(expr);
    Ok(())
}
