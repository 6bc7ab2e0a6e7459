//! Textual disassembly ingestion.
//!
//! Format: one instruction per line, `<hex-addr>: <mnemonic> <operands>`,
//! with `SECTION <name>` headers. Operands split on commas, so a memory
//! operand like `[x1, x2]` becomes the tokens `[x1` and `x2]`, matching
//! the operand conventions of the pattern language.

use std::collections::BTreeMap;

/// Coarse instruction classes the pattern language matches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstrClass {
    Load,
    Store,
    Arith,
    Branch,
    Other,
}

impl InstrClass {
    pub fn parse(s: &str) -> Option<InstrClass> {
        match s {
            "LOAD" => Some(InstrClass::Load),
            "STORE" => Some(InstrClass::Store),
            "ARITH" => Some(InstrClass::Arith),
            "BRANCH" => Some(InstrClass::Branch),
            "OTHER" => Some(InstrClass::Other),
            _ => None,
        }
    }
}

/// Mnemonic -> class table. Data-driven so the recognized ISA subset can
/// grow without code changes.
#[derive(Debug, Clone)]
pub struct MnemonicTable {
    map: BTreeMap<String, InstrClass>,
}

impl Default for MnemonicTable {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        for m in ["ldr", "ldrb", "ldrh", "ldrsw", "ldp", "ldur"] {
            map.insert(m.to_string(), InstrClass::Load);
        }
        for m in ["str", "strb", "strh", "stp", "stur"] {
            map.insert(m.to_string(), InstrClass::Store);
        }
        for m in [
            "add", "sub", "mov", "movz", "movk", "cmp", "and", "orr", "eor", "lsl", "lsr", "asr",
            "mul", "madd", "neg", "tst",
        ] {
            map.insert(m.to_string(), InstrClass::Arith);
        }
        for m in [
            "b", "bl", "br", "blr", "ret", "cbz", "cbnz", "tbz", "tbnz", "b.eq", "b.ne", "b.lt",
            "b.le", "b.gt", "b.ge", "b.hi", "b.lo", "b.cs", "b.cc",
        ] {
            map.insert(m.to_string(), InstrClass::Branch);
        }
        map.insert("nop".to_string(), InstrClass::Other);
        MnemonicTable { map }
    }
}

impl MnemonicTable {
    /// Parse `mnemonic=CLASS` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut table = MnemonicTable::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (mn, class) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `mnemonic=CLASS`", i + 1))?;
            let class = InstrClass::parse(class.trim())
                .ok_or_else(|| format!("line {}: unknown class `{}`", i + 1, class.trim()))?;
            table.map.insert(mn.trim().to_string(), class);
        }
        Ok(table)
    }

    pub fn classify(&self, mnemonic: &str) -> InstrClass {
        self.map
            .get(mnemonic)
            .copied()
            .unwrap_or(InstrClass::Other)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsmInstr {
    pub addr: u64,
    pub mnemonic: String,
    pub operands: Vec<String>,
    pub class: InstrClass,
    pub section: usize,
}

#[derive(Debug, Clone, Default)]
pub struct AsmListing {
    pub sections: Vec<String>,
    pub instructions: Vec<AsmInstr>,
}

impl AsmListing {
    pub fn section_ranges(&self) -> Vec<(usize, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        let mut start = 0usize;
        let mut current = None;
        for (i, instr) in self.instructions.iter().enumerate() {
            match current {
                None => {
                    current = Some(instr.section);
                    start = i;
                }
                Some(s) if s != instr.section => {
                    out.push((s, start..i));
                    current = Some(instr.section);
                    start = i;
                }
                _ => {}
            }
        }
        if let Some(s) = current {
            out.push((s, start..self.instructions.len()));
        }
        out
    }
}

#[derive(Debug)]
pub struct ParseOutcome {
    pub listing: AsmListing,
    /// (line number, content) of unparsable lines, skipped with a warning.
    pub skipped: Vec<(usize, String)>,
}

pub fn parse_listing(text: &str, table: &MnemonicTable) -> ParseOutcome {
    let mut listing = AsmListing::default();
    let mut skipped = Vec::new();
    let mut section = 0usize;
    listing.sections.push(".text".to_string());
    let mut last_addr: Option<u64> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix("SECTION ") {
            listing.sections.push(name.trim().to_string());
            section = listing.sections.len() - 1;
            last_addr = None;
            continue;
        }
        let Some((addr_part, rest)) = line.split_once(':') else {
            skipped.push((lineno + 1, raw.to_string()));
            continue;
        };
        let addr_str = addr_part.trim().trim_start_matches("0x");
        let Ok(addr) = u64::from_str_radix(addr_str, 16) else {
            skipped.push((lineno + 1, raw.to_string()));
            continue;
        };
        if let Some(prev) = last_addr {
            if addr <= prev {
                skipped.push((lineno + 1, raw.to_string()));
                continue;
            }
        }
        let rest = rest.trim();
        if rest.is_empty() {
            skipped.push((lineno + 1, raw.to_string()));
            continue;
        }
        let (mnemonic, ops) = match rest.split_once(char::is_whitespace) {
            Some((m, o)) => (m.trim(), o.trim()),
            None => (rest, ""),
        };
        let operands: Vec<String> = if ops.is_empty() {
            Vec::new()
        } else {
            ops.split(',').map(|t| t.trim().to_string()).collect()
        };
        last_addr = Some(addr);
        listing.instructions.push(AsmInstr {
            addr,
            mnemonic: mnemonic.to_string(),
            operands,
            class: table.classify(mnemonic),
            section,
        });
    }
    ParseOutcome { listing, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_load_with_bracket_operands() {
        let out = parse_listing("1000: ldr x0, [x1, x2]", &MnemonicTable::default());
        assert!(out.skipped.is_empty());
        let i = &out.listing.instructions[0];
        assert_eq!(i.addr, 0x1000);
        assert_eq!(i.class, InstrClass::Load);
        assert_eq!(i.operands, vec!["x0", "[x1", "x2]"]);
    }

    #[test]
    fn nop_parses_as_other() {
        let out = parse_listing("1004: nop", &MnemonicTable::default());
        assert_eq!(out.listing.instructions[0].class, InstrClass::Other);
        assert_eq!(out.listing.instructions[0].mnemonic, "nop");
    }

    #[test]
    fn garbage_lines_skipped_with_warning() {
        let out = parse_listing(
            "1000: ldr x0, [x1]\nthis is not asm\n1008: add x0, x0, #1",
            &MnemonicTable::default(),
        );
        assert_eq!(out.listing.instructions.len(), 2);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].0, 2);
    }

    #[test]
    fn addresses_must_increase_within_a_section() {
        let out = parse_listing(
            "1000: nop\n0ff0: nop\nSECTION .text2\n0100: nop",
            &MnemonicTable::default(),
        );
        assert_eq!(out.listing.instructions.len(), 2);
        assert_eq!(out.skipped.len(), 1);
    }

    #[test]
    fn custom_table_extends_the_isa() {
        let table = MnemonicTable::parse("vldr=LOAD\n# comment\nfancy.op=ARITH").unwrap();
        assert_eq!(table.classify("vldr"), InstrClass::Load);
        assert_eq!(table.classify("fancy.op"), InstrClass::Arith);
        assert_eq!(table.classify("ldr"), InstrClass::Load);
    }
}
