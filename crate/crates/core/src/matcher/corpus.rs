//! Synthetic disassembly corpus with planted pattern instances and a
//! ground-truth log, for matcher evaluation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct CorpusSpec {
    pub functions: usize,
    /// Planted 3-load same-base sequences across the whole corpus.
    pub plants: usize,
    /// Maximum instructions between planted loads.
    pub gap_max: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plant {
    pub section: String,
    pub start_addr: u64,
    pub load_addrs: Vec<u64>,
    pub base_reg: String,
    pub gaps: Vec<u64>,
}

#[derive(Debug)]
pub struct Corpus {
    pub text: String,
    pub plants: Vec<Plant>,
}

/// Generate `functions` sections of filler code with `plants` instances of
/// the 3-load same-base pattern distributed round-robin across them.
pub fn generate_corpus(spec: CorpusSpec) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut text = String::new();
    let mut plants = Vec::with_capacity(spec.plants);
    let mut addr: u64 = 0x1000;

    // filler pool; loads use a rotating base register so accidental
    // same-base triples within the gap bound stay rare
    let fillers = [
        "add x9, x9, #1",
        "sub x10, x10, #2",
        "mov x11, #0",
        "cmp x9, x10",
        "nop",
        "orr x12, x12, x9",
        "str x9, [x28]",
        "eor x13, x13, x13",
    ];

    for f in 0..spec.functions {
        let name = format!("fn_{f:04}");
        text.push_str(&format!("SECTION {name}\n"));
        let body_len = 8 + (rng.random_range(0..24u32) as usize);
        let mut emitted = 0usize;
        let plant_here = f < spec.plants;
        let plant_at = if plant_here {
            Some(rng.random_range(0..body_len as u32) as usize)
        } else {
            None
        };
        let mut i = 0usize;
        while i < body_len || (plant_here && emitted == 0) {
            if plant_at == Some(i) || (i >= body_len && emitted == 0) {
                // plant: three loads from one base register
                let base = format!("[x{}", rng.random_range(1..8u32));
                let start = addr;
                let mut load_addrs = Vec::new();
                let mut gaps = Vec::new();
                for k in 0..3 {
                    let dest = rng.random_range(0..29u32);
                    let idx = rng.random_range(0..29u32);
                    text.push_str(&format!(
                        "{addr:x}: ldr x{dest}, {base}, x{idx}]\n"
                    ));
                    load_addrs.push(addr);
                    addr += 4;
                    if k < 2 {
                        let gap = rng.random_range(0..=spec.gap_max);
                        gaps.push(gap);
                        for _ in 0..gap {
                            let filler = fillers[rng.random_range(0..fillers.len() as u32) as usize];
                            text.push_str(&format!("{addr:x}: {filler}\n"));
                            addr += 4;
                        }
                    }
                }
                plants.push(Plant {
                    section: name.clone(),
                    start_addr: start,
                    load_addrs,
                    base_reg: base,
                    gaps,
                });
                emitted += 1;
            } else if rng.random_bool(0.2) {
                // occasional lone load with its own base register
                let dest = rng.random_range(0..29u32);
                let base = rng.random_range(20..28u32);
                let idx = rng.random_range(0..15u32);
                text.push_str(&format!("{addr:x}: ldr x{dest}, [x{base}, x{idx}]\n"));
                addr += 4;
            } else {
                let filler = fillers[rng.random_range(0..fillers.len() as u32) as usize];
                text.push_str(&format!("{addr:x}: {filler}\n"));
                addr += 4;
            }
            i += 1;
        }
        // section gap so addresses keep increasing
        addr += 0x40;
    }
    Corpus { text, plants }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::{compile_pattern, match_pattern, parse_listing, MnemonicTable};

    pub(crate) const PREFETCH_PATTERN: &str =
        "LOAD(op1>g1)\n.{0,5}\nLOAD(op1=g1)\n.{0,5}\nLOAD(op1=g1)\n";

    #[test]
    fn all_plants_recovered() {
        let corpus = generate_corpus(CorpusSpec {
            functions: 40,
            plants: 12,
            gap_max: 5,
            seed: 99,
        });
        let out = parse_listing(&corpus.text, &MnemonicTable::default());
        assert!(out.skipped.is_empty());
        let pattern = compile_pattern(PREFETCH_PATTERN).unwrap();
        let matches = match_pattern(&out.listing, &pattern);
        for plant in &corpus.plants {
            assert!(
                matches
                    .iter()
                    .any(|m| m.start_addr == plant.start_addr
                        && m.section == plant.section
                        && m.captures["g1"] == plant.base_reg),
                "plant at {:x} not recovered",
                plant.start_addr
            );
        }
        // every reported candidate satisfies the backreference
        let by_addr: std::collections::HashMap<u64, &crate::matcher::AsmInstr> = out
            .listing
            .instructions
            .iter()
            .map(|i| (i.addr, i))
            .collect();
        for m in &matches {
            let bases: Vec<&String> = m
                .matched_addrs
                .iter()
                .map(|a| &by_addr[a].operands[1])
                .collect();
            assert!(bases.windows(2).all(|w| w[0] == w[1]), "match {m:?}");
        }
    }

    #[test]
    fn scan_scale_429_sequences() {
        // a corpus with 429 planted 3-load sequences scans in seconds
        let started = std::time::Instant::now();
        let corpus = generate_corpus(CorpusSpec {
            functions: 450,
            plants: 429,
            gap_max: 5,
            seed: 7,
        });
        assert_eq!(corpus.plants.len(), 429);
        let out = parse_listing(&corpus.text, &MnemonicTable::default());
        let pattern = compile_pattern(PREFETCH_PATTERN).unwrap();
        let matches = match_pattern(&out.listing, &pattern);
        assert!(matches.len() >= 429);
        for plant in &corpus.plants {
            assert!(matches.iter().any(|m| m.start_addr == plant.start_addr));
        }
        assert!(
            started.elapsed() < std::time::Duration::from_secs(10),
            "scan took {:?}",
            started.elapsed()
        );
    }
}
