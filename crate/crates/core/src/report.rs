//! Human-readable experiment reports.

use crate::analyze::{FamilyAnalysis, Relation, Validation};
use crate::archive::ArchiveMeta;

fn col_name(table_cols: &[usize], col: usize) -> String {
    table_cols
        .get(col)
        .map(|i| format!("load_{i}"))
        .unwrap_or_else(|| format!("col_{col}"))
}

pub fn describe_relation(cols: &[usize], r: &Relation) -> String {
    match r {
        Relation::ValueConstraint { col, range, missing } => format!(
            "{}[{}..{}] never takes {:?}",
            col_name(cols, *col),
            range.lo,
            range.hi,
            missing
        ),
        Relation::Linear { x, y, range, a, b, modulus } => format!(
            "{}[{lo}..{hi}] = {a}*{}[{lo}..{hi}] + {b} mod {modulus}",
            col_name(cols, *y),
            col_name(cols, *x),
            lo = range.lo,
            hi = range.hi,
        ),
        Relation::ExcludedLinear { x, y, range, a, b, modulus } => format!(
            "{}[{lo}..{hi}] != {a}*{}[{lo}..{hi}] + {b} mod {modulus}",
            col_name(cols, *y),
            col_name(cols, *x),
            lo = range.lo,
            hi = range.hi,
        ),
        Relation::DeltaEqual { cols: chain, range } => {
            let names: Vec<String> = chain.iter().map(|c| col_name(cols, *c)).collect();
            format!(
                "consecutive differences over {} equal (bits {}..{})",
                names.join(", "),
                range.lo,
                range.hi
            )
        }
        Relation::DeltaRange { cols: (a, b), allowed, .. } => format!(
            "{} - {} in {:?}",
            col_name(cols, *b),
            col_name(cols, *a),
            allowed
        ),
        Relation::SamePage { cols: cs } => {
            let names: Vec<String> = cs.iter().map(|c| col_name(cols, *c)).collect();
            format!("samePage({})", names.join(", "))
        }
    }
}

pub fn render_analysis_report(meta: &ArchiveMeta, analysis: &FamilyAnalysis, key: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "analysis report\n  gts: {}\n  key: {key}\n  seed: {}\n  records: {}\n  unstable (below threshold): {}\n\n",
        meta.gts.replace('\n', " "),
        meta.seed,
        analysis
            .classes
            .iter()
            .map(|c| c.members.len())
            .sum::<usize>(),
        analysis.unstable
    ));
    for (class, ca) in analysis.classes.iter().zip(&analysis.per_class) {
        out.push_str(&format!(
            "class {:12} members: {}\n",
            class.label,
            class.members.len()
        ));
        if ca.candidates.single.is_empty() && ca.candidates.pairs.is_empty() {
            out.push_str("  no candidate operands\n");
        } else {
            if !ca.candidates.single.is_empty() {
                let names: Vec<String> = ca
                    .candidates
                    .single
                    .iter()
                    .map(|c| col_name(&ca.table.columns, *c))
                    .collect();
                out.push_str(&format!("  candidate operands: {}\n", names.join(", ")));
            }
            if !ca.candidates.pairs.is_empty() {
                let names: Vec<String> = ca
                    .candidates
                    .pairs
                    .iter()
                    .map(|(a, b)| {
                        format!(
                            "({}, {})",
                            col_name(&ca.table.columns, *a),
                            col_name(&ca.table.columns, *b)
                        )
                    })
                    .collect();
                out.push_str(&format!("  candidate pairs: {}\n", names.join(", ")));
            }
        }
        if ca.relations.is_empty() {
            out.push_str("  relations: none (inconclusive)\n");
        }
        for (r, v) in &ca.relations {
            let verdict = match v {
                Validation::Valid => "valid".to_string(),
                Validation::Invalid { witness_row, reason } => match witness_row {
                    Some(id) => format!("INVALID (witness testcase {id}: {reason})"),
                    None => format!("INVALID ({reason})"),
                },
            };
            out.push_str(&format!(
                "  relation: {:60} [{verdict}]\n",
                describe_relation(&ca.table.columns, r)
            ));
        }
        out.push('\n');
    }
    out
}
