//! Canonical printer; `parse_gts(render_gts(a))` is structurally equal to `a`.

use super::ast::*;

pub fn render_gts(ast: &GtsAst) -> String {
    let mut out = String::new();
    if !ast.pre.is_empty() {
        out.push_str("pre{ ");
        for (i, d) in ast.pre.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            render_directive(&mut out, d, &ast.symbols);
        }
        out.push_str(" } ");
    }
    render_op(&mut out, &ast.body, &ast.symbols);
    out
}

fn render_op(out: &mut String, op: &OpExpr, sym: &SymbolTable) {
    match op {
        OpExpr::Seq(items) => render_seq(out, items, sym),
        OpExpr::Shuffle(inner) => wrap(out, "shuffle", inner, sym),
        OpExpr::Subset(inner) => wrap(out, "subset", inner, sym),
        OpExpr::Slide(inner, n) => {
            out.push_str("slide{ ");
            render_op(out, inner, sym);
            out.push_str(&format!(" ; {n} }}"));
        }
        OpExpr::Merge(a, b) => {
            out.push_str("merge{ ");
            render_op(out, a, sym);
            out.push_str(" | ");
            render_op(out, b, sym);
            out.push_str(" }");
        }
        OpExpr::OffsetMutation(inner) => wrap(out, "offmut", inner, sym),
        OpExpr::LineMutation(inner) => wrap(out, "linemut", inner, sym),
        OpExpr::Repetition(inner, n) => {
            out.push_str("rep{ ");
            render_op(out, inner, sym);
            out.push_str(&format!(" ; {n} }}"));
        }
    }
}

fn wrap(out: &mut String, kw: &str, inner: &OpExpr, sym: &SymbolTable) {
    out.push_str(kw);
    out.push_str("{ ");
    render_op(out, inner, sym);
    out.push_str(" }");
}

fn render_seq(out: &mut String, items: &[SeqItem], sym: &SymbolTable) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        match item {
            SeqItem::Directive(d) => render_directive(out, d, sym),
            SeqItem::Power { body, n, step } => {
                out.push('(');
                render_seq(out, body, sym);
                out.push_str(&format!(")^{{{n}"));
                if let Some(s) = step {
                    let attr = match s.attr {
                        StepAttr::Tag => 't',
                        StepAttr::Set => 's',
                    };
                    out.push_str(&format!(",{attr}+={}", s.increment));
                }
                out.push('}');
            }
            SeqItem::Wildcard(n) => out.push_str(&format!("W({n})")),
        }
    }
}

fn render_directive(out: &mut String, d: &Directive, sym: &SymbolTable) {
    match d {
        Directive::Mem { tag, set, word } => {
            out.push('M');
            if tag.is_some() || set.is_some() || word.is_some() {
                out.push('[');
                let mut first = true;
                if let Some(t) = tag {
                    render_attr(out, 't', t, sym);
                    first = false;
                }
                if let Some(s) = set {
                    if !first {
                        out.push(',');
                    }
                    render_attr(out, 's', s, sym);
                    first = false;
                }
                if let Some(w) = word {
                    if !first {
                        out.push(',');
                    }
                    out.push_str(&format!("w={w}"));
                }
                out.push(']');
            }
        }
        Directive::Arith { operands } => {
            out.push('A');
            if !operands.is_empty() {
                out.push('(');
                for (i, o) in operands.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(sym.name(*o));
                }
                out.push(')');
            }
        }
        Directive::Nop => out.push_str("NOP"),
        Directive::SetBranch { var, value } => {
            out.push_str(&format!("SB({},{})", sym.name(*var), value));
        }
        Directive::Branch { var, value, steps } => {
            out.push_str(&format!("B({},{},{})", sym.name(*var), value, steps));
        }
    }
}

fn render_attr(out: &mut String, kind: char, a: &AttrExpr, sym: &SymbolTable) {
    out.push(kind);
    out.push('=');
    out.push_str(sym.name(a.base));
    use std::cmp::Ordering;
    match a.delta.cmp(&0) {
        Ordering::Greater => out.push_str(&format!("+{}", a.delta)),
        Ordering::Less => out.push_str(&format!("-{}", -a.delta)),
        Ordering::Equal => {}
    }
}
