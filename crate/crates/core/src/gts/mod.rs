//! The generative testcase specification language: a small DSL describing
//! families of load/arith/nop/branch programs together with operand
//! mutation, structural operators and a cache-priming precondition.
//!
//! Concrete syntax (whitespace-insensitive):
//!
//! ```text
//! gts       := ["pre{" seq "}"] opexpr
//! opexpr    := "shuffle{" opexpr "}" | "subset{" opexpr "}"
//!            | "slide{" opexpr ";" INT "}" | "merge{" opexpr "|" opexpr "}"
//!            | "offmut{" opexpr "}" | "linemut{" opexpr "}"
//!            | "rep{" opexpr ";" INT "}" | seq
//! seq       := item+
//! item      := directive
//!            | "(" seq ")^{" INT ["," ("t"|"s") "+=" INT] "}"
//!            | "W(" INT ")"
//! directive := "M" ["[" attr ("," attr)* "]"] | "A" ["(" ID ("," ID)* ")"]
//!            | "NOP" | "SB(" ID "," BOOL ")" | "B(" ID "," BOOL "," INT ")"
//! attr      := ("t"|"s") "=" ID [("+"|"-") INT] | "w=" INT
//! ```
//!
//! `offmut` enumerates word offsets of every in-scope load that does not pin
//! its offset with `w=`; `linemut` enumerates set indices of every in-scope
//! load. The two mutation operators may not be nested, and may only appear
//! at the root of the operator tree (optionally under `rep`).

mod ast;
mod parser;
mod render;

pub use ast::{AttrExpr, Directive, GtsAst, OpExpr, PowerStep, SeqItem, StepAttr, Symbol};
pub use parser::{parse_gts, ParseError};
pub use render::render_gts;
