//! Junction description language.
//!
//! ```text
//! junction paper {
//!   roads 4
//!   signals [R, Y, GS, GR, GL, M]
//!   phase p1 duration 60 { road 1: [GS, GR]; road 2: [R, M]; ... }
//!   program traditional cycle [p1, y1, ...]
//!   emergency road 1 hold e1 min 60
//!   safe all_yellow transition 15
//! }
//! ```
//!
//! Omitting `conflicts { ... }` selects [`ConflictMatrix::derived_default`];
//! a `conflicts` block replaces it. Emergency holds for roads without an
//! `emergency` line are rotations of the lowest-numbered declared one.
//!
//! [`ConflictMatrix::derived_default`]: crate::conflict::ConflictMatrix::derived_default

pub mod ast;
mod diagnostic;
mod hdl;
mod lexer;
mod parser;
mod printer;
mod validate;

pub use ast::JunctionSpec;
pub use diagnostic::{has_errors, Diagnostic, Severity, Span};
pub use hdl::{emit_hdl, InvalidModuleName};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;
pub use printer::pretty_print;
pub use validate::{validate, Compiled};

use crate::table::PhaseTable;

const PAPER_JUNCTION: &str = include_str!("../../fixtures/paper.junction");

/// Source text of the reference four-road junction.
pub fn builtin_paper_junction() -> &'static str {
    PAPER_JUNCTION
}

/// Parse and validate in one go.
pub fn compile(source: &str) -> Result<Compiled, Vec<Diagnostic>> {
    validate(&parse(source)?)
}

/// The compiled reference junction.
pub fn compile_builtin() -> PhaseTable {
    compile(PAPER_JUNCTION)
        .expect("builtin junction always validates")
        .table
}
