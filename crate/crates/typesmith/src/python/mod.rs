//! A lightweight Python 3 front end: a lossless tokenizer and a
//! statement/expression parser covering the subset the pipeline needs.
//!
//! The tokenizer keeps byte spans so downstream edits can splice annotations
//! without disturbing any other byte. The parser is deliberately shallow:
//! it resolves module structure, function signatures (with exact spans for
//! every annotation site), and enough expression structure for the built-in
//! checker. Unrecognized compound statements (e.g. `match`) are parsed as
//! opaque blocks so their bodies are still traversed.

pub mod ast;
mod lexer;
mod parser;

pub use ast::*;
pub use lexer::{tokenize, TokKind, Token};
pub use parser::parse_module;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at line {line}: {message}")]
pub struct PyError {
    pub line: u32,
    pub message: String,
}

impl PyError {
    pub fn new(line: u32, message: impl Into<String>) -> Self {
        PyError {
            line,
            message: message.into(),
        }
    }
}

/// Render one token the way usage windows and token streams show it.
pub fn render_token(tok: &Token) -> String {
    match tok.kind {
        TokKind::Newline => "\n".to_string(),
        TokKind::Indent => "<ind>".to_string(),
        TokKind::Dedent => "<ded>".to_string(),
        _ => tok.text.clone(),
    }
}
