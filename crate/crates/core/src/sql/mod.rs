//! SQL abstract syntax, rendering and parsing.

mod ast;
mod parser;
mod render;
mod spider;

use thiserror::Error;

pub use ast::*;
pub use parser::parse_sql;
pub use render::render_sql;
pub use spider::load_spider_sql;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SqlError {
    #[error("lexical error at {pos} near {snippet:?}: {message}")]
    Lex {
        pos: usize,
        snippet: String,
        message: String,
    },
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("malformed parsed SQL: {0}")]
    Malformed(String),
    #[error("unsupported SQL: {0}")]
    Unsupported(String),
}
