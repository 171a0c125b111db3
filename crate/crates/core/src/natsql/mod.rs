//! The NatSQL intermediate representation: AST, parser, canonical printer
//! and structural validation.

mod ast;
mod parser;
mod printer;
mod validate;

pub use ast::*;
pub use parser::{parse_natsql, NatSqlError};
pub use printer::print_natsql;
pub(crate) use validate::forms_subquery;
pub use validate::{validate, Diagnostic};
