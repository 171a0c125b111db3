//! Toolkit for the NatSQL intermediate representation of text-to-SQL
//! queries.
//!
//! The pipeline runs NatSQL text through [`natsql::parse_natsql`], then
//! [`compiler::compile`] turns it into a [`sql::SqlQuery`] that renders to
//! executable SQLite. [`converter`] goes the other way, from Spider gold SQL
//! to NatSQL, and [`evaluator`] scores predictions with exact match,
//! per-component F1 and execution match.
//!
//! ```
//! use natsql::{compile, parse_natsql, render_sql, CompileConfig, Dialect};
//!
//! let schemas = natsql::golden::schemas();
//! let pets = &schemas["pets_1"];
//! let q = parse_natsql("SELECT student.fname WHERE @ not in has_pet.*", pets, Dialect::Base)?;
//! let sql = compile(&q, pets, &CompileConfig::default())?;
//! assert_eq!(
//!     render_sql(&sql, pets),
//!     "SELECT Fname FROM Student WHERE StuID NOT IN ( SELECT StuID FROM Has_Pet )"
//! );
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod compiler;
pub mod converter;
pub mod dataset;
pub mod evaluator;
pub mod golden;
mod lex;
pub mod natsql;
pub mod schema;
pub mod sql;
pub mod textprep;

#[cfg(test)]
pub(crate) mod testing;

pub use compiler::{compile, compile_to_text, CompileConfig, CompileError};
pub use natsql::{parse_natsql, print_natsql, Dialect, NatSqlQuery};
pub use schema::{ColumnRef, DatabaseSchema, SchemaError};
pub use sql::{render_sql, SqlQuery};
