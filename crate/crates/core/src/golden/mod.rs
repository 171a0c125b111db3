//! Hand-checked (question, NatSQL, SQL) triples with miniature SQLite
//! databases to run them on.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rusqlite::Connection;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{load_schemas, Example};
use crate::natsql::{parse_natsql, Dialect, NatSqlError, NatSqlQuery};
use crate::schema::DatabaseSchema;
use crate::textprep::{extract_values, fill_values, CellIndex, ExtractOptions, FillError};

pub const TABLES_JSON: &str = include_str!("../../corpus/tables.json");
pub const GOLDEN_JSON: &str = include_str!("../../corpus/golden.json");

const FIXTURES: [(&str, &str); 10] = [
    (
        "apartment_rentals",
        include_str!("../../corpus/fixtures/apartment_rentals.sql"),
    ),
    ("car_1", include_str!("../../corpus/fixtures/car_1.sql")),
    (
        "concert_singer",
        include_str!("../../corpus/fixtures/concert_singer.sql"),
    ),
    (
        "department_store",
        include_str!("../../corpus/fixtures/department_store.sql"),
    ),
    (
        "employee_hire_evaluation",
        include_str!("../../corpus/fixtures/employee_hire_evaluation.sql"),
    ),
    ("museum_visit", include_str!("../../corpus/fixtures/museum_visit.sql")),
    ("pets_1", include_str!("../../corpus/fixtures/pets_1.sql")),
    ("sakila_1", include_str!("../../corpus/fixtures/sakila_1.sql")),
    ("tvshow", include_str!("../../corpus/fixtures/tvshow.sql")),
    ("world_1", include_str!("../../corpus/fixtures/world_1.sql")),
];

#[derive(Debug, Error)]
pub enum GoldenError {
    #[error("no fixture database for `{0}`")]
    NoFixture(String),
    #[error("no schema for `{0}`")]
    NoSchema(String),
    #[error("sqlite: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("natsql: {0}")]
    NatSql(#[from] NatSqlError),
    #[error("{0}")]
    Fill(#[from] FillError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenExample {
    pub id: String,
    pub db_id: String,
    pub question: String,
    /// May contain `value` slots, filled from the question.
    pub natsql: String,
    pub dialect: Dialect,
    /// Gold SQL.
    pub query: String,
}

impl GoldenExample {
    pub fn example(&self) -> Example {
        let mut e = Example::new(&self.question, &self.db_id, &self.query);
        e.natsql = Some(self.natsql.clone());
        e
    }

    /// Parse the NatSQL and fill any value slots with values from the
    /// question, in order of appearance.
    pub fn natsql_query(&self, schema: &DatabaseSchema, cells: Option<&CellIndex>) -> Result<NatSqlQuery, GoldenError> {
        let parsed = parse_natsql(&self.natsql, schema, self.dialect)?;
        if parsed.value_slots() == 0 {
            return Ok(parsed);
        }
        let values = extract_values(&self.question, cells, ExtractOptions::default());
        Ok(fill_values(&parsed, &values)?)
    }
}

pub fn examples() -> Vec<GoldenExample> {
    serde_json::from_str(GOLDEN_JSON).expect("embedded golden corpus parses")
}

pub fn schemas() -> HashMap<String, DatabaseSchema> {
    load_schemas(TABLES_JSON).expect("embedded schemas load")
}

pub fn fixture_sql(db_id: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(db, _)| *db == db_id).map(|(_, sql)| *sql)
}

pub fn fixture_ids() -> impl Iterator<Item = &'static str> {
    FIXTURES.iter().map(|(db, _)| *db)
}

/// Build `dir/<db_id>/<db_id>.sqlite` from the fixture script, replacing any
/// existing file.
pub fn write_database(db_id: &str, dir: &Path) -> Result<PathBuf, GoldenError> {
    let sql = fixture_sql(db_id).ok_or_else(|| GoldenError::NoFixture(db_id.to_string()))?;
    let path = crate::evaluator::database_path(dir, db_id);
    std::fs::create_dir_all(path.parent().expect("database path has a parent"))?;
    if path.exists() {
        std::fs::remove_file(&path)?;
    }
    Connection::open(&path)?.execute_batch(sql)?;
    Ok(path)
}

/// Write every fixture database under `dir`.
pub fn write_databases(dir: &Path) -> Result<(), GoldenError> {
    for db in fixture_ids() {
        write_database(db, dir)?;
    }
    Ok(())
}
