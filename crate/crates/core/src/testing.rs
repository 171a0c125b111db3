//! Fixture schemas shared by unit tests.

use crate::schema::DatabaseSchema;

pub use crate::golden::TABLES_JSON;

pub fn schema(db_id: &str) -> DatabaseSchema {
    DatabaseSchema::load(TABLES_JSON, db_id).expect("fixture schema")
}
