//! Spider-format benchmark records.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use crate::schema::{DatabaseSchema, SchemaError};
use crate::sql::{load_spider_sql, parse_sql, SqlError, SqlQuery};

/// One benchmark record. Unknown fields (`query_toks` and friends) are kept
/// so a dataset can be rewritten without losing them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub question: String,
    pub db_id: String,
    /// Gold SQL text.
    pub query: String,
    /// Gold SQL in Spider's parsed JSON form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sql: Option<Json>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub natsql: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Json>,
}

impl Example {
    pub fn new(question: &str, db_id: &str, query: &str) -> Self {
        Self {
            question: question.into(),
            db_id: db_id.into(),
            query: query.into(),
            sql: None,
            natsql: None,
            extra: Map::new(),
        }
    }

    /// Gold query: the parsed form when present and loadable, else the text.
    pub fn gold_sql(&self, schema: &DatabaseSchema) -> Result<SqlQuery, SqlError> {
        if let Some(json) = &self.sql {
            if let Ok(q) = load_spider_sql(json, schema) {
                return Ok(q);
            }
        }
        parse_sql(&self.query, schema)
    }
}

pub fn load_examples(document: &str) -> Result<Vec<Example>, serde_json::Error> {
    serde_json::from_str(document)
}

/// Every schema in a `tables.json` document, keyed by db id.
pub fn load_schemas(document: &str) -> Result<HashMap<String, DatabaseSchema>, SchemaError> {
    Ok(DatabaseSchema::load_all(document)?
        .into_iter()
        .map(|s| (s.db_id.clone(), s))
        .collect())
}
