//! Inputs shared by the benches: the bundled golden corpus, parsed once.

use std::collections::HashMap;

use natsql::golden::{self, GoldenExample};
use natsql::{CompileConfig, DatabaseSchema, NatSqlQuery};

pub struct Workload {
    pub schemas: HashMap<String, DatabaseSchema>,
    pub examples: Vec<GoldenExample>,
    /// Slot-filled NatSQL, aligned with `examples`.
    pub natsql: Vec<NatSqlQuery>,
}

impl Workload {
    pub fn golden() -> Self {
        let schemas = golden::schemas();
        let examples = golden::examples();
        let natsql = examples
            .iter()
            .map(|g| g.natsql_query(&schemas[&g.db_id], None).expect("golden NatSQL parses"))
            .collect();
        Self {
            schemas,
            examples,
            natsql,
        }
    }

    pub fn schema(&self, i: usize) -> &DatabaseSchema {
        &self.schemas[&self.examples[i].db_id]
    }

    pub fn config(&self, i: usize) -> CompileConfig {
        CompileConfig::with_dialect(self.examples[i].dialect)
    }
}
