//! Database schemas in the Spider `tables.json` shape, plus the foreign-key
//! graph used for join reconstruction.
//!
//! Every table carries a synthetic `*` column at local index 0; real columns
//! follow in their original order. A [`ColumnRef`] addresses a column by
//! `(table, local index)`.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Local index of the synthetic star column in every table.
pub const STAR: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: usize,
    pub column: usize,
}

impl ColumnRef {
    pub fn new(table: usize, column: usize) -> Self {
        Self { table, column }
    }

    pub fn star(table: usize) -> Self {
        Self { table, column: STAR }
    }

    pub fn is_star(&self) -> bool {
        self.column == STAR
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Text,
    Number,
    Time,
    Boolean,
    Others,
}

impl ColumnType {
    fn parse(s: &str) -> Self {
        match s.to_ascii_lowercase().as_str() {
            "text" => ColumnType::Text,
            "number" => ColumnType::Number,
            "time" => ColumnType::Time,
            "boolean" => ColumnType::Boolean,
            _ => ColumnType::Others,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ColumnType::Text => "text",
            ColumnType::Number => "number",
            ColumnType::Time => "time",
            ColumnType::Boolean => "boolean",
            ColumnType::Others => "others",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub display_name: String,
    /// Index 0 is the synthetic `*`.
    pub columns: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub display_name: String,
    pub ty: ColumnType,
}

/// A foreign key edge, `child` referencing `parent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ForeignKey {
    pub child: ColumnRef,
    pub parent: ColumnRef,
}

impl ForeignKey {
    /// If this edge connects `a` and `b` (in either direction), the pair of
    /// columns ordered as `(column on a, column on b)`.
    pub fn between(&self, a: usize, b: usize) -> Option<(ColumnRef, ColumnRef)> {
        if self.child.table == a && self.parent.table == b {
            Some((self.child, self.parent))
        } else if self.parent.table == a && self.child.table == b {
            Some((self.parent, self.child))
        } else {
            None
        }
    }
}

/// One hop of a join chain: bring `table` in with `existing = incoming`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JoinStep {
    pub table: usize,
    pub existing: ColumnRef,
    pub incoming: ColumnRef,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SchemaError {
    #[error("database `{0}` not found in schema document")]
    MissingDatabase(String),
    #[error("malformed schema document: {0}")]
    Malformed(String),
    #[error("dangling foreign key {child} -> {parent}: column index out of range")]
    DanglingForeignKey { child: i64, parent: i64 },
    #[error("foreign key endpoint {0} is a star column")]
    StarForeignKey(i64),
    #[error("dangling primary key: column index {0} out of range")]
    DanglingPrimaryKey(i64),
    #[error("column {column} refers to table index {table} which does not exist")]
    DanglingColumnTable { column: String, table: i64 },
    #[error("duplicate table name `{0}`")]
    DuplicateTable(String),
    #[error("duplicate column name `{column}` in table `{table}`")]
    DuplicateColumn { table: String, column: String },
    #[error("unjoinable tables: no foreign-key path from {from:?} to `{to}`")]
    Unjoinable { from: Vec<String>, to: String },
}

/// An immutable, validated database schema.
#[derive(Debug, Clone)]
pub struct DatabaseSchema {
    pub db_id: String,
    tables: Vec<Table>,
    primary_keys: Vec<ColumnRef>,
    foreign_keys: Vec<ForeignKey>,
    table_index: HashMap<String, usize>,
    column_index: Vec<HashMap<String, usize>>,
    /// Spider global column id -> ColumnRef; id 0 is the global star and
    /// maps to `None`.
    global_columns: Vec<Option<ColumnRef>>,
    /// Table adjacency in the undirected FK graph, sorted ascending.
    adjacency: Vec<Vec<usize>>,
}

impl PartialEq for DatabaseSchema {
    fn eq(&self, other: &Self) -> bool {
        self.db_id == other.db_id
            && self.tables == other.tables
            && self.primary_keys == other.primary_keys
            && self.foreign_keys == other.foreign_keys
    }
}

/// Raw Spider `tables.json` entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSchema {
    db_id: String,
    #[serde(default)]
    table_names: Option<Vec<String>>,
    table_names_original: Vec<String>,
    #[serde(default)]
    column_names: Option<Vec<(i64, String)>>,
    column_names_original: Vec<(i64, String)>,
    column_types: Vec<String>,
    #[serde(default)]
    primary_keys: Vec<Value>,
    #[serde(default)]
    foreign_keys: Vec<(i64, i64)>,
}

impl DatabaseSchema {
    /// Load the entry named `db_id` from a Spider-format document, which may
    /// be either an array of entries or a single entry.
    pub fn load(document: &str, db_id: &str) -> Result<Self, SchemaError> {
        let value: Value = serde_json::from_str(document).map_err(|e| SchemaError::Malformed(e.to_string()))?;
        let entry = match value {
            Value::Array(items) => items
                .into_iter()
                .find(|v| v.get("db_id").and_then(Value::as_str) == Some(db_id))
                .ok_or_else(|| SchemaError::MissingDatabase(db_id.to_string()))?,
            v @ Value::Object(_) => {
                if v.get("db_id").and_then(Value::as_str) != Some(db_id) {
                    return Err(SchemaError::MissingDatabase(db_id.to_string()));
                }
                v
            }
            _ => return Err(SchemaError::Malformed("expected array or object".into())),
        };
        Self::from_json(entry)
    }

    /// Load every database in a Spider-format document.
    pub fn load_all(document: &str) -> Result<Vec<Self>, SchemaError> {
        let value: Value = serde_json::from_str(document).map_err(|e| SchemaError::Malformed(e.to_string()))?;
        match value {
            Value::Array(items) => items.into_iter().map(Self::from_json).collect(),
            v @ Value::Object(_) => Ok(vec![Self::from_json(v)?]),
            _ => Err(SchemaError::Malformed("expected array or object".into())),
        }
    }

    pub fn from_json(entry: Value) -> Result<Self, SchemaError> {
        let raw: RawSchema = serde_json::from_value(entry).map_err(|e| SchemaError::Malformed(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawSchema) -> Result<Self, SchemaError> {
        let n_cols = raw.column_names_original.len();
        if raw.column_types.len() != n_cols {
            return Err(SchemaError::Malformed(format!(
                "{} column names but {} column types",
                n_cols,
                raw.column_types.len()
            )));
        }
        let display_tables = raw.table_names.unwrap_or_else(|| raw.table_names_original.clone());
        if display_tables.len() != raw.table_names_original.len() {
            return Err(SchemaError::Malformed("table_names length mismatch".into()));
        }
        let display_cols = raw.column_names.unwrap_or_else(|| raw.column_names_original.clone());
        if display_cols.len() != n_cols {
            return Err(SchemaError::Malformed("column_names length mismatch".into()));
        }

        let mut tables: Vec<Table> = raw
            .table_names_original
            .iter()
            .zip(&display_tables)
            .map(|(name, display)| Table {
                name: name.clone(),
                display_name: display.clone(),
                columns: vec![Column {
                    name: "*".into(),
                    display_name: "*".into(),
                    ty: ColumnType::Text,
                }],
            })
            .collect();

        let mut table_index = HashMap::new();
        for (i, t) in tables.iter().enumerate() {
            if table_index.insert(t.name.to_lowercase(), i).is_some() {
                return Err(SchemaError::DuplicateTable(t.name.clone()));
            }
        }

        let mut global_columns = Vec::with_capacity(n_cols);
        let mut column_index = vec![HashMap::new(); tables.len()];
        for (gid, ((tid, name), (_, display))) in raw.column_names_original.iter().zip(&display_cols).enumerate() {
            if *tid < 0 {
                global_columns.push(None);
                continue;
            }
            let t = *tid as usize;
            if t >= tables.len() {
                return Err(SchemaError::DanglingColumnTable {
                    column: name.clone(),
                    table: *tid,
                });
            }
            let local = tables[t].columns.len();
            if column_index[t].insert(name.to_lowercase(), local).is_some() || name == "*" {
                return Err(SchemaError::DuplicateColumn {
                    table: tables[t].name.clone(),
                    column: name.clone(),
                });
            }
            tables[t].columns.push(Column {
                name: name.clone(),
                display_name: display.clone(),
                ty: ColumnType::parse(&raw.column_types[gid]),
            });
            global_columns.push(Some(ColumnRef::new(t, local)));
        }

        let resolve = |id: i64| -> Option<Option<ColumnRef>> {
            if id < 0 || id as usize >= global_columns.len() {
                None
            } else {
                Some(global_columns[id as usize])
            }
        };

        let mut primary_keys = Vec::new();
        for pk in &raw.primary_keys {
            // Newer Spider releases list composite keys as arrays.
            let ids: Vec<i64> = match pk {
                Value::Number(n) => vec![n.as_i64().unwrap_or(-1)],
                Value::Array(items) => items.iter().map(|v| v.as_i64().unwrap_or(-1)).collect(),
                _ => vec![-1],
            };
            for id in ids {
                match resolve(id) {
                    Some(Some(c)) => primary_keys.push(c),
                    _ => return Err(SchemaError::DanglingPrimaryKey(id)),
                }
            }
        }

        let mut foreign_keys = Vec::new();
        for &(child, parent) in &raw.foreign_keys {
            let (c, p) = match (resolve(child), resolve(parent)) {
                (Some(c), Some(p)) => (c, p),
                _ => return Err(SchemaError::DanglingForeignKey { child, parent }),
            };
            let c = c.ok_or(SchemaError::StarForeignKey(child))?;
            let p = p.ok_or(SchemaError::StarForeignKey(parent))?;
            foreign_keys.push(ForeignKey { child: c, parent: p });
        }

        let mut adjacency = vec![Vec::new(); tables.len()];
        for fk in &foreign_keys {
            let (a, b) = (fk.child.table, fk.parent.table);
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }

        Ok(Self {
            db_id: raw.db_id,
            tables,
            primary_keys,
            foreign_keys,
            table_index,
            column_index,
            global_columns,
            adjacency,
        })
    }

    /// Serialize back to a Spider `tables.json` entry.
    pub fn to_json(&self) -> Value {
        let mut column_names_original = vec![(-1i64, "*".to_string())];
        let mut column_names = vec![(-1i64, "*".to_string())];
        let mut column_types = vec!["text".to_string()];
        let mut global_of = HashMap::new();
        for (t, table) in self.tables.iter().enumerate() {
            for (c, col) in table.columns.iter().enumerate().skip(1) {
                global_of.insert(ColumnRef::new(t, c), column_names_original.len());
                column_names_original.push((t as i64, col.name.clone()));
                column_names.push((t as i64, col.display_name.clone()));
                column_types.push(col.ty.as_str().to_string());
            }
        }
        let raw = RawSchema {
            db_id: self.db_id.clone(),
            table_names: Some(self.tables.iter().map(|t| t.display_name.clone()).collect()),
            table_names_original: self.tables.iter().map(|t| t.name.clone()).collect(),
            column_names: Some(column_names),
            column_names_original,
            column_types,
            primary_keys: self
                .primary_keys
                .iter()
                .map(|c| Value::from(global_of[c] as i64))
                .collect(),
            foreign_keys: self
                .foreign_keys
                .iter()
                .map(|fk| (global_of[&fk.child] as i64, global_of[&fk.parent] as i64))
                .collect(),
        };
        serde_json::to_value(raw).expect("schema serializes")
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn table(&self, index: usize) -> &Table {
        &self.tables[index]
    }

    pub fn column(&self, c: ColumnRef) -> &Column {
        &self.tables[c.table].columns[c.column]
    }

    pub fn primary_keys(&self) -> &[ColumnRef] {
        &self.primary_keys
    }

    pub fn foreign_keys(&self) -> &[ForeignKey] {
        &self.foreign_keys
    }

    /// First primary-key column of `table`, if any.
    pub fn primary_key_of(&self, table: usize) -> Option<ColumnRef> {
        self.primary_keys.iter().copied().find(|c| c.table == table)
    }

    pub fn is_primary_key(&self, c: ColumnRef) -> bool {
        self.primary_keys.contains(&c)
    }

    pub fn find_table(&self, name: &str) -> Option<usize> {
        self.table_index.get(&name.to_lowercase()).copied()
    }

    /// Case-insensitive column lookup; `*` resolves to the star column.
    pub fn find_column(&self, table: usize, name: &str) -> Option<ColumnRef> {
        if name == "*" {
            return Some(ColumnRef::star(table));
        }
        self.column_index
            .get(table)?
            .get(&name.to_lowercase())
            .map(|&c| ColumnRef::new(table, c))
    }

    /// Spider global column id -> column. `Ok(None)` is the global `*`.
    pub fn global_column(&self, id: usize) -> Option<Option<ColumnRef>> {
        self.global_columns.get(id).copied()
    }

    /// Inverse of [`Self::global_column`]; every table's star maps to 0.
    pub fn global_id(&self, c: ColumnRef) -> usize {
        if c.is_star() {
            return 0;
        }
        self.global_columns
            .iter()
            .position(|g| *g == Some(c))
            .expect("column belongs to this schema")
    }

    pub fn neighbours(&self, table: usize) -> &[usize] {
        &self.adjacency[table]
    }

    /// The first declared foreign key joining tables `a` and `b`, as
    /// `(column on a, column on b)`.
    pub fn fk_between(&self, a: usize, b: usize) -> Option<(ColumnRef, ColumnRef)> {
        self.foreign_keys.iter().find_map(|fk| fk.between(a, b))
    }

    /// `table.column` with original casing.
    pub fn qualified(&self, c: ColumnRef) -> String {
        format!("{}.{}", self.tables[c.table].name, self.column(c).name)
    }

    /// Shortest join chain (by edge count, undirected FK graph) from any table
    /// in `from` to `to`. Ties resolve toward lower table indices.
    pub fn join_path(&self, from: &[usize], to: usize) -> Result<Vec<JoinStep>, SchemaError> {
        if from.contains(&to) {
            return Ok(Vec::new());
        }
        let n = self.tables.len();
        let mut parent: Vec<Option<usize>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        let mut sources: Vec<usize> = from.iter().copied().filter(|&t| t < n).collect();
        sources.sort_unstable();
        sources.dedup();
        for &s in &sources {
            seen[s] = true;
            queue.push_back(s);
        }
        while let Some(t) = queue.pop_front() {
            if t == to {
                break;
            }
            for &nb in &self.adjacency[t] {
                if !seen[nb] {
                    seen[nb] = true;
                    parent[nb] = Some(t);
                    queue.push_back(nb);
                }
            }
        }
        if !seen.get(to).copied().unwrap_or(false) {
            return Err(SchemaError::Unjoinable {
                from: from
                    .iter()
                    .filter_map(|&t| self.tables.get(t).map(|t| t.name.clone()))
                    .collect(),
                to: self
                    .tables
                    .get(to)
                    .map(|t| t.name.clone())
                    .unwrap_or_else(|| format!("#{to}")),
            });
        }
        let mut chain = vec![to];
        let mut cur = to;
        while let Some(p) = parent[cur] {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        Ok(chain
            .windows(2)
            .map(|w| {
                let (existing, incoming) = self
                    .fk_between(w[0], w[1])
                    .expect("adjacent tables share a foreign key");
                JoinStep {
                    table: w[1],
                    existing,
                    incoming,
                }
            })
            .collect())
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}.c{}", self.table, self.column)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn pets() -> DatabaseSchema {
        let doc = r#"[{
            "db_id": "pets_1",
            "table_names_original": ["Student", "Has_Pet", "Pets"],
            "column_names_original": [[-1,"*"],[0,"StuID"],[0,"Fname"],[1,"StuID"],[1,"PetID"],[2,"PetID"],[2,"PetType"]],
            "column_types": ["text","number","text","number","number","number","text"],
            "primary_keys": [1, 5],
            "foreign_keys": [[3, 1], [4, 5]]
        }]"#;
        DatabaseSchema::load(doc, "pets_1").unwrap()
    }

    fn chain(n: usize) -> DatabaseSchema {
        let tables: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let mut cols = vec![(-1i64, "*".to_string())];
        for i in 0..n {
            cols.push((i as i64, "id".into()));
            cols.push((i as i64, "prev_id".into()));
        }
        let fks: Vec<(i64, i64)> = (1..n).map(|i| ((2 * i + 2) as i64, (2 * i - 1) as i64)).collect();
        let doc = serde_json::json!({
            "db_id": "chain",
            "table_names_original": tables,
            "column_names_original": cols,
            "column_types": vec!["number"; cols.len()],
            "primary_keys": (0..n).map(|i| 2 * i + 1).collect::<Vec<_>>(),
            "foreign_keys": fks,
        });
        DatabaseSchema::from_json(doc).unwrap()
    }

    #[test]
    fn loads_pets_with_star_columns() {
        let s = pets();
        assert_eq!(s.tables().len(), 3);
        assert_eq!(s.find_table("has_pet"), Some(1));
        assert_eq!(s.table(0).columns[0].name, "*");
        let fk = s.foreign_keys()[0];
        assert_eq!(s.qualified(fk.child), "Has_Pet.StuID");
        assert_eq!(s.qualified(fk.parent), "Student.StuID");
        assert_eq!(s.find_column(0, "fname"), Some(ColumnRef::new(0, 2)));
        assert_eq!(s.global_column(0), Some(None));
    }

    #[test]
    fn zero_foreign_keys_is_edgeless() {
        let doc = r#"{"db_id":"x","table_names_original":["a","b"],
            "column_names_original":[[-1,"*"],[0,"id"],[1,"id"]],
            "column_types":["text","number","number"],"primary_keys":[],"foreign_keys":[]}"#;
        let s = DatabaseSchema::load(doc, "x").unwrap();
        assert!(s.neighbours(0).is_empty() && s.neighbours(1).is_empty());
        assert!(matches!(s.join_path(&[0], 1), Err(SchemaError::Unjoinable { .. })));
    }

    #[test]
    fn dangling_fk_is_rejected() {
        let doc = r#"{"db_id":"x","table_names_original":["a"],
            "column_names_original":[[-1,"*"],[0,"id"]],
            "column_types":["text","number"],"primary_keys":[1],"foreign_keys":[[1, 9]]}"#;
        let err = DatabaseSchema::load(doc, "x").unwrap_err();
        assert_eq!(err, SchemaError::DanglingForeignKey { child: 1, parent: 9 });
        assert!(err.to_string().contains("dangling foreign key"));
    }

    #[test]
    fn missing_db_and_duplicates() {
        let doc = r#"[{"db_id":"x","table_names_original":["a","A"],
            "column_names_original":[[-1,"*"]],"column_types":["text"]}]"#;
        assert_eq!(
            DatabaseSchema::load(doc, "nope").unwrap_err(),
            SchemaError::MissingDatabase("nope".into())
        );
        assert_eq!(
            DatabaseSchema::load(doc, "x").unwrap_err(),
            SchemaError::DuplicateTable("A".into())
        );
        let doc = r#"{"db_id":"x","table_names_original":["a"],
            "column_names_original":[[-1,"*"],[0,"id"],[0,"ID"]],"column_types":["text","number","number"]}"#;
        assert!(matches!(
            DatabaseSchema::load(doc, "x").unwrap_err(),
            SchemaError::DuplicateColumn { .. }
        ));
    }

    #[test]
    fn join_path_identity_and_single_hop() {
        let s = pets();
        assert!(s.join_path(&[0], 0).unwrap().is_empty());
        let steps = s.join_path(&[0], 1).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(s.qualified(steps[0].existing), "Student.StuID");
        assert_eq!(s.qualified(steps[0].incoming), "Has_Pet.StuID");
    }

    #[test]
    fn join_path_follows_chain_in_order() {
        let s = chain(4);
        let steps = s.join_path(&[0], 3).unwrap();
        let tables: Vec<usize> = steps.iter().map(|s| s.table).collect();
        assert_eq!(tables, vec![1, 2, 3]);
        for w in steps.windows(2) {
            assert_eq!(w[0].table, w[1].existing.table);
        }
    }

    #[test]
    fn json_round_trip() {
        let s = pets();
        let again = DatabaseSchema::from_json(s.to_json()).unwrap();
        assert_eq!(s, again);
    }
}
