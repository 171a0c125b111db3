//! Execution match against SQLite database files.

use std::cmp::Ordering;
use std::path::Path;

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};

/// Numeric cells closer than this compare equal.
pub const FLOAT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Number(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl Cell {
    fn from_ref(v: ValueRef<'_>) -> Self {
        match v {
            ValueRef::Null => Cell::Null,
            ValueRef::Integer(i) => Cell::Number(i as f64),
            ValueRef::Real(r) => Cell::Number(r),
            ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => Cell::Blob(b.to_vec()),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Cell::Null => 0,
            Cell::Number(_) => 1,
            Cell::Text(_) => 2,
            Cell::Blob(_) => 3,
        }
    }

    fn total_cmp(&self, other: &Cell) -> Ordering {
        match (self, other) {
            (Cell::Number(a), Cell::Number(b)) => a.total_cmp(b),
            (Cell::Text(a), Cell::Text(b)) => a.cmp(b),
            (Cell::Blob(a), Cell::Blob(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }

    fn close(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Number(a), Cell::Number(b)) => {
                a == b || (a - b).abs() <= FLOAT_TOLERANCE * a.abs().max(b.abs()).max(1.0)
            }
            _ => self == other,
        }
    }
}

pub type Row = Vec<Cell>;

fn cmp_rows(a: &Row, b: &Row) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn rows_close(a: &[Row], b: &[Row]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.close(q)))
}

/// Compare two result sets: as lists when `ordered`, else as multisets.
pub fn results_equal(pred: &[Row], gold: &[Row], ordered: bool) -> bool {
    if ordered {
        return rows_close(pred, gold);
    }
    let mut p = pred.to_vec();
    let mut g = gold.to_vec();
    p.sort_by(cmp_rows);
    g.sort_by(cmp_rows);
    rows_close(&p, &g)
}

pub fn open_read_only(path: &Path) -> rusqlite::Result<Connection> {
    Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX)
}

pub fn run_query(conn: &Connection, sql: &str) -> rusqlite::Result<Vec<Row>> {
    let mut stmt = conn.prepare(sql)?;
    let width = stmt.column_count();
    let mut rows = stmt.query([])?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        let mut cells = Vec::with_capacity(width);
        for i in 0..width {
            cells.push(Cell::from_ref(row.get_ref(i)?));
        }
        out.push(cells);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "reason", rename_all = "snake_case")]
pub enum ExecOutcome {
    Match,
    Mismatch,
    /// The prediction did not run; counts as a miss.
    PredFailed(String),
    /// The gold query did not run; the example is invalid.
    GoldFailed(String),
}

impl ExecOutcome {
    pub fn is_match(&self) -> bool {
        matches!(self, ExecOutcome::Match)
    }

    pub fn reason(&self) -> Option<String> {
        match self {
            ExecOutcome::Match => None,
            ExecOutcome::Mismatch => Some("results differ".into()),
            ExecOutcome::PredFailed(e) => Some(format!("execution failed: {e}")),
            ExecOutcome::GoldFailed(e) => Some(format!("gold execution failed: {e}")),
        }
    }
}

/// Run both queries on the database at `database` and compare results.
pub fn execution_match_on(conn: &Connection, pred_sql: &str, gold_sql: &str, row_order_sensitive: bool) -> ExecOutcome {
    let gold = match run_query(conn, gold_sql) {
        Ok(rows) => rows,
        Err(e) => return ExecOutcome::GoldFailed(e.to_string()),
    };
    let pred = match run_query(conn, pred_sql) {
        Ok(rows) => rows,
        Err(e) => return ExecOutcome::PredFailed(e.to_string()),
    };
    if results_equal(&pred, &gold, row_order_sensitive) {
        ExecOutcome::Match
    } else {
        ExecOutcome::Mismatch
    }
}

pub fn execution_match(pred_sql: &str, gold_sql: &str, database: &Path, row_order_sensitive: bool) -> ExecOutcome {
    match open_read_only(database) {
        Ok(conn) => execution_match_on(&conn, pred_sql, gold_sql, row_order_sensitive),
        Err(e) => ExecOutcome::GoldFailed(format!("cannot open {}: {e}", database.display())),
    }
}
