use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use rusqlite::types::ValueRef;
use rusqlite::Connection;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::natsql::{NatSqlQuery, Operand};
use crate::schema::{ColumnType, DatabaseSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueSource {
    NumberToken,
    QuotedSpan,
    CellMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Number(f64),
    String(String),
}

impl Literal {
    pub fn operand(&self) -> Operand {
        match self {
            Literal::Number(n) => Operand::Number(*n),
            Literal::String(s) => Operand::String(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCandidate {
    pub surface: String,
    pub value: Literal,
    /// Byte span in the question.
    pub start: usize,
    pub end: usize,
    pub source: ValueSource,
}

/// Distinct cell values per column, keyed `table.column`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellIndex {
    pub columns: BTreeMap<String, Vec<String>>,
}

impl CellIndex {
    /// Distinct text values of every text column, at most `per_column` each.
    pub fn from_sqlite(conn: &Connection, schema: &DatabaseSchema, per_column: usize) -> rusqlite::Result<Self> {
        let mut columns = BTreeMap::new();
        for table in schema.tables() {
            for col in table.columns.iter().skip(1).filter(|c| c.ty == ColumnType::Text) {
                let sql = format!(
                    "SELECT DISTINCT \"{}\" FROM \"{}\" LIMIT {per_column}",
                    col.name.replace('"', "\"\""),
                    table.name.replace('"', "\"\"")
                );
                let mut stmt = conn.prepare(&sql)?;
                let mut rows = stmt.query([])?;
                let mut values = Vec::new();
                while let Some(row) = rows.next()? {
                    if let ValueRef::Text(t) = row.get_ref(0)? {
                        values.push(String::from_utf8_lossy(t).into_owned());
                    }
                }
                columns.insert(format!("{}.{}", table.name, col.name), values);
            }
        }
        Ok(Self { columns })
    }

    /// Open `path` read-only and index it.
    pub fn from_database(path: &Path, schema: &DatabaseSchema, per_column: usize) -> rusqlite::Result<Self> {
        let conn = Connection::open_with_flags(path, rusqlite::OpenFlags::SQLITE_OPEN_READ_ONLY)?;
        Self::from_sqlite(&conn, schema, per_column)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    fn values(&self) -> impl Iterator<Item = &str> {
        self.columns.values().flatten().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Read "zero" to "twenty" as numbers.
    pub word_numbers: bool,
}

const WORD_NUMBERS: [&str; 21] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
];

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"-?\b(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?\b").expect("number pattern"))
}

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b[a-z]+\b").expect("word pattern"))
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn word_boundary(text: &str, start: usize, end: usize) -> bool {
    let bytes = text.as_bytes();
    (start == 0 || !is_word_byte(bytes[start - 1])) && (end == bytes.len() || !is_word_byte(bytes[end]))
}

/// Spans quoted with '...' or "..." (straight or curly), where the opening
/// quote does not follow a letter, so apostrophes are left alone.
fn quoted_spans(q: &str) -> Vec<ValueCandidate> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = q.char_indices().collect();
    let closing = |c: char| match c {
        '\'' => Some('\''),
        '"' => Some('"'),
        '\u{2018}' => Some('\u{2019}'),
        '\u{201c}' => Some('\u{201d}'),
        _ => None,
    };
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        let after_word = i > 0 && chars[i - 1].1.is_alphanumeric();
        if let (Some(close), false) = (closing(c), after_word) {
            let found = (i + 1..chars.len())
                .find(|&j| chars[j].1 == close && chars.get(j + 1).is_none_or(|(_, n)| !n.is_alphanumeric()));
            if let Some(j) = found.filter(|&j| j > i + 1) {
                let end = chars[j].0 + close.len_utf8();
                let inner = &q[start + c.len_utf8()..chars[j].0];
                out.push(ValueCandidate {
                    surface: q[start..end].to_string(),
                    value: Literal::String(inner.to_string()),
                    start,
                    end,
                    source: ValueSource::QuotedSpan,
                });
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

fn cell_matches(q: &str, cells: &CellIndex) -> Vec<ValueCandidate> {
    let lower = q.to_lowercase();
    if lower.len() != q.len() {
        // Byte offsets would not line up with the original text.
        return Vec::new();
    }
    let mut out = Vec::new();
    for value in cells.values() {
        let needle = value.trim().to_lowercase();
        if needle.chars().count() < 2 || needle.parse::<f64>().is_ok() {
            continue;
        }
        for (start, _) in lower.match_indices(&needle) {
            let end = start + needle.len();
            if word_boundary(q, start, end) {
                out.push(ValueCandidate {
                    surface: q[start..end].to_string(),
                    value: Literal::String(value.trim().to_string()),
                    start,
                    end,
                    source: ValueSource::CellMatch,
                });
            }
        }
    }
    // Longest first so the greedy pass below keeps the longest match.
    out.sort_by_key(|c| (std::cmp::Reverse(c.end - c.start), c.start));
    out
}

fn numbers(q: &str, options: ExtractOptions) -> Vec<ValueCandidate> {
    let mut out: Vec<ValueCandidate> = number_re()
        .find_iter(q)
        .filter_map(|m| {
            let n: f64 = m.as_str().replace(',', "").parse().ok()?;
            Some(ValueCandidate {
                surface: m.as_str().to_string(),
                value: Literal::Number(n),
                start: m.start(),
                end: m.end(),
                source: ValueSource::NumberToken,
            })
        })
        .collect();
    if options.word_numbers {
        for m in word_re().find_iter(q) {
            let word = m.as_str().to_ascii_lowercase();
            if let Some(n) = WORD_NUMBERS.iter().position(|w| *w == word) {
                out.push(ValueCandidate {
                    surface: m.as_str().to_string(),
                    value: Literal::Number(n as f64),
                    start: m.start(),
                    end: m.end(),
                    source: ValueSource::NumberToken,
                });
            }
        }
    }
    out
}

/// Values mentioned in a question, in order of appearance. Quoted spans
/// take precedence, then cell-value matches (longest first), then numbers.
pub fn extract_values(question: &str, cells: Option<&CellIndex>, options: ExtractOptions) -> Vec<ValueCandidate> {
    let mut kept: Vec<ValueCandidate> = Vec::new();
    let offer = |c: ValueCandidate, kept: &mut Vec<ValueCandidate>| {
        if kept.iter().all(|k| c.end <= k.start || k.end <= c.start) {
            kept.push(c);
        }
    };
    for c in quoted_spans(question) {
        offer(c, &mut kept);
    }
    if let Some(cells) = cells {
        for c in cell_matches(question, cells) {
            offer(c, &mut kept);
        }
    }
    for c in numbers(question, options) {
        offer(c, &mut kept);
    }
    kept.sort_by_key(|c| c.start);
    kept
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FillError {
    #[error("insufficient values: slots {} unfilled", join(.unfilled))]
    InsufficientValues { unfilled: Vec<usize> },
}

fn join(v: &[usize]) -> String {
    v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
}

fn slots_mut(query: &mut NatSqlQuery) -> impl Iterator<Item = &mut Operand> {
    query
        .conditions
        .iter_mut()
        .flat_map(|c| std::iter::once(&mut c.right).chain(c.right2.as_mut()))
        .filter(|o| matches!(o, Operand::ValueSlot))
}

/// Fill value slots in condition order with candidates in question order.
pub fn fill_values(query: &NatSqlQuery, candidates: &[ValueCandidate]) -> Result<NatSqlQuery, FillError> {
    let slots = query.value_slots();
    if slots > candidates.len() {
        return Err(FillError::InsufficientValues {
            unfilled: (candidates.len() + 1..=slots).collect(),
        });
    }
    let mut out = query.clone();
    for (slot, cand) in slots_mut(&mut out).zip(candidates) {
        *slot = cand.value.operand();
    }
    Ok(out)
}
