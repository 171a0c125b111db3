use thiserror::Error;

use super::ast::*;
use super::validate::validate;
use crate::lex::{tokenize, Tok, Token};
use crate::schema::{ColumnRef, DatabaseSchema};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NatSqlError {
    #[error("lexical error at {pos} near {snippet:?}: {message}")]
    Lex {
        pos: usize,
        snippet: String,
        message: String,
    },
    #[error("unknown table `{name}`{}", suggest(.suggestion))]
    UnknownTable { name: String, suggestion: Option<String> },
    #[error("unknown column `{table}.{name}`{}", suggest(.suggestion))]
    UnknownColumn {
        table: String,
        name: String,
        suggestion: Option<String>,
    },
    #[error("syntax error at {pos}: found {found}, expected one of {}", .expected.join(", "))]
    Grammar {
        pos: usize,
        found: String,
        expected: Vec<&'static str>,
    },
    #[error("GROUP BY at {pos} is only allowed in the natsql-g dialect")]
    Dialect { pos: usize },
    #[error("invalid query: {0}")]
    Invalid(String),
}

fn suggest(s: &Option<String>) -> String {
    s.as_ref()
        .map(|s| format!(" (did you mean `{s}`?)"))
        .unwrap_or_default()
}

fn nearest<'a>(name: &str, candidates: impl Iterator<Item = &'a str>) -> Option<String> {
    let lower = name.to_lowercase();
    candidates
        .map(|c| (strsim::levenshtein(&lower, &c.to_lowercase()), c))
        .filter(|(d, c)| *d <= (c.len().max(3) / 2))
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c.to_lowercase())
}

const CONJUNCTS: [(&str, Conjunct); 6] = [
    ("and", Conjunct::And),
    ("or", Conjunct::Or),
    ("except", Conjunct::Except),
    ("intersect", Conjunct::Intersect),
    ("union", Conjunct::Union),
    ("sub", Conjunct::Sub),
];

pub(crate) struct Parser<'s> {
    toks: Vec<Token>,
    idx: usize,
    end: usize,
    schema: &'s DatabaseSchema,
}

impl<'s> Parser<'s> {
    fn new(text: &str, schema: &'s DatabaseSchema) -> Result<Self, NatSqlError> {
        let toks = tokenize(text).map_err(|e| NatSqlError::Lex {
            pos: e.pos,
            snippet: e.snippet,
            message: e.message,
        })?;
        Ok(Self {
            toks,
            idx: 0,
            end: text.len(),
            schema,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.idx + offset).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.idx).map(|t| t.pos).unwrap_or(self.end)
    }

    fn error(&self, expected: &[&'static str]) -> NatSqlError {
        NatSqlError::Grammar {
            pos: self.pos(),
            found: self
                .peek()
                .map(|t| t.to_string())
                .unwrap_or_else(|| "end of input".into()),
            expected: expected.to_vec(),
        }
    }

    fn is_kw_at(&self, offset: usize, kw: &str) -> bool {
        matches!(self.peek_at(offset), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.is_kw_at(0, kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &'static str) -> Result<(), NatSqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(&[kw]))
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &'static str) -> Result<(), NatSqlError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.error(&[sym]))
        }
    }

    fn parse_query(&mut self, dialect: Dialect) -> Result<NatSqlQuery, NatSqlError> {
        self.expect_kw("select")?;
        let mut select = vec![self.parse_column()?];
        while self.eat_sym(",") {
            select.push(self.parse_column()?);
        }
        let mut query = NatSqlQuery::new(select);
        if self.eat_kw("where") {
            query.conditions = self.parse_conditions()?;
        }
        if self.is_kw("group") {
            let pos = self.pos();
            if dialect != Dialect::NatsqlG {
                return Err(NatSqlError::Dialect { pos });
            }
            self.idx += 1;
            self.expect_kw("by")?;
            let mut cols = vec![self.parse_column()?];
            while self.eat_sym(",") {
                cols.push(self.parse_column()?);
            }
            query.group_by = Some(cols);
        }
        if self.eat_kw("order") {
            self.expect_kw("by")?;
            let mut keys = vec![self.parse_column()?];
            while self.eat_sym(",") {
                keys.push(self.parse_column()?);
            }
            let direction = if self.eat_kw("desc") {
                Direction::Desc
            } else if self.eat_kw("asc") {
                Direction::Asc
            } else {
                Direction::Unspecified
            };
            let limit = if self.eat_kw("limit") {
                Some(self.parse_limit()?)
            } else {
                None
            };
            query.order_by = Some(OrderBy { keys, direction, limit });
        }
        if self.peek().is_some() {
            let mut expected = vec!["end of input"];
            if query.order_by.is_none() {
                expected.insert(0, "ORDER BY");
                if query.conditions.is_empty() {
                    expected.insert(0, "WHERE");
                }
            }
            return Err(self.error(&expected));
        }
        Ok(query)
    }

    fn parse_limit(&mut self) -> Result<u64, NatSqlError> {
        match self.peek() {
            Some(Tok::Number(n)) if *n >= 0.0 && n.fract() == 0.0 && *n <= u64::MAX as f64 => {
                let n = *n as u64;
                self.idx += 1;
                Ok(n)
            }
            _ => Err(self.error(&["non-negative integer"])),
        }
    }

    fn peek_conjunct(&self) -> Option<Conjunct> {
        match self.peek() {
            Some(Tok::Word(w)) => CONJUNCTS
                .iter()
                .find(|(k, _)| w.eq_ignore_ascii_case(k))
                .map(|(_, c)| *c),
            _ => None,
        }
    }

    fn parse_conditions(&mut self) -> Result<Vec<Condition>, NatSqlError> {
        let mut out = Vec::new();
        let mut conjunct = self.peek_conjunct();
        if conjunct.is_some() {
            self.idx += 1;
        }
        loop {
            out.push(self.parse_condition(conjunct)?);
            match self.peek_conjunct() {
                Some(c) => {
                    self.idx += 1;
                    conjunct = Some(c);
                }
                None => break,
            }
        }
        Ok(out)
    }

    fn parse_condition(&mut self, conjunct: Option<Conjunct>) -> Result<Condition, NatSqlError> {
        let left = if self.eat_sym("@") {
            Operand::Placeholder
        } else {
            let col = self.parse_column()?;
            // `except cartoon.*` is shorthand for `except @ IS cartoon.*`.
            if conjunct.is_some() && col.is_table_star() && !self.at_operator() {
                return Ok(Condition::new(
                    conjunct,
                    Operand::Placeholder,
                    CondOp::Is,
                    Operand::Column(col),
                ));
            }
            Operand::Column(col)
        };
        let op = self.parse_operator()?;
        let right = self.parse_right()?;
        let mut cond = Condition::new(conjunct, left, op, right);
        if op.takes_second_bound() {
            self.expect_kw("and")?;
            cond.right2 = Some(self.parse_right()?);
        }
        Ok(cond)
    }

    fn at_operator(&self) -> bool {
        match self.peek() {
            Some(Tok::Sym(s)) => matches!(*s, "=" | "!=" | ">" | "<" | ">=" | "<="),
            Some(Tok::Word(w)) => ["between", "in", "like", "is", "exists", "not", "join"]
                .iter()
                .any(|k| w.eq_ignore_ascii_case(k)),
            _ => false,
        }
    }

    fn parse_operator(&mut self) -> Result<CondOp, NatSqlError> {
        const EXPECTED: [&str; 16] = [
            "BETWEEN",
            "=",
            ">",
            "<",
            ">=",
            "<=",
            "!=",
            "IN",
            "LIKE",
            "IS",
            "EXISTS",
            "NOT IN",
            "NOT LIKE",
            "NOT BETWEEN",
            "IS NOT",
            "JOIN",
        ];
        if let Some(Tok::Sym(s)) = self.peek() {
            let op = match *s {
                "=" => Some(CondOp::Eq),
                "!=" => Some(CondOp::Ne),
                ">" => Some(CondOp::Gt),
                "<" => Some(CondOp::Lt),
                ">=" => Some(CondOp::Ge),
                "<=" => Some(CondOp::Le),
                _ => None,
            };
            if let Some(op) = op {
                self.idx += 1;
                return Ok(op);
            }
        }
        let op = if self.eat_kw("between") {
            CondOp::Between
        } else if self.eat_kw("in") {
            CondOp::In
        } else if self.eat_kw("like") {
            CondOp::Like
        } else if self.eat_kw("exists") {
            CondOp::Exists
        } else if self.eat_kw("join") {
            CondOp::Join
        } else if self.eat_kw("is") {
            if self.eat_kw("not") {
                CondOp::IsNot
            } else {
                CondOp::Is
            }
        } else if self.is_kw("not") {
            self.idx += 1;
            if self.eat_kw("in") {
                CondOp::NotIn
            } else if self.eat_kw("like") {
                CondOp::NotLike
            } else if self.eat_kw("between") {
                CondOp::NotBetween
            } else {
                return Err(self.error(&["IN", "LIKE", "BETWEEN"]));
            }
        } else {
            return Err(self.error(&EXPECTED));
        };
        Ok(op)
    }

    fn parse_right(&mut self) -> Result<Operand, NatSqlError> {
        match self.peek() {
            Some(Tok::Number(n)) => {
                let n = *n;
                self.idx += 1;
                Ok(Operand::Number(n))
            }
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.idx += 1;
                Ok(Operand::String(s))
            }
            Some(Tok::Word(w))
                if w.eq_ignore_ascii_case("value") && !matches!(self.peek_at(1), Some(Tok::Sym("."))) =>
            {
                self.idx += 1;
                Ok(Operand::ValueSlot)
            }
            Some(Tok::Word(_) | Tok::QuotedIdent(_)) => Ok(Operand::Column(self.parse_column()?)),
            _ => Err(self.error(&["number", "string", "value", "column"])),
        }
    }

    fn parse_column(&mut self) -> Result<Column, NatSqlError> {
        let distinct = self.eat_kw("distinct");
        let agg = match self.peek() {
            Some(Tok::Word(w)) if matches!(self.peek_at(1), Some(Tok::Sym("("))) => AggFun::parse(w),
            _ => None,
        };
        if let Some(agg) = agg {
            self.idx += 2;
            let inner_distinct = self.eat_kw("distinct");
            let col = self.parse_table_col()?;
            self.expect_sym(")")?;
            return Ok(Column {
                agg: Some(agg),
                col,
                distinct: distinct || inner_distinct,
            });
        }
        let col = self.parse_table_col()?;
        Ok(Column {
            agg: None,
            col,
            distinct,
        })
    }

    fn parse_name(&mut self) -> Result<String, NatSqlError> {
        match self.peek() {
            Some(Tok::Word(w)) | Some(Tok::QuotedIdent(w)) => {
                let w = w.clone();
                self.idx += 1;
                Ok(w)
            }
            _ => Err(self.error(&["name"])),
        }
    }

    fn parse_table_col(&mut self) -> Result<ColumnRef, NatSqlError> {
        let table_name = self.parse_name()?;
        self.expect_sym(".")?;
        let schema = self.schema;
        let table = schema
            .find_table(&table_name)
            .ok_or_else(|| NatSqlError::UnknownTable {
                suggestion: nearest(&table_name, schema.tables().iter().map(|t| t.name.as_str())),
                name: table_name.clone(),
            })?;
        if self.eat_sym("*") {
            return Ok(ColumnRef::star(table));
        }
        let col_name = self.parse_name()?;
        schema
            .find_column(table, &col_name)
            .ok_or_else(|| NatSqlError::UnknownColumn {
                table: table_name.to_lowercase(),
                suggestion: nearest(
                    &col_name,
                    schema.table(table).columns.iter().skip(1).map(|c| c.name.as_str()),
                ),
                name: col_name,
            })
    }
}

/// Parse NatSQL text against `schema`.
pub fn parse_natsql(text: &str, schema: &DatabaseSchema, dialect: Dialect) -> Result<NatSqlQuery, NatSqlError> {
    let mut parser = Parser::new(text, schema)?;
    let query = parser.parse_query(dialect)?;
    if let Some(first) = validate(&query, schema, dialect).into_iter().next() {
        return Err(NatSqlError::Invalid(first.message));
    }
    Ok(query)
}
