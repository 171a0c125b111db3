//! Parser for the SQL subset used by Spider gold queries.

use super::ast::*;
use super::SqlError;
use crate::lex::{tokenize, Tok, Token};
use crate::natsql::AggFun;
use crate::schema::{ColumnRef, DatabaseSchema};

const CLAUSE_WORDS: [&str; 15] = [
    "select",
    "from",
    "where",
    "group",
    "having",
    "order",
    "limit",
    "intersect",
    "union",
    "except",
    "join",
    "on",
    "as",
    "and",
    "or",
];

struct ScopeEntry {
    alias: Option<String>,
    table: Option<usize>,
    /// Tables reachable through a derived table.
    inner: Vec<usize>,
}

struct Parser<'s> {
    toks: Vec<Token>,
    idx: usize,
    end: usize,
    schema: &'s DatabaseSchema,
    scopes: Vec<Vec<ScopeEntry>>,
}

impl<'s> Parser<'s> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.idx).map(|t| t.pos).unwrap_or(self.end)
    }

    fn syntax(&self, message: impl Into<String>) -> SqlError {
        let found = self
            .peek()
            .map(|t| t.to_string())
            .unwrap_or_else(|| "end of input".into());
        SqlError::Syntax {
            pos: self.pos(),
            message: format!("{} (found {found})", message.into()),
        }
    }

    fn is_kw_at(&self, offset: usize, kw: &str) -> bool {
        matches!(self.toks.get(self.idx + offset).map(|t| &t.tok),
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.is_kw_at(0, kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.is_kw(kw);
        if hit {
            self.idx += 1;
        }
        hit
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected {}", kw.to_uppercase())))
        }
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym)
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        let hit = self.is_sym(sym);
        if hit {
            self.idx += 1;
        }
        hit
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), SqlError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{sym}`")))
        }
    }

    fn name(&mut self) -> Result<String, SqlError> {
        match self.peek() {
            Some(Tok::Word(w)) | Some(Tok::QuotedIdent(w)) => {
                let w = w.clone();
                self.idx += 1;
                Ok(w)
            }
            _ => Err(self.syntax("expected a name")),
        }
    }

    fn is_clause_word(&self) -> bool {
        CLAUSE_WORDS.iter().any(|k| self.is_kw(k))
    }

    // ---- name resolution ----

    fn lookup_qualifier(&self, q: &str) -> Option<usize> {
        for scope in self.scopes.iter().rev() {
            for e in scope {
                if e.alias.as_deref().is_some_and(|a| a.eq_ignore_ascii_case(q)) {
                    return e.table.or_else(|| e.inner.first().copied());
                }
            }
            for e in scope {
                if let Some(t) = e.table {
                    if self.schema.table(t).name.eq_ignore_ascii_case(q) {
                        return Some(t);
                    }
                }
            }
        }
        self.schema.find_table(q)
    }

    fn resolve(&self, qualifier: Option<&str>, name: &str) -> Result<ColumnRef, SqlError> {
        let unknown = || match qualifier {
            Some(q) => SqlError::UnknownColumn(format!("{q}.{name}")),
            None => SqlError::UnknownColumn(name.to_string()),
        };
        if let Some(q) = qualifier {
            let t = self
                .lookup_qualifier(q)
                .ok_or_else(|| SqlError::UnknownTable(q.to_string()))?;
            return self.schema.find_column(t, name).ok_or_else(unknown);
        }
        if name == "*" {
            let first = self
                .scopes
                .last()
                .and_then(|s| s.iter().find_map(|e| e.table.or_else(|| e.inner.first().copied())))
                .unwrap_or(0);
            return Ok(ColumnRef::star(first));
        }
        for scope in self.scopes.iter().rev() {
            for e in scope {
                for t in e.table.iter().chain(&e.inner) {
                    if let Some(c) = self.schema.find_column(*t, name) {
                        return Ok(c);
                    }
                }
            }
        }
        Err(unknown())
    }

    // ---- expressions ----

    fn column(&mut self) -> Result<ColumnRef, SqlError> {
        if self.eat_sym("*") {
            return self.resolve(None, "*");
        }
        let first = self.name()?;
        if self.eat_sym(".") {
            if self.eat_sym("*") {
                return self.resolve(Some(&first), "*");
            }
            let second = self.name()?;
            self.resolve(Some(&first), &second)
        } else {
            self.resolve(None, &first)
        }
    }

    fn agg_word(&self) -> Option<AggFun> {
        match self.peek() {
            Some(Tok::Word(w)) if matches!(self.toks.get(self.idx + 1).map(|t| &t.tok), Some(Tok::Sym("("))) => {
                AggFun::parse(w)
            }
            _ => None,
        }
    }

    fn col_unit(&mut self) -> Result<ColUnit, SqlError> {
        if let Some(agg) = self.agg_word() {
            self.idx += 2;
            let distinct = self.eat_kw("distinct");
            let col = self.column()?;
            self.expect_sym(")")?;
            return Ok(ColUnit {
                agg: Some(agg),
                col,
                distinct,
            });
        }
        let distinct = self.eat_kw("distinct");
        Ok(ColUnit {
            agg: None,
            col: self.column()?,
            distinct,
        })
    }

    fn val_unit(&mut self) -> Result<ValUnit, SqlError> {
        let left = self.col_unit()?;
        let op = match self.peek() {
            Some(Tok::Sym("-")) => ArithOp::Minus,
            Some(Tok::Sym("+")) => ArithOp::Plus,
            Some(Tok::Sym("*")) => ArithOp::Times,
            Some(Tok::Sym("/")) => ArithOp::Divide,
            _ => return Ok(ValUnit::col(left)),
        };
        self.idx += 1;
        Ok(ValUnit {
            left,
            arith: Some((op, self.col_unit()?)),
        })
    }

    fn value(&mut self) -> Result<Value, SqlError> {
        match self.peek() {
            Some(Tok::Number(n)) => {
                let n = *n;
                self.idx += 1;
                Ok(Value::Number(n))
            }
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.idx += 1;
                Ok(Value::String(s))
            }
            Some(Tok::Sym("(")) => {
                self.idx += 1;
                let q = self.query()?;
                self.expect_sym(")")?;
                Ok(Value::Subquery(Box::new(q)))
            }
            Some(Tok::Word(w))
                if w.eq_ignore_ascii_case("value")
                    && !self.is_sym_at(1, ".")
                    && self.resolve(None, "value").is_err() =>
            {
                self.idx += 1;
                Ok(Value::Slot)
            }
            _ => Ok(Value::Column(self.col_unit()?)),
        }
    }

    fn is_sym_at(&self, offset: usize, sym: &str) -> bool {
        matches!(self.toks.get(self.idx + offset).map(|t| &t.tok), Some(Tok::Sym(s)) if *s == sym)
    }

    fn predicate(&mut self) -> Result<Predicate, SqlError> {
        if self.is_kw("exists") || (self.is_kw("not") && self.is_kw_at(1, "exists")) {
            let not = self.eat_kw("not");
            self.idx += 1;
            let right = self.value()?;
            let star = self.resolve(None, "*")?;
            return Ok(Predicate {
                not,
                op: SqlOp::Exists,
                left: ValUnit::col(ColUnit::plain(star)),
                right,
                right2: None,
            });
        }
        let left = self.val_unit()?;
        let mut not = self.eat_kw("not");
        let op = match self.peek() {
            Some(Tok::Sym("=")) => SqlOp::Eq,
            Some(Tok::Sym("!=")) | Some(Tok::Sym("<>")) => SqlOp::Ne,
            Some(Tok::Sym(">")) => SqlOp::Gt,
            Some(Tok::Sym("<")) => SqlOp::Lt,
            Some(Tok::Sym(">=")) => SqlOp::Ge,
            Some(Tok::Sym("<=")) => SqlOp::Le,
            Some(Tok::Word(w)) => match w.to_ascii_lowercase().as_str() {
                "between" => SqlOp::Between,
                "in" => SqlOp::In,
                "like" => SqlOp::Like,
                "is" => SqlOp::Is,
                _ => return Err(self.syntax("expected a comparison operator")),
            },
            _ => return Err(self.syntax("expected a comparison operator")),
        };
        self.idx += 1;
        if op == SqlOp::Is && self.eat_kw("not") {
            not = true;
        }
        let right = self.value()?;
        let right2 = if op == SqlOp::Between {
            self.expect_kw("and")?;
            Some(self.value()?)
        } else {
            None
        };
        Ok(Predicate {
            not,
            op,
            left,
            right,
            right2,
        })
    }

    fn conds(&mut self) -> Result<Vec<Cond>, SqlError> {
        let mut out = vec![Cond {
            link: Connector::And,
            pred: self.predicate()?,
        }];
        loop {
            let link = if self.eat_kw("and") {
                Connector::And
            } else if self.eat_kw("or") {
                Connector::Or
            } else {
                return Ok(out);
            };
            out.push(Cond {
                link,
                pred: self.predicate()?,
            });
        }
    }

    // ---- clauses ----

    fn parse_from_item(&mut self, scope: &mut Vec<ScopeEntry>) -> Result<FromItem, SqlError> {
        let (item, entry) = if self.eat_sym("(") {
            let sub = self.query()?;
            self.expect_sym(")")?;
            let inner = sub.from_tables().collect();
            (
                FromItem::Subquery(Box::new(sub)),
                ScopeEntry {
                    alias: None,
                    table: None,
                    inner,
                },
            )
        } else {
            let name = self.name()?;
            let t = self.schema.find_table(&name).ok_or(SqlError::UnknownTable(name))?;
            (
                FromItem::Table(t),
                ScopeEntry {
                    alias: None,
                    table: Some(t),
                    inner: Vec::new(),
                },
            )
        };
        let mut entry = entry;
        if self.eat_kw("as") || (matches!(self.peek(), Some(Tok::Word(_))) && !self.is_clause_word()) {
            entry.alias = Some(self.name()?);
        }
        scope.push(entry);
        Ok(item)
    }

    /// Parse FROM into the query; ON conditions are resolved once every
    /// table of the clause is known.
    fn parse_from_clause(&mut self, q: &mut SqlQuery) -> Result<(), SqlError> {
        let mut scope = Vec::new();
        let mut on_ranges = Vec::new();
        q.from.push(self.parse_from_item(&mut scope)?);
        loop {
            if self.eat_kw("join") || self.eat_sym(",") {
                q.from.push(self.parse_from_item(&mut scope)?);
                if self.eat_kw("on") {
                    let start = self.idx;
                    self.skip_on()?;
                    on_ranges.push((start, self.idx));
                }
            } else {
                break;
            }
        }
        self.scopes.push(scope);
        let resume = self.idx;
        for (start, end) in on_ranges {
            self.idx = start;
            while self.idx < end {
                let l = self.column()?;
                self.expect_sym("=")?;
                let r = self.column()?;
                q.joins.push(JoinCond { left: l, right: r });
                if self.idx < end {
                    self.expect_kw("and")?;
                }
            }
        }
        self.idx = resume;
        Ok(())
    }

    /// Skip `a = b {AND a = b}` without resolving names.
    fn skip_on(&mut self) -> Result<(), SqlError> {
        loop {
            self.skip_column()?;
            self.expect_sym("=")?;
            self.skip_column()?;
            if !self.eat_kw("and") {
                return Ok(());
            }
        }
    }

    fn skip_column(&mut self) -> Result<(), SqlError> {
        self.name()?;
        if self.eat_sym(".") {
            self.name()?;
        }
        Ok(())
    }

    /// Index of the FROM keyword belonging to the SELECT starting at `idx`.
    fn find_from(&self) -> Result<usize, SqlError> {
        let mut depth = 0i32;
        for (i, t) in self.toks.iter().enumerate().skip(self.idx) {
            match &t.tok {
                Tok::Sym("(") => depth += 1,
                Tok::Sym(")") => {
                    depth -= 1;
                    if depth < 0 {
                        break;
                    }
                }
                Tok::Word(w) if depth == 0 && w.eq_ignore_ascii_case("from") => return Ok(i),
                _ => {}
            }
        }
        Err(self.syntax("SELECT without FROM"))
    }

    fn select_item(&mut self) -> Result<SelectItem, SqlError> {
        let item = if let Some(agg) = self.agg_word() {
            self.idx += 2;
            let distinct = self.eat_kw("distinct");
            let mut value = self.val_unit()?;
            value.left.distinct |= distinct;
            self.expect_sym(")")?;
            SelectItem { agg: Some(agg), value }
        } else {
            SelectItem {
                agg: None,
                value: self.val_unit()?,
            }
        };
        if self.eat_kw("as") {
            self.name()?;
        }
        Ok(item)
    }

    fn select_core(&mut self) -> Result<SqlQuery, SqlError> {
        self.expect_kw("select")?;
        let mut q = SqlQuery {
            distinct: self.eat_kw("distinct"),
            ..Default::default()
        };
        let select_start = self.idx;
        let from_at = self.find_from()?;
        self.idx = from_at + 1;
        self.parse_from_clause(&mut q)?;
        let after_from = self.idx;

        self.idx = select_start;
        q.select.push(self.select_item()?);
        while self.eat_sym(",") {
            q.select.push(self.select_item()?);
        }
        if self.idx != from_at {
            return Err(self.syntax("expected FROM"));
        }
        self.idx = after_from;

        if self.eat_kw("where") {
            q.where_ = self.conds()?;
        }
        if self.is_kw("group") {
            self.idx += 1;
            self.expect_kw("by")?;
            q.group_by.push(self.col_unit()?);
            while self.eat_sym(",") {
                q.group_by.push(self.col_unit()?);
            }
        }
        if self.eat_kw("having") {
            q.having = self.conds()?;
        }
        if self.is_kw("order") {
            self.idx += 1;
            self.expect_kw("by")?;
            let mut keys = Vec::new();
            let mut direction = OrderDir::Asc;
            loop {
                keys.push(self.val_unit()?);
                if self.eat_kw("desc") {
                    direction = OrderDir::Desc;
                } else if self.eat_kw("asc") {
                    direction = OrderDir::Asc;
                }
                if !self.eat_sym(",") {
                    break;
                }
            }
            q.order_by = Some(SqlOrder { direction, keys });
        }
        if self.eat_kw("limit") {
            match self.peek() {
                Some(Tok::Number(n)) if *n >= 0.0 && n.fract() == 0.0 => {
                    q.limit = Some(*n as u64);
                    self.idx += 1;
                }
                _ => return Err(self.syntax("expected a row count after LIMIT")),
            }
        }
        self.scopes.pop();
        Ok(q)
    }

    fn query(&mut self) -> Result<SqlQuery, SqlError> {
        let mut q = self.select_core()?;
        let kind = if self.eat_kw("intersect") {
            SetOpKind::Intersect
        } else if self.eat_kw("union") {
            SetOpKind::Union
        } else if self.eat_kw("except") {
            SetOpKind::Except
        } else {
            return Ok(q);
        };
        q.set_op = Some((kind, Box::new(self.query()?)));
        Ok(q)
    }
}

/// Parse SQL text in the Spider subset: one SELECT level per subquery,
/// `JOIN ... ON` equi-joins, flat AND/OR condition lists, set operations.
pub fn parse_sql(text: &str, schema: &DatabaseSchema) -> Result<SqlQuery, SqlError> {
    let toks = tokenize(text).map_err(|e| SqlError::Lex {
        pos: e.pos,
        snippet: e.snippet,
        message: e.message,
    })?;
    let mut p = Parser {
        toks,
        idx: 0,
        end: text.len(),
        schema,
        scopes: Vec::new(),
    };
    let q = p.query()?;
    p.eat_sym(";");
    if p.idx != p.toks.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(q)
}
