use std::fmt::Write;

use super::ast::*;
use crate::schema::{ColumnRef, DatabaseSchema};

/// Table aliases of one SELECT level.
struct Scope {
    /// Schema table per FROM position, `None` for derived tables.
    tables: Vec<Option<usize>>,
    aliased: bool,
}

impl Scope {
    fn new(q: &SqlQuery) -> Self {
        let tables = q
            .from
            .iter()
            .map(|f| match f {
                FromItem::Table(t) => Some(*t),
                FromItem::Subquery(_) => None,
            })
            .collect::<Vec<_>>();
        Self {
            aliased: tables.len() > 1,
            tables,
        }
    }

    fn position(&self, table: usize) -> Option<usize> {
        self.tables.iter().position(|t| *t == Some(table))
    }
}

fn ident(out: &mut String, raw: &str) {
    let plain = raw.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && raw.chars().all(|c| c.is_alphanumeric() || c == '_');
    if plain {
        out.push_str(raw);
    } else {
        out.push('`');
        out.push_str(&raw.replace('`', "``"));
        out.push('`');
    }
}

struct Renderer<'a> {
    schema: &'a DatabaseSchema,
    out: String,
}

impl Renderer<'_> {
    fn column(&mut self, scope: &Scope, c: ColumnRef) {
        if c.is_star() {
            self.out.push('*');
            return;
        }
        let name = &self.schema.column(c).name;
        match scope.position(c.table) {
            Some(i) if scope.aliased => {
                let _ = write!(self.out, "T{}.", i + 1);
            }
            Some(_) => {}
            None => {
                ident(&mut self.out, &self.schema.table(c.table).name);
                self.out.push('.');
            }
        }
        ident(&mut self.out, name);
    }

    fn col_unit(&mut self, scope: &Scope, u: &ColUnit) {
        match u.agg {
            Some(agg) => {
                self.out.push_str(agg.as_str());
                self.out.push('(');
                if u.distinct {
                    self.out.push_str("DISTINCT ");
                }
                self.column(scope, u.col);
                self.out.push(')');
            }
            None => {
                if u.distinct {
                    self.out.push_str("DISTINCT ");
                }
                self.column(scope, u.col);
            }
        }
    }

    fn val_unit(&mut self, scope: &Scope, v: &ValUnit) {
        self.col_unit(scope, &v.left);
        if let Some((op, right)) = &v.arith {
            let _ = write!(self.out, " {} ", op.symbol());
            self.col_unit(scope, right);
        }
    }

    fn value(&mut self, scope: &Scope, v: &Value) {
        match v {
            Value::Number(n) => {
                let _ = write!(self.out, "{n}");
            }
            Value::String(s) => {
                self.out.push('\'');
                self.out.push_str(&s.replace('\'', "''"));
                self.out.push('\'');
            }
            Value::Column(c) => self.col_unit(scope, c),
            Value::Subquery(q) => {
                self.out.push_str("( ");
                self.query(q);
                self.out.push_str(" )");
            }
            Value::Slot => self.out.push_str("value"),
        }
    }

    fn predicate(&mut self, scope: &Scope, p: &Predicate) {
        let not = if p.not { "NOT " } else { "" };
        match p.op {
            SqlOp::Exists => {
                self.out.push_str(not);
                self.out.push_str("EXISTS ");
                self.value(scope, &p.right);
                return;
            }
            SqlOp::Is => {
                self.val_unit(scope, &p.left);
                self.out.push_str(" IS ");
                self.out.push_str(not);
            }
            SqlOp::Between | SqlOp::In | SqlOp::Like => {
                self.val_unit(scope, &p.left);
                let _ = write!(self.out, " {not}{} ", p.op.keyword());
            }
            _ => {
                self.out.push_str(not);
                self.val_unit(scope, &p.left);
                let _ = write!(self.out, " {} ", p.op.keyword());
            }
        }
        self.value(scope, &p.right);
        if let Some(r2) = &p.right2 {
            self.out.push_str(" AND ");
            self.value(scope, r2);
        }
    }

    fn conds(&mut self, scope: &Scope, conds: &[Cond]) {
        for (i, c) in conds.iter().enumerate() {
            if i > 0 {
                let _ = write!(self.out, " {} ", c.link.keyword());
            }
            self.predicate(scope, &c.pred);
        }
    }

    fn from(&mut self, scope: &Scope, q: &SqlQuery) {
        // Each ON condition goes on the first join where both of its tables
        // are in scope.
        let mut on: Vec<Vec<&JoinCond>> = vec![Vec::new(); q.from.len()];
        for j in &q.joins {
            let a = scope.position(j.left.table);
            let b = scope.position(j.right.table);
            if let (Some(a), Some(b)) = (a, b) {
                let at = a.max(b).max(1).min(q.from.len().saturating_sub(1));
                on[at].push(j);
            }
        }
        for (i, item) in q.from.iter().enumerate() {
            if i > 0 {
                self.out.push_str(" JOIN ");
            }
            match item {
                FromItem::Table(t) => ident(&mut self.out, &self.schema.table(*t).name),
                FromItem::Subquery(sub) => {
                    self.out.push_str("( ");
                    self.query(sub);
                    self.out.push_str(" )");
                }
            }
            if scope.aliased {
                let _ = write!(self.out, " AS T{}", i + 1);
            }
            if i > 0 {
                for (k, j) in on[i].iter().enumerate() {
                    self.out.push_str(if k == 0 { " ON " } else { " AND " });
                    self.column(scope, j.left);
                    self.out.push_str(" = ");
                    self.column(scope, j.right);
                }
            }
        }
    }

    fn query(&mut self, q: &SqlQuery) {
        let scope = Scope::new(q);
        self.out.push_str("SELECT ");
        if q.distinct {
            self.out.push_str("DISTINCT ");
        }
        for (i, item) in q.select.iter().enumerate() {
            if i > 0 {
                self.out.push_str(" , ");
            }
            match item.agg {
                Some(agg) => {
                    self.out.push_str(agg.as_str());
                    self.out.push('(');
                    self.val_unit(&scope, &item.value);
                    self.out.push(')');
                }
                None => self.val_unit(&scope, &item.value),
            }
        }
        self.out.push_str(" FROM ");
        self.from(&scope, q);
        if !q.where_.is_empty() {
            self.out.push_str(" WHERE ");
            self.conds(&scope, &q.where_);
        }
        if !q.group_by.is_empty() {
            self.out.push_str(" GROUP BY ");
            for (i, g) in q.group_by.iter().enumerate() {
                if i > 0 {
                    self.out.push_str(" , ");
                }
                self.col_unit(&scope, g);
            }
        }
        if !q.having.is_empty() {
            self.out.push_str(" HAVING ");
            self.conds(&scope, &q.having);
        }
        if let Some(order) = &q.order_by {
            self.out.push_str(" ORDER BY ");
            for (i, k) in order.keys.iter().enumerate() {
                if i > 0 {
                    self.out.push_str(" , ");
                }
                self.val_unit(&scope, k);
            }
            if order.direction == OrderDir::Desc {
                self.out.push_str(" DESC");
            }
        }
        if let Some(n) = q.limit {
            let _ = write!(self.out, " LIMIT {n}");
        }
        if let Some((kind, rhs)) = &q.set_op {
            let _ = write!(self.out, " {} ", kind.keyword());
            self.query(rhs);
        }
    }
}

/// Render a query as SQLite text. Tables get `T1..Tn` aliases only when a
/// SELECT level has more than one FROM item; string literals are
/// single-quoted.
pub fn render_sql(query: &SqlQuery, schema: &DatabaseSchema) -> String {
    let mut r = Renderer {
        schema,
        out: String::new(),
    };
    r.query(query);
    r.out
}
