use std::fmt;

use super::ast::*;
use crate::schema::DatabaseSchema;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Index of the offending condition, when there is one.
    pub condition: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.condition {
            Some(i) => write!(f, "condition {}: {}", i + 1, self.message),
            None => f.write_str(&self.message),
        }
    }
}

struct Checker<'a> {
    schema: &'a DatabaseSchema,
    out: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn push(&mut self, condition: Option<usize>, message: impl Into<String>) {
        self.out.push(Diagnostic {
            condition,
            message: message.into(),
        });
    }

    fn column(&mut self, at: Option<usize>, c: &Column) {
        let tables = self.schema.tables();
        let Some(table) = tables.get(c.col.table) else {
            self.push(at, format!("table index {} out of range", c.col.table));
            return;
        };
        if c.col.column >= table.columns.len() {
            self.push(
                at,
                format!("column index {} out of range for `{}`", c.col.column, table.name),
            );
            return;
        }
        if c.col.is_star() && matches!(c.agg, Some(a) if a != AggFun::Count) {
            self.push(
                at,
                format!("{}({}.*) is only defined for count", c.agg.unwrap(), table.name),
            );
        }
    }

    fn operand(&mut self, at: usize, o: &Operand) {
        if let Operand::Column(c) = o {
            self.column(Some(at), c);
        }
        if let Operand::Number(n) = o {
            if !n.is_finite() {
                self.push(Some(at), "non-finite number");
            }
        }
    }
}

/// Whether the right side of `cond` can become a nested query that `SUB`
/// conditions attach to.
pub(crate) fn forms_subquery(cond: &Condition) -> bool {
    match &cond.right {
        Operand::Column(c) if c.is_table_star() => {
            matches!(cond.op, CondOp::In | CondOp::NotIn | CondOp::Exists)
        }
        Operand::Column(_) => cond.op != CondOp::Join,
        _ => false,
    }
}

/// Check every structural invariant of a NatSQL AST; an empty result means
/// the query is well formed for `dialect`.
pub fn validate(query: &NatSqlQuery, schema: &DatabaseSchema, dialect: Dialect) -> Vec<Diagnostic> {
    let mut ck = Checker {
        schema,
        out: Vec::new(),
    };
    if query.select.is_empty() {
        ck.push(None, "SELECT needs at least one column");
    }
    for c in &query.select {
        ck.column(None, c);
    }

    let mut subquery_anchor = false;
    for (i, cond) in query.conditions.iter().enumerate() {
        let at = Some(i);
        match (i, cond.conjunct) {
            (0, Some(c)) if !c.is_set_op() => {
                ck.push(at, format!("leading conjunct {} has nothing to connect", c.keyword()))
            }
            (i, None) if i > 0 => ck.push(at, "missing conjunct between conditions"),
            (_, Some(Conjunct::Sub)) if !subquery_anchor => {
                ck.push(at, "SUB without a preceding condition that forms a subquery")
            }
            _ => {}
        }
        match &cond.left {
            Operand::Placeholder => {}
            Operand::Column(c) => ck.column(at, c),
            _ => ck.push(at, "left side must be a column or @"),
        }
        if matches!(cond.right, Operand::Placeholder) || matches!(cond.right2, Some(Operand::Placeholder)) {
            ck.push(at, "placeholder illegal in Cond_R");
        }
        ck.operand(i, &cond.right);
        match (&cond.right2, cond.op.takes_second_bound()) {
            (None, true) => ck.push(at, format!("{} needs a second bound", cond.op)),
            (Some(_), false) => ck.push(at, format!("{} takes no second bound", cond.op)),
            (Some(o), true) => {
                if !o.is_literal() {
                    ck.push(at, "BETWEEN bounds must be numbers, strings or value slots");
                }
                ck.operand(i, o);
            }
            (None, false) => {}
        }
        if cond.op == CondOp::Join && cond.right_table_star().is_none() {
            ck.push(at, "JOIN needs a table.* on the right");
        }
        if cond.conjunct.is_some_and(Conjunct::is_set_op) {
            subquery_anchor = false;
        }
        if forms_subquery(cond) {
            subquery_anchor = true;
        }
    }

    match (&query.group_by, dialect) {
        (Some(_), Dialect::Base) => ck.push(None, "GROUP BY is only allowed in the natsql-g dialect"),
        (Some(cols), Dialect::NatsqlG) => {
            if cols.is_empty() {
                ck.push(None, "GROUP BY needs at least one column");
            }
            for c in cols {
                ck.column(None, c);
            }
        }
        (None, _) => {}
    }
    if let Some(order) = &query.order_by {
        if order.keys.is_empty() {
            ck.push(None, "ORDER BY needs at least one column");
        }
        for c in &order.keys {
            ck.column(None, c);
        }
    }
    ck.out
}
