use std::fmt::Write;

use super::ast::*;
use crate::schema::{ColumnRef, DatabaseSchema};

fn name(out: &mut String, raw: &str) {
    let lower = raw.to_lowercase();
    let plain = lower.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && lower.chars().all(|c| c.is_alphanumeric() || c == '_');
    if plain {
        out.push_str(&lower);
    } else {
        out.push('`');
        out.push_str(&lower.replace('`', "``"));
        out.push('`');
    }
}

fn table_col(out: &mut String, schema: &DatabaseSchema, c: ColumnRef) {
    name(out, &schema.table(c.table).name);
    out.push('.');
    if c.is_star() {
        out.push('*');
    } else {
        name(out, &schema.column(c).name);
    }
}

fn column(out: &mut String, schema: &DatabaseSchema, c: &Column) {
    match c.agg {
        Some(agg) => {
            out.push_str(agg.as_str());
            out.push('(');
            if c.distinct {
                out.push_str("DISTINCT ");
            }
            table_col(out, schema, c.col);
            out.push(')');
        }
        None => {
            if c.distinct {
                out.push_str("DISTINCT ");
            }
            table_col(out, schema, c.col);
        }
    }
}

pub(crate) fn string_literal(out: &mut String, s: &str) {
    out.push('"');
    out.push_str(&s.replace('"', "\"\""));
    out.push('"');
}

fn operand(out: &mut String, schema: &DatabaseSchema, o: &Operand) {
    match o {
        Operand::Placeholder => out.push('@'),
        Operand::Column(c) => column(out, schema, c),
        Operand::Number(n) => {
            let _ = write!(out, "{n}");
        }
        Operand::String(s) => string_literal(out, s),
        Operand::ValueSlot => out.push_str("value"),
    }
}

fn column_list(out: &mut String, schema: &DatabaseSchema, cols: &[Column]) {
    for (i, c) in cols.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        column(out, schema, c);
    }
}

/// Canonical single-line NatSQL text: upper-case keywords, lower-case schema
/// names, double-quoted strings.
pub fn print_natsql(query: &NatSqlQuery, schema: &DatabaseSchema) -> String {
    let mut out = String::from("SELECT ");
    column_list(&mut out, schema, &query.select);
    if !query.conditions.is_empty() {
        out.push_str(" WHERE");
        for cond in &query.conditions {
            if let Some(c) = cond.conjunct {
                out.push(' ');
                out.push_str(c.keyword());
            }
            out.push(' ');
            operand(&mut out, schema, &cond.left);
            out.push(' ');
            out.push_str(cond.op.token());
            out.push(' ');
            operand(&mut out, schema, &cond.right);
            if let Some(r2) = &cond.right2 {
                out.push_str(" AND ");
                operand(&mut out, schema, r2);
            }
        }
    }
    if let Some(cols) = &query.group_by {
        out.push_str(" GROUP BY ");
        column_list(&mut out, schema, cols);
    }
    if let Some(order) = &query.order_by {
        out.push_str(" ORDER BY ");
        column_list(&mut out, schema, &order.keys);
        match order.direction {
            Direction::Asc => out.push_str(" ASC"),
            Direction::Desc => out.push_str(" DESC"),
            Direction::Unspecified => {}
        }
        if let Some(n) = order.limit {
            let _ = write!(out, " LIMIT {n}");
        }
    }
    out
}
