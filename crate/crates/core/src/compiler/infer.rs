use super::CompileError;
use crate::natsql::{Column, CondOp, NatSqlQuery, Operand};
use crate::schema::{ColumnRef, DatabaseSchema};

/// Pick the column pair that links `t_list` to `table_r`: a foreign key
/// from the first table that has one, else same-named columns from the first
/// table that has any, else the two primary keys. The pair is ordered
/// `(column on the t_list side, column on table_r)`.
pub fn infer_columns(schema: &DatabaseSchema, t_list: &[usize], table_r: usize) -> Option<(ColumnRef, ColumnRef)> {
    for &t in t_list {
        if let Some(pair) = schema.fk_between(t, table_r) {
            return Some(pair);
        }
    }
    for &t in t_list {
        if t == table_r {
            continue;
        }
        for (i, col) in schema.table(t).columns.iter().enumerate().skip(1) {
            if let Some(other) = schema.find_column(table_r, &col.name) {
                if !other.is_star() {
                    return Some((ColumnRef::new(t, i), other));
                }
            }
        }
    }
    let first = *t_list.first()?;
    Some((schema.primary_key_of(first)?, schema.primary_key_of(table_r)?))
}

/// A query whose `@` operands and right-hand `table.*` operands have been
/// replaced by concrete columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedQuery {
    pub query: NatSqlQuery,
    /// Per condition, the table a right-hand `table.*` stood for.
    pub table_operands: Vec<Option<usize>>,
    /// Per condition, the inferred `(existing side, table side)` pair when
    /// the condition bridges to a `table.*`.
    pub bridges: Vec<Option<(ColumnRef, ColumnRef)>>,
}

fn push_table(list: &mut Vec<usize>, t: usize) {
    if !list.contains(&t) {
        list.push(t);
    }
}

fn operand_table(o: &Operand) -> Option<usize> {
    o.as_column().map(|c| c.col.table)
}

/// Replace every `@` and bridging `table.*`. The tables visible to a
/// condition are the SELECT tables followed by the tables of every earlier
/// condition.
pub fn resolve_placeholders(query: &NatSqlQuery, schema: &DatabaseSchema) -> Result<ResolvedQuery, CompileError> {
    let mut t_list = Vec::new();
    for c in &query.select {
        push_table(&mut t_list, c.col.table);
    }
    let mut out = query.clone();
    let mut table_operands = Vec::with_capacity(query.conditions.len());
    let mut bridges = Vec::with_capacity(query.conditions.len());
    let unresolvable = |i: usize| CompileError::Unresolvable { condition: i + 1 };

    for (i, cond) in query.conditions.iter().enumerate() {
        let resolved = &mut out.conditions[i];
        let mut bridge = None;
        let star_table = cond.right_table_star();
        match (&cond.left, star_table) {
            (_, Some(table_r)) => {
                let lists = match &cond.left {
                    Operand::Column(c) => vec![c.col.table],
                    _ => t_list.clone(),
                };
                let (l, r) = infer_columns(schema, &lists, table_r).ok_or_else(|| unresolvable(i))?;
                let left = match &cond.left {
                    Operand::Column(c) => *c,
                    _ => Column::plain(l),
                };
                resolved.left = Operand::Column(left);
                resolved.right = Operand::Column(Column::plain(r));
                bridge = Some((left.col, r));
            }
            (Operand::Placeholder, None) => {
                let right = cond.right.as_column().ok_or_else(|| unresolvable(i))?;
                let col = if t_list.contains(&right.col.table) && !right.col.is_star() {
                    right.col
                } else {
                    let via_fk = schema.foreign_keys().iter().find_map(|fk| {
                        if fk.child == right.col {
                            Some(fk.parent)
                        } else if fk.parent == right.col {
                            Some(fk.child)
                        } else {
                            None
                        }
                    });
                    match via_fk.filter(|c| t_list.contains(&c.table)) {
                        Some(c) => c,
                        None => {
                            infer_columns(schema, &t_list, right.col.table)
                                .ok_or_else(|| unresolvable(i))?
                                .0
                        }
                    }
                };
                if col.is_star() {
                    return Err(unresolvable(i));
                }
                resolved.left = Operand::Column(Column::plain(col));
            }
            _ => {}
        }
        if cond.op == CondOp::Join && star_table.is_none() {
            return Err(unresolvable(i));
        }
        table_operands.push(star_table);
        bridges.push(bridge);

        for o in [&resolved.left, &resolved.right] {
            if let Some(t) = operand_table(o) {
                push_table(&mut t_list, t);
            }
        }
        if let Some(t) = star_table {
            push_table(&mut t_list, t);
        }
    }
    Ok(ResolvedQuery {
        query: out,
        table_operands,
        bridges,
    })
}
