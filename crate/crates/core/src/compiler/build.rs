use serde::Serialize;

use super::infer::ResolvedQuery;
use super::plan::{Link, Segment};
use super::{CompileConfig, CompileError, GroupByPolicy};
use crate::natsql::{forms_subquery, Column, CondOp, Direction, Operand, OrderBy};
use crate::schema::{ColumnRef, DatabaseSchema};
use crate::sql::*;

/// Where a NatSQL condition ended up in the generated SQL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Clause {
    Where,
    Having,
    /// Only contributed a join.
    JoinOn,
    /// WHERE or HAVING of a nested query.
    Subquery,
    /// Consumed as the bridge of a set-operation right-hand side.
    SetOpRhs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Placement {
    pub condition: usize,
    pub segment: usize,
    pub clause: Clause,
}

/// A condition with the subquery conditions hanging off it.
struct Node {
    index: usize,
    link: Connector,
    negated: bool,
    parent: Option<usize>,
}

pub(super) struct Builder<'a> {
    pub schema: &'a DatabaseSchema,
    pub config: &'a CompileConfig,
    pub resolved: &'a ResolvedQuery,
    pub placements: Vec<Placement>,
    nodes: Vec<Node>,
    segment: usize,
}

fn sql_op(op: CondOp) -> Option<(bool, SqlOp)> {
    Some(match op {
        CondOp::Between => (false, SqlOp::Between),
        CondOp::Eq => (false, SqlOp::Eq),
        CondOp::Gt => (false, SqlOp::Gt),
        CondOp::Lt => (false, SqlOp::Lt),
        CondOp::Ge => (false, SqlOp::Ge),
        CondOp::Le => (false, SqlOp::Le),
        CondOp::Ne => (false, SqlOp::Ne),
        CondOp::In => (false, SqlOp::In),
        CondOp::Like => (false, SqlOp::Like),
        CondOp::Is => (false, SqlOp::Is),
        CondOp::Exists => (false, SqlOp::In),
        CondOp::NotIn => (true, SqlOp::In),
        CondOp::NotLike => (true, SqlOp::Like),
        CondOp::NotBetween => (true, SqlOp::Between),
        CondOp::IsNot => (true, SqlOp::Is),
        CondOp::Join => return None,
    })
}

fn push_table(list: &mut Vec<usize>, t: usize) {
    if !list.contains(&t) {
        list.push(t);
    }
}

fn col_unit(c: &Column) -> ColUnit {
    ColUnit {
        agg: c.agg,
        col: c.col,
        distinct: c.distinct,
    }
}

impl<'a> Builder<'a> {
    pub fn new(schema: &'a DatabaseSchema, config: &'a CompileConfig, resolved: &'a ResolvedQuery) -> Self {
        Self {
            schema,
            config,
            resolved,
            placements: Vec::new(),
            nodes: Vec::new(),
            segment: 0,
        }
    }

    fn cond(&self, i: usize) -> &crate::natsql::Condition {
        &self.resolved.query.conditions[i]
    }

    fn place(&mut self, condition: usize, clause: Clause) {
        self.placements.push(Placement {
            condition,
            segment: self.segment,
            clause,
        });
    }

    /// Join-only condition: `@ join t.*` or `@ is t.*`.
    fn is_join_only(&self, i: usize) -> bool {
        self.resolved.table_operands[i].is_some() && matches!(self.cond(i).op, CondOp::Join | CondOp::Is)
    }

    fn left(&self, i: usize) -> Result<Column, CompileError> {
        self.cond(i)
            .left
            .as_column()
            .copied()
            .ok_or(CompileError::Unresolvable { condition: i + 1 })
    }

    /// Arrange the planned conditions of a segment into top-level nodes
    /// with `sub` conditions under their anchors.
    fn arrange(&mut self, segment: &Segment) -> Result<Vec<usize>, CompileError> {
        self.nodes.clear();
        let mut top = Vec::new();
        let mut anchor: Option<usize> = None;
        for p in &segment.conditions {
            let parent = match p.link {
                Link::Sub => Some(anchor.ok_or(CompileError::SubWithoutAnchor { condition: p.index + 1 })?),
                _ => None,
            };
            let id = self.nodes.len();
            self.nodes.push(Node {
                index: p.index,
                link: p.link.connector(),
                negated: p.negated,
                parent,
            });
            if parent.is_none() {
                top.push(id);
            }
            if forms_subquery(&self.resolved_original(p.index)) {
                anchor = Some(id);
            }
        }
        Ok(top)
    }

    /// The condition with its `table.*` operand restored, which is what
    /// decides subquery formation.
    fn resolved_original(&self, i: usize) -> crate::natsql::Condition {
        let mut c = self.cond(i).clone();
        if let Some(t) = self.resolved.table_operands[i] {
            c.right = Operand::Column(Column::plain(ColumnRef::star(t)));
        }
        c
    }

    fn children(&self, id: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&n| self.nodes[n].parent == Some(id))
            .collect()
    }

    /// Build one SELECT level.
    fn select(
        &mut self,
        select: &[Column],
        seed: &[usize],
        nodes: &[usize],
        order: Option<&OrderBy>,
        group: Option<&[Column]>,
        nested: bool,
    ) -> Result<SqlQuery, CompileError> {
        let mut needed = seed.to_vec();
        for c in select {
            push_table(&mut needed, c.col.table);
        }
        let mut edges = Vec::new();
        for &n in nodes {
            let i = self.nodes[n].index;
            push_table(&mut needed, self.left(i)?.col.table);
            if self.is_join_only(i) {
                if let Some((a, b)) = self.resolved.bridges[i] {
                    push_table(&mut needed, b.table);
                    edges.push((a, b));
                }
            }
        }
        for c in order
            .map(|o| o.keys.as_slice())
            .unwrap_or(&[])
            .iter()
            .chain(group.unwrap_or(&[]))
        {
            push_table(&mut needed, c.col.table);
        }

        let mut q = SqlQuery::default();
        for c in select {
            let mut unit = col_unit(c);
            unit.agg = None;
            if self.config.emit_distinct && c.distinct && c.agg.is_none() {
                q.distinct = true;
                unit.distinct = false;
            }
            if !self.config.emit_distinct {
                unit.distinct = false;
            }
            q.select.push(SelectItem {
                agg: c.agg,
                value: ValUnit::col(unit),
            });
        }

        let mut having_tables = Vec::new();
        for &n in nodes {
            let i = self.nodes[n].index;
            let clause_kind = if nested { Clause::Subquery } else { Clause::Where };
            if self.is_join_only(i) {
                self.place(i, if nested { Clause::Subquery } else { Clause::JoinOn });
                continue;
            }
            let pred = self.predicate(n, &needed)?;
            let cond = Cond {
                link: self.nodes[n].link,
                pred,
            };
            let left = self.left(i)?;
            if left.is_aggregated() {
                having_tables.push(left.col.table);
                q.having.push(cond);
                self.place(i, if nested { Clause::Subquery } else { Clause::Having });
            } else {
                q.where_.push(cond);
                self.place(i, clause_kind);
            }
        }

        let (from, joins) = self.connect(&needed, &edges)?;
        q.from = from.into_iter().map(FromItem::Table).collect();
        q.joins = joins;

        if let Some(order) = order {
            q.order_by = Some(SqlOrder {
                direction: if order.direction == Direction::Desc {
                    OrderDir::Desc
                } else {
                    OrderDir::Asc
                },
                keys: order.keys.iter().map(|c| ValUnit::col(col_unit(c))).collect(),
            });
            q.limit = order.limit;
        }

        match group {
            Some(cols) => q.group_by = cols.iter().map(col_unit).collect(),
            None => {
                let plain = select.iter().find(|c| !c.is_aggregated());
                let order_agg = order.is_some_and(|o| o.keys.iter().any(|k| k.is_aggregated()));
                let select_agg = select.iter().any(|c| c.is_aggregated());
                let needs = !q.having.is_empty() || (plain.is_some() && (select_agg || order_agg));
                if let (true, Some(p)) = (needs, plain) {
                    let agg_tables = select
                        .iter()
                        .chain(order.map(|o| o.keys.as_slice()).unwrap_or(&[]))
                        .filter(|c| c.is_aggregated())
                        .map(|c| c.col.table)
                        .chain(having_tables);
                    q.group_by.push(ColUnit::plain(self.group_key(p, agg_tables)));
                }
            }
        }
        if !self.config.emit_distinct {
            strip_distinct(&mut q);
        }
        Ok(q)
    }

    fn group_key(&self, plain: &Column, mut agg_tables: impl Iterator<Item = usize>) -> ColumnRef {
        let t = plain.col.table;
        let pk = self.schema.primary_key_of(t);
        if agg_tables.any(|a| a != t) {
            if let Some(pk) = pk {
                return pk;
            }
        }
        match self.config.groupby_policy {
            GroupByPolicy::FirstSelectColumn => plain.col,
            GroupByPolicy::PrimaryKeyOfSelectTable => pk.unwrap_or(plain.col),
        }
    }

    fn value(&self, o: &Operand) -> Result<Value, CompileError> {
        Ok(match o {
            Operand::Number(n) => Value::Number(*n),
            Operand::String(s) => Value::String(s.clone()),
            Operand::ValueSlot => Value::Slot,
            Operand::Column(c) => Value::Column(col_unit(c)),
            Operand::Placeholder => return Err(CompileError::Invalid("placeholder illegal in Cond_R".into())),
        })
    }

    fn predicate(&mut self, n: usize, outer: &[usize]) -> Result<Predicate, CompileError> {
        let i = self.nodes[n].index;
        let cond = self.cond(i).clone();
        let op = if self.nodes[n].negated {
            cond.op.negated().unwrap_or(cond.op)
        } else {
            cond.op
        };
        let (not, sql) = sql_op(op).ok_or(CompileError::Unresolvable { condition: i + 1 })?;
        let left = self.left(i)?;
        let children = self.children(n);
        let table_operand = self.resolved.table_operands[i];
        if table_operand.is_some() && !matches!(cond.op, CondOp::In | CondOp::NotIn | CondOp::Exists) {
            return Err(CompileError::Unsupported(format!(
                "condition {}: {} cannot take a table operand",
                i + 1,
                cond.op
            )));
        }
        let right = match &cond.right {
            Operand::Column(rc) => {
                let subquery = !children.is_empty()
                    || rc.is_aggregated()
                    || table_operand.is_some()
                    || matches!(sql, SqlOp::In | SqlOp::Exists)
                    || !outer.contains(&rc.col.table);
                if subquery {
                    let sub = self.select(&[*rc], &[rc.col.table], &children, None, None, true)?;
                    Value::Subquery(Box::new(sub))
                } else {
                    Value::Column(col_unit(rc))
                }
            }
            other => self.value(other)?,
        };
        let right2 = cond.right2.as_ref().map(|o| self.value(o)).transpose()?;
        Ok(Predicate {
            not,
            op: sql,
            left: ValUnit::col(col_unit(&left)),
            right,
            right2,
        })
    }

    fn connect(
        &self,
        needed: &[usize],
        edges: &[(ColumnRef, ColumnRef)],
    ) -> Result<(Vec<usize>, Vec<JoinCond>), CompileError> {
        let mut from = vec![needed[0]];
        let mut joins = Vec::new();
        for &t in &needed[1..] {
            if from.contains(&t) {
                continue;
            }
            let edge = edges.iter().find_map(|&(a, b)| {
                if b.table == t && from.contains(&a.table) {
                    Some((a, b))
                } else if a.table == t && from.contains(&b.table) {
                    Some((b, a))
                } else {
                    None
                }
            });
            if let Some((existing, incoming)) = edge {
                from.push(t);
                joins.push(JoinCond {
                    left: existing,
                    right: incoming,
                });
                continue;
            }
            for step in self.schema.join_path(&from, t)? {
                if !from.contains(&step.table) {
                    from.push(step.table);
                    joins.push(JoinCond {
                        left: step.existing,
                        right: step.incoming,
                    });
                }
            }
        }
        Ok((from, joins))
    }

    /// Build the SELECT for one segment.
    pub fn segment(
        &mut self,
        index: usize,
        segment: &Segment,
        order: Option<&OrderBy>,
        group: Option<&[Column]>,
    ) -> Result<SqlQuery, CompileError> {
        self.segment = index;
        let top = self.arrange(segment)?;
        let select = self.resolved.query.select.clone();

        // A set-operation branch that opens with `@ is t.*` and otherwise
        // only constrains `t` selects the bridging column from `t` alone.
        if index > 0 {
            if let Some(&first) = top.first() {
                let i = self.nodes[first].index;
                let bridge = self.resolved.bridges[i];
                if let (true, Some((l, r)), [only]) = (self.is_join_only(i), bridge, select.as_slice()) {
                    let rest_on_r = top[1..].iter().all(|&n| {
                        let c = self.cond(self.nodes[n].index);
                        let tables = [&c.left, &c.right]
                            .into_iter()
                            .filter_map(|o| o.as_column())
                            .all(|col| col.col.table == r.table);
                        tables && !self.is_join_only(self.nodes[n].index)
                    });
                    if !only.is_aggregated() && only.col == l && rest_on_r && order.is_none() {
                        self.place(i, Clause::SetOpRhs);
                        let mut col = Column::plain(r);
                        col.distinct = only.distinct;
                        return self.select(&[col], &[r.table], &top[1..], None, group, false);
                    }
                }
            }
        }
        self.select(&select, &[], &top, order, group, false)
    }
}

fn strip_distinct(q: &mut SqlQuery) {
    q.distinct = false;
    for s in &mut q.select {
        s.value.left.distinct = false;
    }
}
