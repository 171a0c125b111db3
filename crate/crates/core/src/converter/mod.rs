//! Gold SQL to NatSQL conversion and round-trip checking.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compiler::{compile, resolve_placeholders, CompileConfig};
use crate::dataset::Example;
use crate::evaluator::{exact_match, execution_match, KeyMap};
use crate::natsql::{
    print_natsql, Column, CondOp, Condition, Conjunct, Dialect, Direction, NatSqlQuery, Operand, OrderBy,
};
use crate::schema::{ColumnRef, DatabaseSchema};
use crate::sql::{
    render_sql, ColUnit, Cond, Connector, FromItem, OrderDir, SelectItem, SetOpKind, SqlOp, SqlQuery, ValUnit, Value,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConversionStatus {
    Converted,
    /// Converted, but something in the gold query was not carried over.
    Lossy,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionReport {
    pub status: ConversionStatus,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversion {
    pub natsql: Option<NatSqlQuery>,
    pub report: ConversionReport,
}

impl Conversion {
    fn unsupported(reason: String) -> Self {
        Self {
            natsql: None,
            report: ConversionReport {
                status: ConversionStatus::Unsupported,
                flags: vec![reason],
            },
        }
    }
}

struct Unsupported(String);

fn unsupported<T>(msg: impl Into<String>) -> Result<T, Unsupported> {
    Err(Unsupported(msg.into()))
}

/// One SELECT level, converted.
#[derive(Debug, Clone)]
struct Branch {
    select: Vec<Column>,
    /// First entry has no conjunct.
    conds: Vec<Condition>,
    order: Option<OrderBy>,
    group: Option<Vec<Column>>,
}

impl Branch {
    fn query(&self) -> NatSqlQuery {
        NatSqlQuery {
            select: self.select.clone(),
            conditions: self.conds.clone(),
            group_by: self.group.clone(),
            order_by: self.order.clone(),
        }
    }
}

struct Converter<'a> {
    schema: &'a DatabaseSchema,
    dialect: Dialect,
    config: CompileConfig,
    kmap: KeyMap,
    flags: Vec<String>,
}

fn op_of(not: bool, op: SqlOp) -> Result<CondOp, Unsupported> {
    Ok(match (not, op) {
        (false, SqlOp::Between) => CondOp::Between,
        (false, SqlOp::Eq) => CondOp::Eq,
        (false, SqlOp::Gt) => CondOp::Gt,
        (false, SqlOp::Lt) => CondOp::Lt,
        (false, SqlOp::Ge) => CondOp::Ge,
        (false, SqlOp::Le) => CondOp::Le,
        (false, SqlOp::Ne) => CondOp::Ne,
        (false, SqlOp::In) => CondOp::In,
        (false, SqlOp::Like) => CondOp::Like,
        (false, SqlOp::Is) => CondOp::Is,
        (false, SqlOp::Exists) => CondOp::Exists,
        (true, SqlOp::In) => CondOp::NotIn,
        (true, SqlOp::Like) => CondOp::NotLike,
        (true, SqlOp::Between) => CondOp::NotBetween,
        (true, SqlOp::Is) => CondOp::IsNot,
        (true, SqlOp::Eq) => CondOp::Ne,
        (true, SqlOp::Ne) => CondOp::Eq,
        (true, SqlOp::Gt) => CondOp::Le,
        (true, SqlOp::Lt) => CondOp::Ge,
        (true, SqlOp::Ge) => CondOp::Lt,
        (true, SqlOp::Le) => CondOp::Gt,
        (true, SqlOp::Exists) => return unsupported("NOT EXISTS"),
    })
}

fn first_with(mut conds: Vec<Condition>, conjunct: Option<Conjunct>) -> Vec<Condition> {
    if let Some(first) = conds.first_mut() {
        first.conjunct = conjunct;
    }
    conds
}

impl<'a> Converter<'a> {
    fn new(schema: &'a DatabaseSchema, dialect: Dialect) -> Self {
        Self {
            schema,
            dialect,
            config: CompileConfig::with_dialect(dialect),
            kmap: KeyMap::new(schema),
            flags: Vec::new(),
        }
    }

    /// `count(*)` names a table in NatSQL. With GROUP BY the rows being
    /// counted belong to the first FROM table other than the grouped entity.
    fn count_table(&self, q: &SqlQuery, star: ColumnRef) -> usize {
        let Some(key) = q.group_by.first().map(|u| u.col) else {
            return star.table;
        };
        let entity = self.entity_of(key);
        q.from_tables().find(|&t| t != entity).unwrap_or(key.table)
    }

    /// The table a grouping key identifies: the referenced table for a
    /// foreign key, else the key's own table.
    fn entity_of(&self, key: ColumnRef) -> usize {
        self.schema
            .foreign_keys()
            .iter()
            .find(|fk| fk.child == key && self.schema.is_primary_key(fk.parent))
            .map_or(key.table, |fk| fk.parent.table)
    }

    fn column(&self, q: &SqlQuery, agg: Option<crate::natsql::AggFun>, unit: &ColUnit) -> Result<Column, Unsupported> {
        let agg = match (agg, unit.agg) {
            (Some(_), Some(_)) => return unsupported("nested aggregate"),
            (a, b) => a.or(b),
        };
        let mut col = unit.col;
        if col.is_star() {
            col = ColumnRef::star(self.count_table(q, col));
        }
        Ok(Column {
            agg,
            col,
            distinct: unit.distinct,
        })
    }

    fn val_column(&self, q: &SqlQuery, agg: Option<crate::natsql::AggFun>, v: &ValUnit) -> Result<Column, Unsupported> {
        if v.arith.is_some() {
            return unsupported("arithmetic expression");
        }
        self.column(q, agg, &v.left)
    }

    fn select(&self, q: &SqlQuery) -> Result<Vec<Column>, Unsupported> {
        let mut out = Vec::with_capacity(q.select.len());
        for SelectItem { agg, value } in &q.select {
            out.push(self.val_column(q, *agg, value)?);
        }
        if q.distinct {
            match out.iter_mut().find(|c| !c.is_aggregated()) {
                Some(c) => c.distinct = true,
                None => return unsupported("DISTINCT over aggregates only"),
            }
        }
        Ok(out)
    }

    /// Does `cand`, appended to `prefix`, resolve to the intended columns?
    fn resolves_to(
        &self,
        select: &[Column],
        prefix: &[Condition],
        cand: &Condition,
        left: ColumnRef,
        right: ColumnRef,
    ) -> bool {
        let mut conds = prefix.to_vec();
        conds.push(cand.clone());
        let q = NatSqlQuery {
            select: select.to_vec(),
            conditions: conds,
            group_by: None,
            order_by: None,
        };
        let Ok(r) = resolve_placeholders(&q, self.schema) else {
            return false;
        };
        let last = r.query.conditions.last().expect("just pushed");
        let l = last.left.as_column().map(|c| c.col);
        let rr = last.right.as_column().map(|c| c.col);
        l == Some(left) && rr == Some(right)
    }

    fn condition(
        &mut self,
        q: &SqlQuery,
        select: &[Column],
        prefix: &[Condition],
        cond: &Cond,
        conjunct: Option<Conjunct>,
    ) -> Result<Vec<Condition>, Unsupported> {
        let p = &cond.pred;
        let left = self.val_column(q, None, &p.left)?;
        let op = op_of(p.not, p.op)?;
        let literal = |v: &Value| -> Result<Operand, Unsupported> {
            Ok(match v {
                Value::Number(n) => Operand::Number(*n),
                Value::String(s) => Operand::String(s.clone()),
                Value::Slot => Operand::ValueSlot,
                Value::Column(u) => Operand::Column(self.column(q, None, u)?),
                Value::Subquery(_) => return unsupported("subquery as a second bound"),
            })
        };
        let right2 = p.right2.as_ref().map(literal).transpose()?;
        let Value::Subquery(sub) = &p.right else {
            let mut c = Condition::new(conjunct, Operand::Column(left), op, literal(&p.right)?);
            c.right2 = right2;
            return Ok(vec![c]);
        };

        if sub.set_op.is_some() || sub.order_by.is_some() || sub.limit.is_some() {
            return unsupported("subquery with set operation or ORDER BY");
        }
        if sub.select.len() != 1 || sub.from.iter().any(|f| matches!(f, FromItem::Subquery(_))) {
            return unsupported("subquery shape");
        }
        let rc = self.val_column(sub, sub.select[0].agg, &sub.select[0].value)?;
        if sub.distinct && !rc.is_aggregated() {
            self.flags.push("DISTINCT in subquery dropped".into());
        }

        let mut candidates: Vec<Condition> = Vec::new();
        let mk = |l: Operand, r: Column| {
            let mut c = Condition::new(conjunct, l, op, Operand::Column(r));
            c.right2 = right2.clone();
            c
        };
        let star = Column::plain(ColumnRef::star(rc.col.table));
        let bridging = matches!(op, CondOp::In | CondOp::NotIn | CondOp::Exists) && !rc.is_aggregated();
        if bridging {
            candidates.push(mk(Operand::Placeholder, star));
            candidates.push(mk(Operand::Column(left), star));
        }
        candidates.push(mk(Operand::Placeholder, rc));
        let chosen = candidates
            .into_iter()
            .find(|c| self.resolves_to(select, prefix, c, left.col, rc.col))
            .unwrap_or_else(|| mk(Operand::Column(left), rc));

        let mut out = vec![chosen];
        let inner: Vec<&Cond> = sub.where_.iter().chain(&sub.having).collect();
        if inner.iter().skip(1).any(|c| c.link == Connector::Or) {
            return unsupported("OR inside a subquery");
        }
        for c in inner {
            let mut context = prefix.to_vec();
            context.extend(out.iter().cloned());
            let converted = self.condition(sub, select, &context, c, Some(Conjunct::Sub))?;
            out.extend(converted);
        }
        Ok(out)
    }

    fn branch(&mut self, q: &SqlQuery) -> Result<Branch, Unsupported> {
        if q.from.iter().any(|f| matches!(f, FromItem::Subquery(_))) {
            return unsupported("subquery in FROM");
        }
        let select = self.select(q)?;
        let mut conds: Vec<Condition> = Vec::new();
        let where_then_having = q
            .where_
            .iter()
            .map(|c| (c, false))
            .chain(q.having.iter().map(|c| (c, true)));
        for (i, (c, having)) in where_then_having.enumerate() {
            let conjunct = if i == 0 {
                None
            } else if having && std::ptr::eq(c, &q.having[0]) {
                Some(Conjunct::And)
            } else {
                Some(match c.link {
                    Connector::And => Conjunct::And,
                    Connector::Or => Conjunct::Or,
                })
            };
            let converted = self.condition(q, &select, &conds, c, conjunct)?;
            conds.extend(converted);
        }

        let order = match &q.order_by {
            Some(o) => {
                let keys = o
                    .keys
                    .iter()
                    .map(|k| self.val_column(q, None, k))
                    .collect::<Result<Vec<_>, _>>()?;
                let direction = match o.direction {
                    OrderDir::Asc => Direction::Asc,
                    OrderDir::Desc => Direction::Desc,
                };
                Some(OrderBy {
                    keys,
                    direction,
                    limit: q.limit,
                })
            }
            None => {
                if q.limit.is_some() {
                    self.flags.push("limit without order by dropped".into());
                }
                None
            }
        };
        let group = match self.dialect {
            Dialect::NatsqlG if !q.group_by.is_empty() => Some(
                q.group_by
                    .iter()
                    .map(|u| self.column(q, None, u))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            _ => None,
        };
        let mut branch = Branch {
            select,
            conds,
            order,
            group,
        };
        self.add_joins(&mut branch, q)?;
        Ok(branch)
    }

    /// Add `@ join t.*` for FROM tables that the compiler would not bring
    /// in by itself.
    fn add_joins(&mut self, branch: &mut Branch, q: &SqlQuery) -> Result<(), Unsupported> {
        let gold: Vec<usize> = q.from_tables().collect();
        for joins in 0..gold.len() {
            let compiled = compile(&branch.query(), self.schema, &self.config)
                .map_err(|e| Unsupported(format!("does not compile back: {e}")))?;
            let have: Vec<usize> = compiled.from_tables().collect();
            let Some(&missing) = gold.iter().find(|t| !have.contains(t)) else {
                return Ok(());
            };
            let star = Column::plain(ColumnRef::star(missing));
            let cond = Condition::new(None, Operand::Placeholder, CondOp::Join, Operand::Column(star));
            branch.conds.insert(joins, cond);
            if let Some(next) = branch.conds.get_mut(joins + 1) {
                if next.conjunct.is_none() {
                    next.conjunct = Some(Conjunct::And);
                }
            }
        }
        Ok(())
    }

    fn same_column(&self, a: &Column, b: &Column) -> bool {
        a.agg == b.agg && a.distinct == b.distinct && self.same_key(a.col, b.col)
    }

    /// Same column up to foreign-key equivalence.
    fn same_key(&self, a: ColumnRef, b: ColumnRef) -> bool {
        let id = |c: ColumnRef| self.kmap.map(self.schema.global_id(c));
        a == b || (!a.is_star() && !b.is_star() && id(a) == id(b))
    }

    fn compiles_to(&self, natsql: &NatSqlQuery, gold: &SqlQuery) -> Option<bool> {
        let sql = compile(natsql, self.schema, &self.config).ok()?;
        Some(exact_match(&sql, gold, self.schema, true).0)
    }

    fn set_operation(&mut self, q: &SqlQuery, kind: SetOpKind, rhs: &SqlQuery) -> Result<NatSqlQuery, Unsupported> {
        if rhs.set_op.is_some() {
            return unsupported("more than one set operation");
        }
        let mut lhs_q = q.clone();
        lhs_q.set_op = None;
        if lhs_q.order_by.is_some() {
            return unsupported("ORDER BY on the left branch of a set operation");
        }
        let lhs = self.branch(&lhs_q)?;
        let rb = self.branch(rhs)?;
        let explicit = Some(match kind {
            SetOpKind::Intersect => Conjunct::Intersect,
            SetOpKind::Union => Conjunct::Union,
            SetOpKind::Except => Conjunct::Except,
        });
        let assemble = |rest: Vec<Condition>| NatSqlQuery {
            select: lhs.select.clone(),
            conditions: lhs.conds.iter().cloned().chain(rest).collect(),
            group_by: lhs.group.clone(),
            order_by: rb.order.clone(),
        };

        let same_select = lhs.select.len() == rb.select.len()
            && lhs.select.iter().zip(&rb.select).all(|(a, b)| self.same_column(a, b));
        let mut candidates = Vec::new();
        let mut has_succinct = false;
        if same_select {
            if !rb.conds.is_empty() && !lhs.conds.is_empty() {
                let succinct = match kind {
                    SetOpKind::Intersect => Some(first_with(rb.conds.clone(), Some(Conjunct::And))),
                    SetOpKind::Union => Some(first_with(rb.conds.clone(), Some(Conjunct::Or))),
                    SetOpKind::Except => rb.conds[0].op.negated().map(|neg| {
                        let mut c = first_with(rb.conds.clone(), Some(Conjunct::And));
                        c[0].op = neg;
                        c
                    }),
                };
                has_succinct = succinct.is_some();
                candidates.extend(succinct.map(assemble));
            }
            let mut rest = rb.conds.clone();
            if let Some(first) = rest.first_mut() {
                if first.op == CondOp::Join {
                    first.op = CondOp::Is;
                }
            }
            if !rest.is_empty() {
                candidates.push(assemble(first_with(rest, explicit)));
            }
        }
        if let ([l], [r]) = (lhs.select.as_slice(), rb.select.as_slice()) {
            // `except t.*`: the right branch selects the column that links
            // the left SELECT column to table t.
            if !l.is_aggregated() && !r.is_aggregated() && l.col.table != r.col.table {
                let star = Column::plain(ColumnRef::star(r.col.table));
                let mut rest = vec![Condition::new(
                    explicit,
                    Operand::Placeholder,
                    CondOp::Is,
                    Operand::Column(star),
                )];
                rest.extend(
                    first_with(rb.conds.clone(), Some(Conjunct::And))
                        .into_iter()
                        .filter(|c| !(c.op == CondOp::Join && c.right_table_star() == Some(r.col.table))),
                );
                candidates.push(assemble(rest));
            }
        }
        if candidates.is_empty() {
            return unsupported("set-operation branches cannot be merged");
        }
        let gold = q;
        // OR says the same thing as UNION up to duplicate rows, so it is kept
        // even when it compiles to OR rather than UNION. AND only stands for
        // INTERSECT or EXCEPT when the compiler splits it back the same way.
        if kind == SetOpKind::Union && has_succinct && self.compiles_to(&candidates[0], gold).is_some() {
            return Ok(candidates.swap_remove(0));
        }
        if let Some(hit) = candidates.iter().find(|c| self.compiles_to(c, gold) == Some(true)) {
            return Ok(hit.clone());
        }
        match candidates.iter().find(|c| self.compiles_to(c, gold).is_some()) {
            Some(c) => {
                self.flags
                    .push(format!("{} not reproduced exactly", kind.keyword().to_lowercase()));
                Ok(c.clone())
            }
            None => unsupported("set-operation merge does not compile"),
        }
    }

    fn convert(&mut self, q: &SqlQuery) -> Result<NatSqlQuery, Unsupported> {
        let natsql = match &q.set_op {
            None => self.branch(q)?.query(),
            Some((kind, rhs)) => self.set_operation(q, *kind, rhs)?,
        };
        self.check_group_keys(&natsql, q);
        Ok(natsql)
    }

    /// Flag gold GROUP BY keys the compiled query does not group by.
    fn check_group_keys(&mut self, natsql: &NatSqlQuery, gold: &SqlQuery) {
        let Ok(compiled) = compile(natsql, self.schema, &self.config) else {
            return;
        };
        let mut g = Some(gold);
        let mut c = Some(&compiled);
        let mut dropped = Vec::new();
        while let (Some(gq), Some(cq)) = (g, c) {
            for key in &gq.group_by {
                let kept = cq.group_by.iter().any(|k| self.same_key(k.col, key.col));
                if !kept {
                    dropped.push(self.schema.column(key.col).name.to_lowercase());
                }
            }
            g = gq.set_op.as_ref().map(|(_, r)| r.as_ref());
            c = cq.set_op.as_ref().map(|(_, r)| r.as_ref());
        }
        if !dropped.is_empty() {
            self.flags.push(format!("groupby key dropped: {}", dropped.join(", ")));
        }
    }
}

/// Convert a gold SQL query into NatSQL.
pub fn sql_to_natsql(query: &SqlQuery, schema: &DatabaseSchema, dialect: Dialect) -> Conversion {
    let mut conv = Converter::new(schema, dialect);
    match conv.convert(query) {
        Ok(natsql) => {
            let status = if conv.flags.is_empty() {
                ConversionStatus::Converted
            } else {
                ConversionStatus::Lossy
            };
            Conversion {
                natsql: Some(natsql),
                report: ConversionReport {
                    status,
                    flags: conv.flags,
                },
            }
        }
        Err(Unsupported(reason)) => Conversion::unsupported(reason),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundtripVerdict {
    Exact,
    ExecutionEqual,
    Lossy,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripResult {
    pub verdict: RoundtripVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub natsql: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sql: Option<String>,
    pub report: ConversionReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Convert the gold SQL of `example`, compile it back and compare: exact
/// match first, then execution on `database` when given.
pub fn roundtrip_check(
    example: &Example,
    schema: &DatabaseSchema,
    dialect: Dialect,
    database: Option<&Path>,
) -> RoundtripResult {
    let fail = |verdict, report, detail: String| RoundtripResult {
        verdict,
        natsql: None,
        sql: None,
        report,
        detail: Some(detail),
    };
    let unsupported_report = |why: &str| ConversionReport {
        status: ConversionStatus::Unsupported,
        flags: vec![why.to_string()],
    };
    let gold = match example.gold_sql(schema) {
        Ok(g) => g,
        Err(e) => {
            let why = format!("gold SQL: {e}");
            return fail(RoundtripVerdict::Unsupported, unsupported_report(&why), why);
        }
    };
    let conv = sql_to_natsql(&gold, schema, dialect);
    let Some(natsql) = conv.natsql else {
        let why = conv.report.flags.join("; ");
        return fail(RoundtripVerdict::Unsupported, conv.report, why);
    };
    let text = print_natsql(&natsql, schema);
    let compiled = match compile(&natsql, schema, &CompileConfig::with_dialect(dialect)) {
        Ok(c) => c,
        Err(e) => {
            let mut r = fail(RoundtripVerdict::Lossy, conv.report, format!("compile: {e}"));
            r.natsql = Some(text);
            return r;
        }
    };
    let sql = render_sql(&compiled, schema);
    let mut result = RoundtripResult {
        verdict: RoundtripVerdict::Lossy,
        natsql: Some(text),
        sql: Some(sql.clone()),
        report: conv.report,
        detail: None,
    };
    if exact_match(&compiled, &gold, schema, true).0 {
        result.verdict = RoundtripVerdict::Exact;
        return result;
    }
    if let Some(db) = database {
        let ordered = crate::evaluator::order_sensitive(&gold);
        let outcome = execution_match(&sql, &example.query, db, ordered);
        if outcome.is_match() {
            result.verdict = RoundtripVerdict::ExecutionEqual;
        } else {
            result.detail = outcome.reason();
        }
    }
    result
}
