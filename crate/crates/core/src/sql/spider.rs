//! Loader for Spider's parsed-SQL JSON (the `sql` field of dataset entries).

use serde_json::Value as Json;

use super::ast::*;
use super::SqlError;
use crate::natsql::AggFun;
use crate::schema::{ColumnRef, DatabaseSchema};

/// Spider's aggregate table: none, max, min, count, sum, avg.
const AGG: [Option<AggFun>; 6] = [
    None,
    Some(AggFun::Max),
    Some(AggFun::Min),
    Some(AggFun::Count),
    Some(AggFun::Sum),
    Some(AggFun::Avg),
];

/// Spider's unit-op table: none, -, +, *, /.
const UNIT: [Option<ArithOp>; 5] = [
    None,
    Some(ArithOp::Minus),
    Some(ArithOp::Plus),
    Some(ArithOp::Times),
    Some(ArithOp::Divide),
];

fn bad(what: &str, v: &Json) -> SqlError {
    SqlError::Malformed(format!("{what}: {v}"))
}

fn array<'j>(v: &'j Json, what: &str) -> Result<&'j Vec<Json>, SqlError> {
    v.as_array().ok_or_else(|| bad(what, v))
}

fn index(v: &Json, what: &str) -> Result<usize, SqlError> {
    v.as_u64().map(|n| n as usize).ok_or_else(|| bad(what, v))
}

struct Loader<'s> {
    schema: &'s DatabaseSchema,
}

impl Loader<'_> {
    fn column(&self, v: &Json, star_table: usize) -> Result<ColumnRef, SqlError> {
        let id = index(v, "column id")?;
        match self.schema.global_column(id) {
            Some(Some(c)) => Ok(c),
            Some(None) => Ok(ColumnRef::star(star_table)),
            None => Err(SqlError::Malformed(format!("column id {id} out of range"))),
        }
    }

    fn col_unit(&self, v: &Json, star: usize) -> Result<ColUnit, SqlError> {
        let a = array(v, "col_unit")?;
        if a.len() != 3 {
            return Err(bad("col_unit", v));
        }
        let agg = *AGG.get(index(&a[0], "agg id")?).ok_or_else(|| bad("agg id", &a[0]))?;
        Ok(ColUnit {
            agg,
            col: self.column(&a[1], star)?,
            distinct: a[2].as_bool().unwrap_or(false),
        })
    }

    fn val_unit(&self, v: &Json, star: usize) -> Result<ValUnit, SqlError> {
        let a = array(v, "val_unit")?;
        if a.len() != 3 {
            return Err(bad("val_unit", v));
        }
        let op = *UNIT
            .get(index(&a[0], "unit op")?)
            .ok_or_else(|| bad("unit op", &a[0]))?;
        let left = self.col_unit(&a[1], star)?;
        let arith = match op {
            None => None,
            Some(op) => Some((op, self.col_unit(&a[2], star)?)),
        };
        Ok(ValUnit { left, arith })
    }

    fn value(&self, v: &Json, star: usize) -> Result<Value, SqlError> {
        Ok(match v {
            Json::Number(n) => Value::Number(n.as_f64().ok_or_else(|| bad("number", v))?),
            Json::String(s) => {
                let t = s.trim();
                let unquoted = t
                    .strip_prefix('"')
                    .and_then(|r| r.strip_suffix('"'))
                    .or_else(|| t.strip_prefix('\'').and_then(|r| r.strip_suffix('\'')));
                match unquoted {
                    Some(u) => Value::String(u.to_string()),
                    None => match t.parse::<f64>() {
                        Ok(n) => Value::Number(n),
                        Err(_) => Value::String(t.to_string()),
                    },
                }
            }
            Json::Array(_) => Value::Column(self.col_unit(v, star)?),
            Json::Object(_) => Value::Subquery(Box::new(self.query(v)?)),
            _ => return Err(bad("value", v)),
        })
    }

    fn conds(&self, v: &Json, star: usize) -> Result<Vec<Cond>, SqlError> {
        let mut out = Vec::new();
        let mut link = Connector::And;
        for item in array(v, "condition list")? {
            match item {
                Json::String(s) if s.eq_ignore_ascii_case("and") => link = Connector::And,
                Json::String(s) if s.eq_ignore_ascii_case("or") => link = Connector::Or,
                Json::Array(a) if a.len() == 5 => {
                    let op_id = index(&a[1], "operator id")?;
                    let op = SqlOp::SPIDER
                        .get(op_id)
                        .copied()
                        .flatten()
                        .ok_or_else(|| bad("operator id", &a[1]))?;
                    let right2 = match (&a[4], op) {
                        (Json::Null, _) => None,
                        (v, SqlOp::Between) => Some(self.value(v, star)?),
                        _ => None,
                    };
                    let pred = Predicate {
                        not: a[0].as_bool().unwrap_or(false),
                        op,
                        left: self.val_unit(&a[2], star)?,
                        right: self.value(&a[3], star)?,
                        right2,
                    };
                    out.push(Cond { link, pred });
                    link = Connector::And;
                }
                other => return Err(bad("condition", other)),
            }
        }
        Ok(out)
    }

    fn query(&self, v: &Json) -> Result<SqlQuery, SqlError> {
        let field = |k: &str| v.get(k).ok_or_else(|| SqlError::Malformed(format!("missing `{k}`")));
        let mut q = SqlQuery::default();

        let from = field("from")?;
        let units = from.get("table_units").ok_or_else(|| bad("from", from))?;
        for unit in array(units, "table_units")? {
            let pair = array(unit, "table_unit")?;
            match (pair.first().and_then(Json::as_str), pair.get(1)) {
                (Some("table_unit"), Some(t)) => {
                    let t = index(t, "table id")?;
                    if t >= self.schema.tables().len() {
                        return Err(SqlError::Malformed(format!("table id {t} out of range")));
                    }
                    q.from.push(FromItem::Table(t));
                }
                (Some("sql"), Some(sub)) => q.from.push(FromItem::Subquery(Box::new(self.query(sub)?))),
                _ => return Err(bad("table_unit", unit)),
            }
        }
        let star = q.from_tables().next().unwrap_or(0);

        if let Some(conds) = from.get("conds") {
            for c in self.conds(conds, star)? {
                let p = c.pred;
                match (p.op, p.left.arith, &p.right, p.not) {
                    (SqlOp::Eq, None, Value::Column(r), false) if p.left.left.agg.is_none() => q.joins.push(JoinCond {
                        left: p.left.left.col,
                        right: r.col,
                    }),
                    _ => return Err(SqlError::Unsupported("non-equality join condition".into())),
                }
            }
        }

        let select = array(field("select")?, "select")?;
        q.distinct = select.first().and_then(Json::as_bool).unwrap_or(false);
        for item in array(select.get(1).ok_or_else(|| bad("select", v))?, "select items")? {
            let pair = array(item, "select item")?;
            if pair.len() != 2 {
                return Err(bad("select item", item));
            }
            let agg = *AGG
                .get(index(&pair[0], "agg id")?)
                .ok_or_else(|| bad("agg id", &pair[0]))?;
            q.select.push(SelectItem {
                agg,
                value: self.val_unit(&pair[1], star)?,
            });
        }

        if let Some(w) = v.get("where") {
            q.where_ = self.conds(w, star)?;
        }
        if let Some(g) = v.get("groupBy") {
            for u in array(g, "groupBy")? {
                q.group_by.push(self.col_unit(u, star)?);
            }
        }
        if let Some(h) = v.get("having") {
            q.having = self.conds(h, star)?;
        }
        if let Some(o) = v.get("orderBy") {
            let o = array(o, "orderBy")?;
            if o.len() == 2 {
                let direction = match o[0].as_str() {
                    Some(d) if d.eq_ignore_ascii_case("desc") => OrderDir::Desc,
                    _ => OrderDir::Asc,
                };
                let keys = array(&o[1], "order keys")?
                    .iter()
                    .map(|k| self.val_unit(k, star))
                    .collect::<Result<_, _>>()?;
                q.order_by = Some(SqlOrder { direction, keys });
            }
        }
        q.limit = match v.get("limit") {
            None | Some(Json::Null) => None,
            Some(l) => Some(l.as_f64().ok_or_else(|| bad("limit", l))? as u64),
        };
        for (key, kind) in [
            ("intersect", SetOpKind::Intersect),
            ("union", SetOpKind::Union),
            ("except", SetOpKind::Except),
        ] {
            if let Some(sub) = v.get(key).filter(|s| !s.is_null()) {
                q.set_op = Some((kind, Box::new(self.query(sub)?)));
                break;
            }
        }
        Ok(q)
    }
}

/// Build a query from Spider's parsed-SQL JSON. String values lose their
/// surrounding quotes; the global `*` becomes the star of the first FROM
/// table.
pub fn load_spider_sql(value: &Json, schema: &DatabaseSchema) -> Result<SqlQuery, SqlError> {
    Loader { schema }.query(value)
}
