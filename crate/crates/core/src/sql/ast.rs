use serde::{Deserialize, Serialize};

use crate::natsql::AggFun;
use crate::schema::ColumnRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColUnit {
    pub agg: Option<AggFun>,
    pub col: ColumnRef,
    pub distinct: bool,
}

impl ColUnit {
    pub fn plain(col: ColumnRef) -> Self {
        Self {
            agg: None,
            col,
            distinct: false,
        }
    }

    pub fn agg(agg: AggFun, col: ColumnRef) -> Self {
        Self {
            agg: Some(agg),
            col,
            distinct: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithOp {
    Minus,
    Plus,
    Times,
    Divide,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Minus => "-",
            ArithOp::Plus => "+",
            ArithOp::Times => "*",
            ArithOp::Divide => "/",
        }
    }
}

/// A column unit, optionally combined arithmetically with a second one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValUnit {
    pub left: ColUnit,
    pub arith: Option<(ArithOp, ColUnit)>,
}

impl ValUnit {
    pub fn col(unit: ColUnit) -> Self {
        Self {
            left: unit,
            arith: None,
        }
    }

    pub fn units(&self) -> impl Iterator<Item = &ColUnit> {
        std::iter::once(&self.left).chain(self.arith.as_ref().map(|(_, u)| u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectItem {
    pub agg: Option<AggFun>,
    pub value: ValUnit,
}

impl SelectItem {
    pub fn plain(col: ColumnRef) -> Self {
        Self {
            agg: None,
            value: ValUnit::col(ColUnit::plain(col)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FromItem {
    Table(usize),
    Subquery(Box<SqlQuery>),
}

/// Equi-join condition `left = right` from a JOIN ... ON clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JoinCond {
    pub left: ColumnRef,
    pub right: ColumnRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SqlOp {
    Between,
    Eq,
    Gt,
    Lt,
    Ge,
    Le,
    Ne,
    In,
    Like,
    Is,
    Exists,
}

impl SqlOp {
    /// Spider's operator table, index 0 being the `not` marker.
    pub const SPIDER: [Option<SqlOp>; 12] = [
        None,
        Some(SqlOp::Between),
        Some(SqlOp::Eq),
        Some(SqlOp::Gt),
        Some(SqlOp::Lt),
        Some(SqlOp::Ge),
        Some(SqlOp::Le),
        Some(SqlOp::Ne),
        Some(SqlOp::In),
        Some(SqlOp::Like),
        Some(SqlOp::Is),
        Some(SqlOp::Exists),
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            SqlOp::Between => "BETWEEN",
            SqlOp::Eq => "=",
            SqlOp::Gt => ">",
            SqlOp::Lt => "<",
            SqlOp::Ge => ">=",
            SqlOp::Le => "<=",
            SqlOp::Ne => "!=",
            SqlOp::In => "IN",
            SqlOp::Like => "LIKE",
            SqlOp::Is => "IS",
            SqlOp::Exists => "EXISTS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Number(f64),
    String(String),
    Column(ColUnit),
    Subquery(Box<SqlQuery>),
    /// Unfilled literal.
    Slot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub not: bool,
    pub op: SqlOp,
    pub left: ValUnit,
    pub right: Value,
    pub right2: Option<Value>,
}

impl Predicate {
    pub fn new(left: ValUnit, op: SqlOp, right: Value) -> Self {
        Self {
            not: false,
            op,
            left,
            right,
            right2: None,
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &Value> {
        std::iter::once(&self.right).chain(self.right2.as_ref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connector {
    And,
    Or,
}

impl Connector {
    pub fn keyword(self) -> &'static str {
        match self {
            Connector::And => "AND",
            Connector::Or => "OR",
        }
    }
}

/// One entry of a flat WHERE/HAVING list. `link` joins it to the previous
/// entry and is ignored on the first; AND binds tighter than OR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cond {
    pub link: Connector,
    pub pred: Predicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderDir {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqlOrder {
    pub direction: OrderDir,
    pub keys: Vec<ValUnit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SetOpKind {
    Intersect,
    Union,
    Except,
}

impl SetOpKind {
    pub fn keyword(self) -> &'static str {
        match self {
            SetOpKind::Intersect => "INTERSECT",
            SetOpKind::Union => "UNION",
            SetOpKind::Except => "EXCEPT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SqlQuery {
    pub distinct: bool,
    pub select: Vec<SelectItem>,
    pub from: Vec<FromItem>,
    pub joins: Vec<JoinCond>,
    pub where_: Vec<Cond>,
    pub group_by: Vec<ColUnit>,
    pub having: Vec<Cond>,
    pub order_by: Option<SqlOrder>,
    pub limit: Option<u64>,
    pub set_op: Option<(SetOpKind, Box<SqlQuery>)>,
}

impl SqlQuery {
    /// Schema tables named directly in FROM, in order.
    pub fn from_tables(&self) -> impl Iterator<Item = usize> + '_ {
        self.from.iter().filter_map(|f| match f {
            FromItem::Table(t) => Some(*t),
            FromItem::Subquery(_) => None,
        })
    }

    /// Nested queries in WHERE/HAVING operands and FROM.
    pub fn subqueries(&self) -> impl Iterator<Item = &SqlQuery> {
        let in_conds = self
            .where_
            .iter()
            .chain(&self.having)
            .flat_map(|c| c.pred.values())
            .filter_map(|v| match v {
                Value::Subquery(q) => Some(q.as_ref()),
                _ => None,
            });
        let in_from = self.from.iter().filter_map(|f| match f {
            FromItem::Subquery(q) => Some(q.as_ref()),
            FromItem::Table(_) => None,
        });
        in_conds.chain(in_from)
    }
}
