use std::fmt;

use serde::{Deserialize, Serialize};

use crate::schema::ColumnRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFun {
    Avg,
    Count,
    Max,
    Min,
    Sum,
}

impl AggFun {
    pub const ALL: [AggFun; 5] = [AggFun::Avg, AggFun::Count, AggFun::Max, AggFun::Min, AggFun::Sum];

    pub fn as_str(self) -> &'static str {
        match self {
            AggFun::Avg => "avg",
            AggFun::Count => "count",
            AggFun::Max => "max",
            AggFun::Min => "min",
            AggFun::Sum => "sum",
        }
    }

    pub fn parse(word: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str().eq_ignore_ascii_case(word))
    }
}

impl fmt::Display for AggFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agg: Option<AggFun>,
    pub col: ColumnRef,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub distinct: bool,
}

impl Column {
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

    pub fn is_aggregated(&self) -> bool {
        self.agg.is_some()
    }

    /// A bare `table.*` used to denote a table rather than a value.
    pub fn is_table_star(&self) -> bool {
        self.agg.is_none() && self.col.is_star()
    }
}

/// One side of a condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Operand {
    /// `@`: a column to be inferred from the schema.
    Placeholder,
    Column(Column),
    Number(f64),
    String(String),
    /// An unfilled literal position, written `value`.
    ValueSlot,
}

impl Operand {
    pub fn as_column(&self) -> Option<&Column> {
        match self {
            Operand::Column(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Operand::Number(_) | Operand::String(_) | Operand::ValueSlot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conjunct {
    And,
    Or,
    Except,
    Intersect,
    Union,
    Sub,
}

impl Conjunct {
    pub const ALL: [Conjunct; 6] = [
        Conjunct::And,
        Conjunct::Or,
        Conjunct::Except,
        Conjunct::Intersect,
        Conjunct::Union,
        Conjunct::Sub,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Conjunct::And => "AND",
            Conjunct::Or => "OR",
            Conjunct::Except => "EXCEPT",
            Conjunct::Intersect => "INTERSECT",
            Conjunct::Union => "UNION",
            Conjunct::Sub => "SUB",
        }
    }

    pub fn is_set_op(self) -> bool {
        matches!(self, Conjunct::Except | Conjunct::Intersect | Conjunct::Union)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CondOp {
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
    NotIn,
    NotLike,
    NotBetween,
    IsNot,
    Join,
}

impl CondOp {
    pub const ALL: [CondOp; 16] = [
        CondOp::Between,
        CondOp::Eq,
        CondOp::Gt,
        CondOp::Lt,
        CondOp::Ge,
        CondOp::Le,
        CondOp::Ne,
        CondOp::In,
        CondOp::Like,
        CondOp::Is,
        CondOp::Exists,
        CondOp::NotIn,
        CondOp::NotLike,
        CondOp::NotBetween,
        CondOp::IsNot,
        CondOp::Join,
    ];

    pub fn token(self) -> &'static str {
        match self {
            CondOp::Between => "BETWEEN",
            CondOp::Eq => "=",
            CondOp::Gt => ">",
            CondOp::Lt => "<",
            CondOp::Ge => ">=",
            CondOp::Le => "<=",
            CondOp::Ne => "!=",
            CondOp::In => "IN",
            CondOp::Like => "LIKE",
            CondOp::Is => "IS",
            CondOp::Exists => "EXISTS",
            CondOp::NotIn => "NOT IN",
            CondOp::NotLike => "NOT LIKE",
            CondOp::NotBetween => "NOT BETWEEN",
            CondOp::IsNot => "IS NOT",
            CondOp::Join => "JOIN",
        }
    }

    pub fn takes_second_bound(self) -> bool {
        matches!(self, CondOp::Between | CondOp::NotBetween)
    }

    /// The negative counterpart of a positive operator and vice versa, where
    /// one exists.
    pub fn negated(self) -> Option<CondOp> {
        Some(match self {
            CondOp::Eq => CondOp::Ne,
            CondOp::Ne => CondOp::Eq,
            CondOp::In => CondOp::NotIn,
            CondOp::NotIn => CondOp::In,
            CondOp::Like => CondOp::NotLike,
            CondOp::NotLike => CondOp::Like,
            CondOp::Between => CondOp::NotBetween,
            CondOp::NotBetween => CondOp::Between,
            CondOp::Is => CondOp::IsNot,
            CondOp::IsNot => CondOp::Is,
            _ => return None,
        })
    }

    pub fn is_negative(self) -> bool {
        matches!(
            self,
            CondOp::Ne | CondOp::NotIn | CondOp::NotLike | CondOp::NotBetween | CondOp::IsNot
        )
    }
}

impl fmt::Display for CondOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    /// `None` only for a first condition without a leading conjunct.
    pub conjunct: Option<Conjunct>,
    pub left: Operand,
    pub op: CondOp,
    pub right: Operand,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right2: Option<Operand>,
}

impl Condition {
    pub fn new(conjunct: Option<Conjunct>, left: Operand, op: CondOp, right: Operand) -> Self {
        Self {
            conjunct,
            left,
            op,
            right,
            right2: None,
        }
    }

    /// Left side is an aggregate, so the condition belongs in HAVING.
    pub fn is_aggregated(&self) -> bool {
        matches!(&self.left, Operand::Column(c) if c.is_aggregated())
    }

    /// Right side is a bare `table.*`.
    pub fn right_table_star(&self) -> Option<usize> {
        match &self.right {
            Operand::Column(c) if c.is_table_star() => Some(c.col.table),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Asc,
    Desc,
    #[default]
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderBy {
    /// Nonempty. The grammar shows one key; comma-separated keys are accepted
    /// for Spider queries that order by several columns.
    pub keys: Vec<Column>,
    pub direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Dialect {
    #[default]
    Base,
    /// NatSQL with an explicit GROUP BY clause.
    #[serde(alias = "natsql_g")]
    NatsqlG,
}

impl std::str::FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "base" | "natsql" => Ok(Dialect::Base),
            "natsql-g" | "g" => Ok(Dialect::NatsqlG),
            other => Err(format!("unknown dialect `{other}` (expected base or natsql-g)")),
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dialect::Base => "base",
            Dialect::NatsqlG => "natsql-g",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NatSqlQuery {
    pub select: Vec<Column>,
    #[serde(default, rename = "where", skip_serializing_if = "Vec::is_empty")]
    pub conditions: Vec<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_by: Option<Vec<Column>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_by: Option<OrderBy>,
}

impl NatSqlQuery {
    pub fn new(select: Vec<Column>) -> Self {
        Self {
            select,
            conditions: Vec::new(),
            group_by: None,
            order_by: None,
        }
    }

    /// Value slots in fill order: condition order, `right` before `right2`.
    pub fn value_slots(&self) -> usize {
        self.conditions
            .iter()
            .flat_map(|c| std::iter::once(&c.right).chain(c.right2.as_ref()))
            .filter(|o| matches!(o, Operand::ValueSlot))
            .count()
    }
}
