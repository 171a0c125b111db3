//! Value-stripped, foreign-key-canonicalized query form used by exact match.
//! Equality here is exactly Spider's structural comparison after its
//! `rebuild_sql_val` / `rebuild_sql_col` passes.

use std::collections::BTreeMap;

use crate::natsql::AggFun;
use crate::schema::{ColumnRef, DatabaseSchema};
use crate::sql::{ColUnit, Cond, Connector, FromItem, OrderDir, SetOpKind, SqlQuery, ValUnit, Value};

/// Spider's AGG_OPS position.
pub(crate) fn agg_code(a: Option<AggFun>) -> u8 {
    match a {
        None => 0,
        Some(AggFun::Max) => 1,
        Some(AggFun::Min) => 2,
        Some(AggFun::Count) => 3,
        Some(AggFun::Sum) => 4,
        Some(AggFun::Avg) => 5,
    }
}

/// Maps every column in a foreign-key cluster to the cluster's smallest
/// global id.
#[derive(Debug, Clone)]
pub struct KeyMap {
    rep: BTreeMap<usize, usize>,
}

impl KeyMap {
    pub fn new(schema: &DatabaseSchema) -> Self {
        let ids: Vec<(usize, usize)> = schema
            .foreign_keys()
            .iter()
            .map(|fk| (schema.global_id(fk.child), schema.global_id(fk.parent)))
            .collect();
        let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
        fn find(parent: &mut BTreeMap<usize, usize>, x: usize) -> usize {
            let p = *parent.entry(x).or_insert(x);
            if p == x {
                return x;
            }
            let root = find(parent, p);
            parent.insert(x, root);
            root
        }
        for (a, b) in ids {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            parent.insert(hi, lo);
        }
        let keys: Vec<usize> = parent.keys().copied().collect();
        let rep = keys.into_iter().map(|k| (k, find(&mut parent, k))).collect();
        Self { rep }
    }

    /// Identity map, for strict comparisons.
    pub fn identity() -> Self {
        Self { rep: BTreeMap::new() }
    }

    pub fn map(&self, id: usize) -> usize {
        self.rep.get(&id).copied().unwrap_or(id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CColUnit {
    pub agg: u8,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CValUnit {
    pub arith: u8,
    pub left: CColUnit,
    pub right: Option<CColUnit>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CCond {
    pub not: bool,
    pub op: u8,
    pub left: CValUnit,
    /// Literals and column operands are stripped; only subqueries survive.
    pub v1: Option<Box<CQuery>>,
    pub v2: Option<Box<CQuery>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CTableUnit {
    Table(usize),
    Sql(Box<CQuery>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CQuery {
    pub select: Vec<(u8, CValUnit)>,
    pub from: Vec<CTableUnit>,
    pub from_conds: Vec<(CColUnit, CColUnit)>,
    pub where_: Vec<CCond>,
    pub where_links: Vec<bool>,
    pub group_by: Vec<CColUnit>,
    pub having: Vec<CCond>,
    pub having_links: Vec<bool>,
    pub order_by: Option<(bool, Vec<CValUnit>)>,
    pub limit: Option<u64>,
    pub intersect: Option<Box<CQuery>>,
    pub union: Option<Box<CQuery>>,
    pub except: Option<Box<CQuery>>,
}

impl CQuery {
    /// What a prediction that failed to parse is scored as.
    pub fn empty() -> Self {
        Self {
            select: Vec::new(),
            from: Vec::new(),
            from_conds: Vec::new(),
            where_: Vec::new(),
            where_links: Vec::new(),
            group_by: Vec::new(),
            having: Vec::new(),
            having_links: Vec::new(),
            order_by: None,
            limit: None,
            intersect: None,
            union: None,
            except: None,
        }
    }

    pub fn set_ops(&self) -> [Option<&CQuery>; 3] {
        [self.intersect.as_deref(), self.union.as_deref(), self.except.as_deref()]
    }

    pub fn has_or(&self) -> bool {
        self.where_links.iter().chain(&self.having_links).any(|&or| or)
    }
}

pub struct Canonicalizer<'a> {
    pub schema: &'a DatabaseSchema,
    pub kmap: &'a KeyMap,
    /// Sort FROM items and join conditions so join order does not matter.
    pub normalize_join_order: bool,
}

impl Canonicalizer<'_> {
    fn col(&self, c: ColumnRef) -> usize {
        self.kmap.map(self.schema.global_id(c))
    }

    fn col_unit(&self, u: &ColUnit) -> CColUnit {
        CColUnit {
            agg: agg_code(u.agg),
            col: self.col(u.col),
        }
    }

    fn val_unit(&self, v: &ValUnit) -> CValUnit {
        let (arith, right) = match &v.arith {
            None => (0, None),
            Some((op, u)) => (*op as u8 + 1, Some(self.col_unit(u))),
        };
        CValUnit {
            arith,
            left: self.col_unit(&v.left),
            right,
        }
    }

    fn value(&self, v: Option<&Value>) -> Option<Box<CQuery>> {
        match v {
            Some(Value::Subquery(q)) => Some(Box::new(self.query(q))),
            _ => None,
        }
    }

    fn conds(&self, conds: &[Cond]) -> (Vec<CCond>, Vec<bool>) {
        let units = conds
            .iter()
            .map(|c| CCond {
                not: c.pred.not,
                op: spider_op(c.pred.op),
                left: self.val_unit(&c.pred.left),
                v1: self.value(Some(&c.pred.right)),
                v2: self.value(c.pred.right2.as_ref()),
            })
            .collect();
        let links = conds.iter().skip(1).map(|c| c.link == Connector::Or).collect();
        (units, links)
    }

    pub fn query(&self, q: &SqlQuery) -> CQuery {
        let select = q
            .select
            .iter()
            .map(|s| (agg_code(s.agg), self.val_unit(&s.value)))
            .collect();
        let mut from: Vec<CTableUnit> = q
            .from
            .iter()
            .map(|f| match f {
                FromItem::Table(t) => CTableUnit::Table(*t),
                FromItem::Subquery(s) => CTableUnit::Sql(Box::new(self.query(s))),
            })
            .collect();
        let mut from_conds: Vec<(CColUnit, CColUnit)> = q
            .joins
            .iter()
            .map(|j| {
                let a = CColUnit {
                    agg: 0,
                    col: self.col(j.left),
                };
                let b = CColUnit {
                    agg: 0,
                    col: self.col(j.right),
                };
                (a, b)
            })
            .collect();
        if self.normalize_join_order {
            from.sort();
            for pair in &mut from_conds {
                if pair.1 < pair.0 {
                    std::mem::swap(&mut pair.0, &mut pair.1);
                }
            }
            from_conds.sort();
        }
        let (where_, where_links) = self.conds(&q.where_);
        let (having, having_links) = self.conds(&q.having);
        let mut out = CQuery {
            select,
            from,
            from_conds,
            where_,
            where_links,
            group_by: q.group_by.iter().map(|u| self.col_unit(u)).collect(),
            having,
            having_links,
            order_by: q.order_by.as_ref().map(|o| {
                (
                    o.direction == OrderDir::Desc,
                    o.keys.iter().map(|k| self.val_unit(k)).collect(),
                )
            }),
            limit: q.limit,
            intersect: None,
            union: None,
            except: None,
        };
        if let Some((kind, rhs)) = &q.set_op {
            let rhs = Some(Box::new(self.query(rhs)));
            match kind {
                SetOpKind::Intersect => out.intersect = rhs,
                SetOpKind::Union => out.union = rhs,
                SetOpKind::Except => out.except = rhs,
            }
        }
        out
    }
}

/// Position in Spider's WHERE_OPS table.
pub(crate) fn spider_op(op: crate::sql::SqlOp) -> u8 {
    crate::sql::SqlOp::SPIDER
        .iter()
        .position(|o| *o == Some(op))
        .expect("every operator has a Spider index") as u8
}
