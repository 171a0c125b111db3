use serde::Serialize;

use crate::natsql::{Column, CondOp, Condition, Conjunct, NatSqlQuery, Operand};
use crate::sql::{Connector, SetOpKind};

/// Which planning rule placed a condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    /// Explicit except/intersect/union conjunct.
    SetConjunct,
    /// OR whose following conditions bind with AND.
    OrBeforeAnd,
    /// OR between a plain and an aggregated condition.
    OrMixesAggregation,
    /// AND between aggregated conditions on different tables.
    AndAcrossAggregateTables,
    /// AND between two conditions on one column that cannot both hold.
    AndUnsatisfiable,
    /// Joined to the current segment.
    Concatenate,
    /// First condition of the query.
    Start,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannedCondition {
    pub index: usize,
    /// Connective to the previous condition in the segment; `Sub` attaches
    /// the condition to a subquery instead.
    pub link: Link,
    /// The operator was flipped back to its positive form for an EXCEPT
    /// branch.
    pub negated: bool,
    pub rule: Rule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Link {
    And,
    Or,
    Sub,
}

impl Link {
    pub fn connector(self) -> Connector {
        match self {
            Link::Or => Connector::Or,
            Link::And | Link::Sub => Connector::And,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    /// How this segment joins the previous one; `None` for the first.
    pub kind: Option<SetOpKind>,
    pub conditions: Vec<PlannedCondition>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentPlan {
    pub segments: Vec<Segment>,
}

impl SegmentPlan {
    pub fn kinds(&self) -> Vec<Option<SetOpKind>> {
        self.segments.iter().map(|s| s.kind).collect()
    }

    /// Segment holding condition `index`.
    pub fn segment_of(&self, index: usize) -> Option<usize> {
        self.segments
            .iter()
            .position(|s| s.conditions.iter().any(|c| c.index == index))
    }
}

fn left_column(c: &Condition) -> Option<&Column> {
    c.left.as_column()
}

fn number(o: &Operand) -> Option<f64> {
    match o {
        Operand::Number(n) => Some(*n),
        _ => None,
    }
}

fn literal_eq(a: &Operand, b: &Operand) -> Option<bool> {
    match (a, b) {
        (Operand::Number(x), Operand::Number(y)) => Some(x == y),
        (Operand::String(x), Operand::String(y)) => Some(x == y),
        (Operand::Number(_), Operand::String(_)) | (Operand::String(_), Operand::Number(_)) => Some(false),
        _ => None,
    }
}

/// `x < a` style upper bound: (bound, inclusive).
fn upper(c: &Condition) -> Option<(f64, bool)> {
    match c.op {
        CondOp::Lt => Some((number(&c.right)?, false)),
        CondOp::Le => Some((number(&c.right)?, true)),
        _ => None,
    }
}

fn lower(c: &Condition) -> Option<(f64, bool)> {
    match c.op {
        CondOp::Gt => Some((number(&c.right)?, false)),
        CondOp::Ge => Some((number(&c.right)?, true)),
        _ => None,
    }
}

fn disjoint_range(up: (f64, bool), low: (f64, bool)) -> bool {
    if up.1 && low.1 {
        up.0 < low.0
    } else {
        up.0 <= low.0
    }
}

/// Syntactic check that `a AND b` cannot hold for one row when both
/// constrain the same column with literal operands.
pub fn unsatisfiable(a: &Condition, b: &Condition) -> bool {
    if left_column(a).is_none() || left_column(a) != left_column(b) {
        return false;
    }
    if let (Some(up), Some(low)) = (upper(a), lower(b)) {
        return disjoint_range(up, low);
    }
    if let (Some(low), Some(up)) = (lower(a), upper(b)) {
        return disjoint_range(up, low);
    }
    let pair = |x: CondOp, y: CondOp| (a.op == x && b.op == y) || (a.op == y && b.op == x);
    let Some(same) = literal_eq(&a.right, &b.right) else {
        return false;
    };
    if a.op == CondOp::Eq && b.op == CondOp::Eq {
        return !same;
    }
    pair(CondOp::Eq, CondOp::Ne) || pair(CondOp::Like, CondOp::NotLike)
}

fn set_kind(c: Conjunct) -> Option<SetOpKind> {
    match c {
        Conjunct::Except => Some(SetOpKind::Except),
        Conjunct::Intersect => Some(SetOpKind::Intersect),
        Conjunct::Union => Some(SetOpKind::Union),
        _ => None,
    }
}

/// Split the conditions of `query` into set-operation segments. Operands
/// should already be resolved so that `@` conditions compare by column.
pub fn plan_segments(query: &NatSqlQuery) -> SegmentPlan {
    let conds = &query.conditions;
    let mut segments = vec![Segment {
        kind: None,
        conditions: Vec::new(),
    }];

    for (i, cond) in conds.iter().enumerate() {
        let current = segments.last().expect("at least one segment");
        let members: Vec<&Condition> = current
            .conditions
            .iter()
            .filter(|p| p.link != Link::Sub)
            .map(|p| &conds[p.index])
            .collect();
        let conjunct = cond.conjunct;
        let mut open = |kind: SetOpKind, rule: Rule, negated: bool| {
            segments.push(Segment {
                kind: Some(kind),
                conditions: vec![PlannedCondition {
                    index: i,
                    link: Link::And,
                    negated,
                    rule,
                }],
            });
        };

        if let Some(kind) = conjunct.and_then(set_kind) {
            open(kind, Rule::SetConjunct, false);
            continue;
        }
        match conjunct {
            Some(Conjunct::Or) => {
                let and_follows = conds[i + 1..]
                    .iter()
                    .take_while(|c| !c.conjunct.is_some_and(Conjunct::is_set_op))
                    .any(|c| c.conjunct == Some(Conjunct::And));
                if and_follows {
                    open(SetOpKind::Union, Rule::OrBeforeAnd, false);
                    continue;
                }
                if let Some(prev) = members.last() {
                    if prev.is_aggregated() != cond.is_aggregated() {
                        open(SetOpKind::Union, Rule::OrMixesAggregation, false);
                        continue;
                    }
                }
            }
            Some(Conjunct::And) => {
                if cond.is_aggregated() {
                    let prev_agg = members.iter().rev().find(|c| c.is_aggregated());
                    if let (Some(prev), Some(this)) = (prev_agg.and_then(|c| left_column(c)), left_column(cond)) {
                        if prev.col.table != this.col.table {
                            open(SetOpKind::Intersect, Rule::AndAcrossAggregateTables, false);
                            continue;
                        }
                    }
                }
                if members.iter().any(|prev| unsatisfiable(prev, cond)) {
                    if cond.op.is_negative() {
                        open(SetOpKind::Except, Rule::AndUnsatisfiable, true);
                    } else {
                        open(SetOpKind::Intersect, Rule::AndUnsatisfiable, false);
                    }
                    continue;
                }
            }
            _ => {}
        }
        let link = match conjunct {
            Some(Conjunct::Or) => Link::Or,
            Some(Conjunct::Sub) => Link::Sub,
            _ => Link::And,
        };
        let rule = if i == 0 { Rule::Start } else { Rule::Concatenate };
        segments
            .last_mut()
            .expect("at least one segment")
            .conditions
            .push(PlannedCondition {
                index: i,
                link,
                negated: false,
                rule,
            });
    }
    SegmentPlan { segments }
}
