//! NatSQL to SQL compilation.

mod build;
mod infer;
mod plan;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{Clause, Placement};
pub use infer::{infer_columns, resolve_placeholders, ResolvedQuery};
pub use plan::{plan_segments, unsatisfiable, Link, PlannedCondition, Rule, Segment, SegmentPlan};

use crate::natsql::{parse_natsql, validate, Dialect, NatSqlError, NatSqlQuery};
use crate::schema::{DatabaseSchema, SchemaError};
use crate::sql::{render_sql, SqlQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupByPolicy {
    PrimaryKeyOfSelectTable,
    #[default]
    FirstSelectColumn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileConfig {
    pub dialect: Dialect,
    /// GROUP BY key when the aggregated table is the SELECT table itself.
    pub groupby_policy: GroupByPolicy,
    pub emit_distinct: bool,
    /// Reject queries that still contain value slots.
    pub require_values: bool,
}

impl Default for CompileConfig {
    fn default() -> Self {
        Self {
            dialect: Dialect::Base,
            groupby_policy: GroupByPolicy::default(),
            emit_distinct: true,
            require_values: false,
        }
    }
}

impl CompileConfig {
    pub fn with_dialect(dialect: Dialect) -> Self {
        Self {
            dialect,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Parse(#[from] NatSqlError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("invalid query: {0}")]
    Invalid(String),
    #[error("unresolvable placeholder in condition {condition}")]
    Unresolvable { condition: usize },
    #[error("condition {condition}: SUB without a preceding subquery-forming condition")]
    SubWithoutAnchor { condition: usize },
    #[error("unfilled value slots: {}", join_slots(.slots))]
    UnfilledSlots { slots: Vec<usize> },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

fn join_slots(slots: &[usize]) -> String {
    slots.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
}

/// Everything `compile` produces, including the intermediate plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Compilation {
    pub sql: SqlQuery,
    pub resolved: ResolvedQuery,
    pub plan: SegmentPlan,
    /// One entry per input condition.
    pub placements: Vec<Placement>,
    pub diagnostics: Vec<String>,
}

/// Compile and keep the resolution, plan and per-condition placements.
pub fn compile_traced(
    query: &NatSqlQuery,
    schema: &DatabaseSchema,
    config: &CompileConfig,
) -> Result<Compilation, CompileError> {
    if let Some(d) = validate(query, schema, config.dialect).into_iter().next() {
        return Err(CompileError::Invalid(d.to_string()));
    }
    if config.require_values && query.value_slots() > 0 {
        let slots = (1..=query.value_slots()).collect();
        return Err(CompileError::UnfilledSlots { slots });
    }
    let resolved = resolve_placeholders(query, schema)?;
    let plan = plan_segments(&resolved.query);

    let mut diagnostics = Vec::new();
    let set_ops = plan.segments.len() - 1;
    if set_ops > 1 {
        diagnostics.push(format!(
            "{set_ops} set operations in one query; compiled left-associatively"
        ));
    }

    let last = plan.segments.len() - 1;
    let group = match config.dialect {
        Dialect::NatsqlG => query.group_by.as_deref(),
        Dialect::Base => None,
    };
    let mut builder = build::Builder::new(schema, config, &resolved);
    let mut parts = Vec::with_capacity(plan.segments.len());
    for (k, seg) in plan.segments.iter().enumerate() {
        let order = if k == last { query.order_by.as_ref() } else { None };
        let group = if k == 0 { group } else { None };
        parts.push(builder.segment(k, seg, order, group)?);
    }
    let mut placements = builder.placements;
    placements.sort_by_key(|p| p.condition);

    let mut sql = parts.pop().expect("at least one segment");
    for k in (0..parts.len()).rev() {
        let kind = plan.segments[k + 1].kind.expect("later segments carry a set operation");
        let mut lhs = parts.pop().expect("segment count");
        lhs.set_op = Some((kind, Box::new(sql)));
        sql = lhs;
    }
    Ok(Compilation {
        sql,
        resolved,
        plan,
        placements,
        diagnostics,
    })
}

/// Compile a NatSQL query into executable SQL.
pub fn compile(query: &NatSqlQuery, schema: &DatabaseSchema, config: &CompileConfig) -> Result<SqlQuery, CompileError> {
    compile_traced(query, schema, config).map(|c| c.sql)
}

/// Parse, compile and render in one step.
pub fn compile_to_text(natsql: &str, schema: &DatabaseSchema, config: &CompileConfig) -> Result<String, CompileError> {
    let query = parse_natsql(natsql, schema, config.dialect)?;
    let sql = compile(&query, schema, config)?;
    Ok(render_sql(&sql, schema))
}
