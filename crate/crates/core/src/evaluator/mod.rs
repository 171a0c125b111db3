//! Exact match, per-component F1 and execution match.

mod canon;
mod components;
mod exec;
mod hardness;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canon::{CQuery, Canonicalizer, KeyMap};
pub use components::{ComponentCount, ComponentSet, COMPONENTS};
pub use exec::{execution_match, results_equal, run_query, Cell, ExecOutcome, Row, FLOAT_TOLERANCE};
pub use hardness::{hardness, Hardness};

use crate::compiler::{compile, CompileConfig};
use crate::dataset::Example;
use crate::natsql::parse_natsql;
use crate::schema::DatabaseSchema;
use crate::sql::{parse_sql, render_sql, SqlQuery};
use crate::textprep::{extract_values, fill_values, ExtractOptions};

fn canonical(q: &SqlQuery, schema: &DatabaseSchema, normalize_join_order: bool) -> CQuery {
    let kmap = KeyMap::new(schema);
    Canonicalizer {
        schema,
        kmap: &kmap,
        normalize_join_order,
    }
    .query(q)
}

/// Value-stripped exact match plus the component counts behind it.
pub fn exact_match(
    pred: &SqlQuery,
    gold: &SqlQuery,
    schema: &DatabaseSchema,
    normalize_join_order: bool,
) -> (bool, ComponentSet) {
    let p = canonical(pred, schema, normalize_join_order);
    let g = canonical(gold, schema, normalize_join_order);
    components::exact(&p, &g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Micro-averaged scores from summed counts. An empty side scores 1.0
    /// when the other side is empty too and 0.0 otherwise.
    pub fn from_count(c: ComponentCount) -> Self {
        let ratio = |num: usize, den: usize, other: usize| {
            if den > 0 {
                num as f64 / den as f64
            } else if other == 0 {
                1.0
            } else {
                0.0
            }
        };
        let precision = ratio(c.hits, c.pred, c.gold);
        let recall = ratio(c.hits, c.gold, c.pred);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1 }
    }
}

/// Micro-averaged precision, recall and F1 for each reported component.
pub fn component_f1(sets: &[ComponentSet]) -> BTreeMap<String, Prf> {
    let mut totals: BTreeMap<&str, ComponentCount> = BTreeMap::new();
    for set in sets {
        for (name, count) in set.named() {
            totals.entry(name).or_default().add(count);
        }
    }
    COMPONENTS
        .iter()
        .map(|name| {
            (
                name.to_string(),
                Prf::from_count(totals.get(name).copied().unwrap_or_default()),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionKind {
    NatSql,
    Sql,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub kind: PredictionKind,
    pub text: String,
}

impl Prediction {
    pub fn natsql(text: impl Into<String>) -> Self {
        Self {
            kind: PredictionKind::NatSql,
            text: text.into(),
        }
    }

    pub fn sql(text: impl Into<String>) -> Self {
        Self {
            kind: PredictionKind::Sql,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Sort FROM/JOIN items before comparing; off is strict Spider scoring.
    pub normalize_join_order: bool,
    /// Used to compile NatSQL predictions.
    pub compile: CompileConfig,
    /// `databases_dir/<db_id>/<db_id>.sqlite`; `None` skips execution match.
    pub databases_dir: Option<PathBuf>,
    /// 0 picks the rayon default.
    pub workers: usize,
    /// Fill `value` slots in NatSQL predictions from the question.
    pub fill_values: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            normalize_join_order: false,
            compile: CompileConfig::default(),
            databases_dir: None,
            workers: 0,
            fill_values: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{examples} examples but {predictions} predictions")]
    Alignment { examples: usize, predictions: usize },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleVerdict {
    pub index: usize,
    pub db_id: String,
    /// Set when the gold side could not be scored; the example is then left
    /// out of every aggregate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardness: Option<Hardness>,
    /// SQL the prediction was scored as.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_sql: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_error: Option<String>,
    pub exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_reason: Option<String>,
    pub components: ComponentSet,
}

impl ExampleVerdict {
    fn invalid(index: usize, db_id: &str, reason: String) -> Self {
        Self {
            index,
            db_id: db_id.into(),
            invalid: Some(reason),
            hardness: None,
            pred_sql: None,
            pred_error: None,
            exact: false,
            exec: None,
            exec_reason: None,
            components: ComponentSet::default(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.invalid.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub count: usize,
    pub exact: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub invalid: usize,
    pub exact_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_accuracy: Option<f64>,
    pub components: BTreeMap<String, Prf>,
    pub by_hardness: BTreeMap<Hardness, Bucket>,
}

fn accuracy<'a>(rows: impl Iterator<Item = &'a ExampleVerdict> + Clone) -> Bucket {
    let count = rows.clone().count();
    let frac = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let exact = frac(rows.clone().filter(|r| r.exact).count(), count);
    let ran: Vec<bool> = rows.filter_map(|r| r.exec).collect();
    let exec = (!ran.is_empty()).then(|| frac(ran.iter().filter(|&&m| m).count(), ran.len()));
    Bucket { count, exact, exec }
}

impl Summary {
    /// Aggregate the valid rows.
    pub fn from_rows(rows: &[ExampleVerdict]) -> Self {
        let valid = || rows.iter().filter(|r| r.is_valid());
        let all = accuracy(valid());
        let sets: Vec<ComponentSet> = valid().map(|r| r.components).collect();
        let by_hardness = Hardness::ALL
            .into_iter()
            .map(|h| (h, accuracy(valid().filter(move |r| r.hardness == Some(h)))))
            .filter(|(_, b)| b.count > 0)
            .collect();
        Self {
            total: rows.len(),
            invalid: rows.len() - all.count,
            exact_accuracy: all.exact,
            exec_accuracy: all.exec,
            components: component_f1(&sets),
            by_hardness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub summary: Summary,
    pub examples: Vec<ExampleVerdict>,
}

impl EvalReport {
    pub fn from_rows(examples: Vec<ExampleVerdict>) -> Self {
        Self {
            summary: Summary::from_rows(&examples),
            examples,
        }
    }

    /// Plain-text summary table.
    pub fn to_table(&self) -> String {
        let s = &self.summary;
        let mut out = String::new();
        let pct = |x: f64| format!("{:.1}", 100.0 * x);
        let _ = writeln!(out, "{:<12}{:>8}{:>10}{:>10}", "", "count", "exact", "exec");
        for (h, b) in &s.by_hardness {
            let exec = b.exec.map(pct).unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "{:<12}{:>8}{:>10}{:>10}", h.as_str(), b.count, pct(b.exact), exec);
        }
        let exec = s.exec_accuracy.map(pct).unwrap_or_else(|| "-".into());
        let valid = s.total - s.invalid;
        let _ = writeln!(
            out,
            "{:<12}{:>8}{:>10}{:>10}",
            "all",
            valid,
            pct(s.exact_accuracy),
            exec
        );
        if s.invalid > 0 {
            let _ = writeln!(out, "({} invalid examples skipped)", s.invalid);
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<12}{:>10}{:>10}{:>10}",
            "component", "precision", "recall", "f1"
        );
        for (name, prf) in &s.components {
            let _ = writeln!(
                out,
                "{:<12}{:>10}{:>10}{:>10}",
                name,
                format!("{:.3}", prf.precision),
                format!("{:.3}", prf.recall),
                format!("{:.3}", prf.f1)
            );
        }
        out
    }
}

/// Whether the result order is part of the answer.
pub fn order_sensitive(gold: &SqlQuery) -> bool {
    let mut q = gold;
    loop {
        if q.order_by.is_some() {
            return true;
        }
        match &q.set_op {
            Some((_, rhs)) => q = rhs,
            None => return false,
        }
    }
}

pub fn database_path(dir: &Path, db_id: &str) -> PathBuf {
    dir.join(db_id).join(format!("{db_id}.sqlite"))
}

/// SQL for a prediction, compiling NatSQL first. With a question, NatSQL
/// value slots are filled from it in order of appearance.
pub fn prediction_sql(
    pred: &Prediction,
    question: Option<&str>,
    schema: &DatabaseSchema,
    config: &CompileConfig,
) -> Result<SqlQuery, String> {
    match pred.kind {
        PredictionKind::Sql => parse_sql(&pred.text, schema).map_err(|e| e.to_string()),
        PredictionKind::NatSql => {
            let mut q = parse_natsql(&pred.text, schema, config.dialect).map_err(|e| e.to_string())?;
            if let (Some(question), true) = (question, q.value_slots() > 0) {
                let values = extract_values(question, None, ExtractOptions::default());
                q = fill_values(&q, &values).map_err(|e| e.to_string())?;
            }
            compile(&q, schema, config).map_err(|e| e.to_string())
        }
    }
}

/// Score one example. A `dialect` field on the record overrides the
/// configured dialect for NatSQL predictions.
pub fn evaluate_example(
    index: usize,
    example: &Example,
    prediction: &Prediction,
    schema: Option<&DatabaseSchema>,
    config: &EvalConfig,
) -> ExampleVerdict {
    let Some(schema) = schema else {
        return ExampleVerdict::invalid(index, &example.db_id, format!("unknown database `{}`", example.db_id));
    };
    let gold = match example.gold_sql(schema) {
        Ok(g) => g,
        Err(e) => return ExampleVerdict::invalid(index, &example.db_id, format!("gold: {e}")),
    };
    let kmap = KeyMap::new(schema);
    let canon = Canonicalizer {
        schema,
        kmap: &kmap,
        normalize_join_order: config.normalize_join_order,
    };
    let gold_c = canon.query(&gold);

    let question = config.fill_values.then_some(example.question.as_str());
    let mut compile_config = config.compile;
    if let Some(d) = example
        .extra
        .get("dialect")
        .and_then(|d| d.as_str())
        .and_then(|d| d.parse().ok())
    {
        compile_config.dialect = d;
    }
    let pred = prediction_sql(prediction, question, schema, &compile_config);
    let pred_c = pred
        .as_ref()
        .map(|q| canon.query(q))
        .unwrap_or_else(|_| CQuery::empty());
    let (exact, components) = components::exact(&pred_c, &gold_c);
    let pred_sql = pred.as_ref().ok().map(|q| render_sql(q, schema));

    let mut verdict = ExampleVerdict {
        index,
        db_id: example.db_id.clone(),
        invalid: None,
        hardness: Some(hardness(&gold)),
        pred_sql: pred_sql.clone(),
        pred_error: pred.as_ref().err().cloned(),
        exact,
        exec: None,
        exec_reason: None,
        components,
    };
    if let Some(dir) = &config.databases_dir {
        let path = database_path(dir, &example.db_id);
        let outcome = match &pred_sql {
            Some(sql) => execution_match(sql, &example.query, &path, order_sensitive(&gold)),
            None => ExecOutcome::PredFailed(verdict.pred_error.clone().unwrap_or_default()),
        };
        if let ExecOutcome::GoldFailed(reason) = &outcome {
            return ExampleVerdict::invalid(index, &example.db_id, format!("gold execution failed: {reason}"));
        }
        verdict.exec = Some(outcome.is_match());
        verdict.exec_reason = outcome.reason();
    }
    verdict
}

/// Score aligned predictions against a dataset, one rayon task per example.
pub fn evaluate_corpus(
    examples: &[Example],
    predictions: &[Prediction],
    schemas: &HashMap<String, DatabaseSchema>,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if examples.len() != predictions.len() {
        return Err(EvalError::Alignment {
            examples: examples.len(),
            predictions: predictions.len(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    let rows = pool.install(|| {
        examples
            .par_iter()
            .zip(predictions)
            .enumerate()
            .map(|(i, (ex, pred))| evaluate_example(i, ex, pred, schemas.get(&ex.db_id), config))
            .collect()
    });
    Ok(EvalReport::from_rows(rows))
}
