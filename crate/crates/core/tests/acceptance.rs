//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances and sizes are pinned below.

use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use natsql::compiler::{compile, plan_segments, resolve_placeholders, CompileConfig, Rule};
use natsql::converter::sql_to_natsql;
use natsql::dataset::{load_examples, load_schemas, Example};
use natsql::evaluator::{
    component_f1, database_path, evaluate_corpus, exact_match, execution_match, order_sensitive, EvalConfig,
    EvalReport, Prediction,
};
use natsql::golden::{self, GoldenExample};
use natsql::natsql::{
    parse_natsql, print_natsql, validate, AggFun, Column, CondOp, Condition, Conjunct, Dialect, Direction, NatSqlQuery,
    Operand, OrderBy,
};
use natsql::schema::{ColumnRef, DatabaseSchema};
use natsql::sql::{parse_sql, render_sql, SetOpKind};
use natsql::textprep::{extract_values, fill_values, unify_question, ExtractOptions, UnifyLexicon};

const GOLDEN_MIN_EXAMPLES: usize = 25;
const GOLDEN_TIME_LIMIT: Duration = Duration::from_secs(5);
const RANDOM_SCHEMAS: usize = 200;
const MAX_TABLES: usize = 6;
const MAX_COLUMNS: usize = 8;
const RANDOM_FK_GRAPHS: usize = 100;
const ROUND_TRIP_ASTS: usize = 1_000;
const FUZZ_INPUTS: usize = 100_000;
/// Dataset-gated targets: gold execution accuracy per dialect, and how far
/// the measured value may land from it, in percentage points.
const SPIDER_TARGETS: [(Dialect, f64); 2] = [(Dialect::Base, 95.3), (Dialect::NatsqlG, 96.5)];
const SPIDER_TOLERANCE_PP: f64 = 3.0;
const SPIDER_ENV: &str = "NATSQL_SPIDER_DIR";

type Criterion = (&'static str, fn() -> Verdict);
/// Ranking key of a candidate pair: (stage, list position, tie-breakers).
type Rank = (u8, usize, usize, usize);

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("golden corpus parses, compiles and executes like gold", golden_fidelity),
        (
            "placeholder resolution agrees with brute-force column search",
            inference_oracle,
        ),
        (
            "join paths are shortest and unjoinable pairs error",
            join_path_optimality,
        ),
        ("print/parse round trip and parser fuzzing", grammar_round_trip),
        ("segment planning rules and set-operation kinds", planner_rules),
        (
            "evaluator scores gold against itself and corruptions exactly",
            evaluator_self_consistency,
        ),
        ("question unification and value filling", text_preprocessing),
        ("Spider gold coverage (dataset-gated)", spider_coverage),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("criterion {} [{tag}] {name}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// 1. Golden corpus

fn golden_fidelity() -> Verdict {
    let start = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    golden::write_databases(dir.path()).expect("fixtures build");
    let schemas = golden::schemas();
    let examples = golden::examples();
    let n = examples.len();
    let (mut parsed, mut compiled, mut executed) = (0, 0, 0);
    let mut failures = Vec::new();
    for ex in &examples {
        let schema = &schemas[&ex.db_id];
        let Ok(q) = ex.natsql_query(schema, None) else {
            failures.push(format!("{}: parse", ex.id));
            continue;
        };
        parsed += 1;
        let Ok(sql) = compile(&q, schema, &CompileConfig::with_dialect(ex.dialect)) else {
            failures.push(format!("{}: compile", ex.id));
            continue;
        };
        compiled += 1;
        let gold = ex.example().gold_sql(schema).expect("gold SQL parses");
        let db = database_path(dir.path(), &ex.db_id);
        if execution_match(&render_sql(&sql, schema), &ex.query, &db, order_sensitive(&gold)).is_match() {
            executed += 1;
        } else {
            failures.push(format!("{}: execution", ex.id));
        }
    }
    let elapsed = start.elapsed();
    let ok = n >= GOLDEN_MIN_EXAMPLES && parsed == n && compiled == n && executed == n && elapsed < GOLDEN_TIME_LIMIT;
    check(
        ok,
        format!(
            "{n} examples; parse {parsed}/{n}, compile {compiled}/{n}, execution {executed}/{n} in {:.2}s (limit {}s){}",
            elapsed.as_secs_f64(),
            GOLDEN_TIME_LIMIT.as_secs(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join(", ")) }
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Placeholder resolution against a brute-force search over the raw schema
// document. The oracle reads the JSON directly and never touches
// DatabaseSchema lookups.

const NAME_POOL: [&str; 10] = [
    "id", "code", "title", "label", "amount", "owner_id", "ref_id", "tag", "kind_id", "note",
];

/// Raw schema in table/local-column coordinates, as read from the document.
struct RawSchema {
    /// Per table, column names in declaration order (local index = position + 1).
    columns: Vec<Vec<String>>,
    /// Global id -> (table, local).
    global: Vec<Option<(usize, usize)>>,
    pks: Vec<usize>,
    fks: Vec<(usize, usize)>,
}

impl RawSchema {
    fn from_json(doc: &Value) -> Self {
        let n = doc["table_names_original"].as_array().unwrap().len();
        let mut columns = vec![Vec::new(); n];
        let mut global = Vec::new();
        for c in doc["column_names_original"].as_array().unwrap() {
            let t = c[0].as_i64().unwrap();
            if t < 0 {
                global.push(None);
                continue;
            }
            let t = t as usize;
            columns[t].push(c[1].as_str().unwrap().to_string());
            global.push(Some((t, columns[t].len())));
        }
        let ids = |key: &str| -> Vec<Value> { doc[key].as_array().unwrap().clone() };
        let pks = ids("primary_keys")
            .iter()
            .map(|v| v.as_u64().unwrap() as usize)
            .collect();
        let fks = ids("foreign_keys")
            .iter()
            .map(|v| (v[0].as_u64().unwrap() as usize, v[1].as_u64().unwrap() as usize))
            .collect();
        Self {
            columns,
            global,
            pks,
            fks,
        }
    }

    fn at(&self, gid: usize) -> (usize, usize) {
        self.global[gid].expect("not the star")
    }

    fn name(&self, (t, c): (usize, usize)) -> String {
        self.columns[t][c - 1].to_lowercase()
    }

    fn pk_of(&self, t: usize) -> Option<(usize, usize)> {
        self.pks.iter().map(|&g| self.at(g)).find(|&(pt, _)| pt == t)
    }

    fn all_columns(&self) -> Vec<(usize, usize)> {
        (0..self.columns.len())
            .flat_map(|t| (1..=self.columns[t].len()).map(move |c| (t, c)))
            .collect()
    }
}

type Cell = (usize, usize);

/// Every (a, b) pair with a on a listed table and b on `table_r`, ranked by
/// (stage, position of a's table in the list, tie-breaker); the lowest wins.
fn brute_force_pair(raw: &RawSchema, t_list: &[usize], table_r: usize) -> Option<(Cell, Cell, u8)> {
    let mut best: Option<(Rank, Cell, Cell)> = None;
    let mut offer = |key: Rank, a: Cell, b: Cell| {
        if best.as_ref().is_none_or(|(k, _, _)| key < *k) {
            best = Some((key, a, b));
        }
    };
    let cols = raw.all_columns();
    for &a in &cols {
        let Some(pos) = t_list.iter().position(|&t| t == a.0) else {
            continue;
        };
        for &b in cols.iter().filter(|b| b.0 == table_r) {
            for (k, &(child, parent)) in raw.fks.iter().enumerate() {
                let (child, parent) = (raw.at(child), raw.at(parent));
                if (a, b) == (child, parent) {
                    offer((1, pos, k, 0), a, b);
                } else if (a, b) == (parent, child) {
                    offer((1, pos, k, 1), a, b);
                }
            }
            if a.0 != table_r && raw.name(a) == raw.name(b) {
                offer((2, pos, a.1, 0), a, b);
            }
        }
    }
    if let (Some(&first), Some(pk_r)) = (t_list.first(), raw.pk_of(table_r)) {
        if let Some(pk_first) = raw.pk_of(first) {
            offer((3, 0, 0, 0), pk_first, pk_r);
        }
    }
    best.map(|((stage, ..), a, b)| (a, b, stage))
}

fn random_schema(rng: &mut ChaCha8Rng, id: usize) -> Value {
    let n = rng.gen_range(1..=MAX_TABLES);
    let mut col_names = vec![json!([-1, "*"])];
    let mut col_types = vec![json!("text")];
    let mut per_table = Vec::new();
    for t in 0..n {
        let m = rng.gen_range(1..=MAX_COLUMNS);
        let mut names = NAME_POOL.to_vec();
        names.shuffle(rng);
        let mut gids = Vec::new();
        for name in &names[..m] {
            gids.push(col_names.len());
            col_names.push(json!([t, name]));
            col_types.push(json!(if rng.gen_bool(0.5) { "number" } else { "text" }));
        }
        per_table.push(gids);
    }
    let mut pks = Vec::new();
    for gids in &per_table {
        if rng.gen_bool(0.85) {
            pks.push(*gids.choose(rng).unwrap());
            if rng.gen_bool(0.15) {
                pks.push(*gids.choose(rng).unwrap());
            }
        }
    }
    pks.dedup();
    pks.shuffle(rng);
    let all: Vec<usize> = (1..col_names.len()).collect();
    let mut fks: Vec<(usize, usize)> = Vec::new();
    for _ in 0..rng.gen_range(0..=2 * n) {
        let (c, p) = (*all.choose(rng).unwrap(), *all.choose(rng).unwrap());
        if c != p && !fks.contains(&(c, p)) {
            fks.push((c, p));
        }
    }
    let tables: Vec<String> = (0..n).map(|t| format!("tab{t}")).collect();
    json!({
        "db_id": format!("random_{id}"),
        "table_names_original": tables,
        "column_names_original": col_names,
        "column_types": col_types,
        "primary_keys": pks,
        "foreign_keys": fks.iter().map(|(c, p)| json!([c, p])).collect::<Vec<_>>(),
    })
}

fn inference_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut agree = 0;
    let mut stages = [0usize; 4];
    let mut disagreements = Vec::new();
    for id in 0..RANDOM_SCHEMAS {
        let doc = random_schema(&mut rng, id);
        let schema = DatabaseSchema::from_json(doc.clone()).expect("random schema is valid");
        let raw = RawSchema::from_json(&doc);
        let n = raw.columns.len();
        let cell_text = |(t, c): Cell| format!("tab{t}.{}", raw.columns[t][c - 1]);
        let random_cell = |rng: &mut ChaCha8Rng| {
            let t = rng.gen_range(0..n);
            (t, rng.gen_range(1..=raw.columns[t].len()))
        };

        let mut select = vec![random_cell(&mut rng)];
        if rng.gen_bool(0.3) {
            select.push(random_cell(&mut rng));
        }
        let mut text = format!(
            "SELECT {}",
            select.iter().map(|&c| cell_text(c)).collect::<Vec<_>>().join(", ")
        );
        let mut t_list: Vec<usize> = Vec::new();
        for &(t, _) in &select {
            if !t_list.contains(&t) {
                t_list.push(t);
            }
        }
        // Expected (left, right) per condition; None once resolution must fail.
        let mut expected: Vec<Option<(Cell, Cell)>> = Vec::new();
        let conditions = rng.gen_range(1..=3);
        for k in 0..conditions {
            let table_r = rng.gen_range(0..n);
            let explicit = rng.gen_bool(0.35).then(|| random_cell(&mut rng));
            let op = ["in", "not in", "exists"].choose(&mut rng).unwrap();
            let left = explicit.map(cell_text).unwrap_or_else(|| "@".into());
            text.push_str(if k == 0 { " WHERE " } else { " and " });
            text.push_str(&format!("{left} {op} tab{table_r}.*"));
            if expected.last().is_some_and(Option::is_none) {
                continue;
            }
            let list = explicit.map(|c| vec![c.0]).unwrap_or_else(|| t_list.clone());
            match brute_force_pair(&raw, &list, table_r) {
                Some((a, b, stage)) => {
                    stages[stage as usize] += 1;
                    let left = explicit.unwrap_or(a);
                    expected.push(Some((left, b)));
                    for t in [left.0, table_r] {
                        if !t_list.contains(&t) {
                            t_list.push(t);
                        }
                    }
                }
                None => {
                    stages[0] += 1;
                    expected.push(None);
                }
            }
        }

        let parsed = match parse_natsql(&text, &schema, Dialect::Base) {
            Ok(q) => q,
            Err(e) => {
                disagreements.push(format!("{text}: parse error {e}"));
                continue;
            }
        };
        let got = resolve_placeholders(&parsed, &schema);
        let matches = match (&got, expected.iter().all(Option::is_some)) {
            (Ok(r), true) => r.query.conditions.iter().zip(&expected).all(|(c, e)| {
                let (l, rr) = e.expect("all resolvable");
                let as_cell = |o: &Operand| o.as_column().map(|c| (c.col.table, c.col.column));
                as_cell(&c.left) == Some(l) && as_cell(&c.right) == Some(rr)
            }),
            (Err(_), false) => true,
            _ => false,
        };
        if matches {
            agree += 1;
        } else if disagreements.len() < 3 {
            disagreements.push(format!("{text}: expected {expected:?}, got {got:?}"));
        }
    }
    let every_stage = stages[1..].iter().all(|&s| s > 0);
    check(
        agree == RANDOM_SCHEMAS && every_stage,
        format!(
            "{agree}/{RANDOM_SCHEMAS} schemas agree; decided by FK {}, same name {}, primary keys {}, unresolvable {}{}",
            stages[1],
            stages[2],
            stages[3],
            stages[0],
            if disagreements.is_empty() { String::new() } else { format!("; {}", disagreements.join(" | ")) }
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Join paths against BFS over the raw edge list

fn bfs_distance(n: usize, edges: &[(usize, usize)], from: &[usize], to: usize) -> Option<usize> {
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &s in from {
        dist[s] = 0;
        queue.push_back(s);
    }
    while let Some(t) = queue.pop_front() {
        for &(a, b) in edges {
            for (x, y) in [(a, b), (b, a)] {
                if x == t && dist[y] == usize::MAX {
                    dist[y] = dist[t] + 1;
                    queue.push_back(y);
                }
            }
        }
    }
    (dist[to] != usize::MAX).then_some(dist[to])
}

fn join_path_optimality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let (mut agree, mut unjoinable, mut longest) = (0, 0, 0);
    let mut problems = Vec::new();
    for g in 0..RANDOM_FK_GRAPHS {
        let n = rng.gen_range(2..=9);
        // Column layout: every table has `id` then `link0`..`link3`.
        let mut cols = vec![json!([-1, "*"])];
        for t in 0..n {
            cols.push(json!([t, "id"]));
            for k in 0..4 {
                cols.push(json!([t, format!("link{k}")]));
            }
        }
        let gid = |t: usize, local: usize| 1 + t * 5 + local;
        let mut edges = Vec::new();
        let mut fks = Vec::new();
        let edge_count = rng.gen_range(0..=n + 2);
        for _ in 0..edge_count {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a == b || edges.contains(&(a, b)) || edges.contains(&(b, a)) {
                continue;
            }
            edges.push((a, b));
            fks.push(json!([gid(a, 1 + rng.gen_range(0..4)), gid(b, 0)]));
        }
        let doc = json!({
            "db_id": format!("graph_{g}"),
            "table_names_original": (0..n).map(|t| format!("node{t}")).collect::<Vec<_>>(),
            "column_names_original": cols,
            "column_types": vec!["number"; 1 + 5 * n],
            "primary_keys": (0..n).map(|t| gid(t, 0)).collect::<Vec<_>>(),
            "foreign_keys": fks,
        });
        let schema = DatabaseSchema::from_json(doc).expect("graph schema is valid");
        for _ in 0..5 {
            let mut from: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(0..n)).collect();
            from.dedup();
            let to = rng.gen_range(0..n);
            let expect = bfs_distance(n, &edges, &from, to);
            let got = schema.join_path(&from, to);
            let ok = match (&got, expect) {
                (Ok(steps), Some(d)) => {
                    // The chain must also be walkable: each step brings in a
                    // new table through an edge to a table already present.
                    let mut present = from.clone();
                    let walkable = steps.iter().all(|s| {
                        let edge = edges.contains(&(s.existing.table, s.table))
                            || edges.contains(&(s.table, s.existing.table));
                        let fresh = !present.contains(&s.table) && present.contains(&s.existing.table);
                        present.push(s.table);
                        edge && fresh && s.incoming.table == s.table
                    });
                    longest = longest.max(d);
                    steps.len() == d && walkable && present.contains(&to)
                }
                (Err(_), None) => {
                    unjoinable += 1;
                    true
                }
                _ => false,
            };
            if ok {
                agree += 1;
            } else if problems.len() < 3 {
                problems.push(format!("graph {g} {from:?}->{to}: expected {expect:?}, got {got:?}"));
            }
        }
    }
    let total = RANDOM_FK_GRAPHS * 5;
    check(
        agree == total && unjoinable > 0,
        format!(
            "{agree}/{total} queries over {RANDOM_FK_GRAPHS} graphs match BFS ({unjoinable} unjoinable, longest path {longest}){}",
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join(" | ")) }
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Grammar

fn random_column(rng: &mut ChaCha8Rng, schema: &DatabaseSchema, agg_p: f64) -> Column {
    let t = rng.gen_range(0..schema.tables().len());
    let c = rng.gen_range(0..schema.table(t).columns.len());
    let col = ColumnRef::new(t, c);
    let agg = if col.is_star() {
        rng.gen_bool(0.5).then_some(AggFun::Count)
    } else {
        rng.gen_bool(agg_p).then(|| *AggFun::ALL.choose(rng).unwrap())
    };
    Column {
        agg,
        col,
        distinct: agg.is_some() && !col.is_star() && rng.gen_bool(0.1),
    }
}

fn random_literal(rng: &mut ChaCha8Rng) -> Operand {
    match rng.gen_range(0..5) {
        0 => Operand::Number(rng.gen_range(-10_000..10_000) as f64),
        1 => Operand::Number(rng.gen_range(-1e6..1e6)),
        2 => Operand::ValueSlot,
        _ => {
            let alphabet: Vec<char> = "abc XYZ_-.%'\"é0".chars().collect();
            let len = rng.gen_range(0..8);
            Operand::String((0..len).map(|_| *alphabet.choose(rng).unwrap()).collect())
        }
    }
}

fn random_query(rng: &mut ChaCha8Rng, schema: &DatabaseSchema, dialect: Dialect) -> NatSqlQuery {
    let mut q = NatSqlQuery::new(
        (0..rng.gen_range(1..=3))
            .map(|_| random_column(rng, schema, 0.3))
            .collect(),
    );
    for i in 0..rng.gen_range(0..=4) {
        let conjunct = if i == 0 {
            [
                None,
                None,
                None,
                Some(Conjunct::Except),
                Some(Conjunct::Intersect),
                Some(Conjunct::Union),
            ]
            .choose(rng)
            .copied()
            .unwrap()
        } else {
            Some(*Conjunct::ALL.choose(rng).unwrap())
        };
        let op = *CondOp::ALL.choose(rng).unwrap();
        let left = if rng.gen_bool(0.2) {
            Operand::Placeholder
        } else {
            Operand::Column(random_column(rng, schema, 0.2))
        };
        let right = if matches!(op, CondOp::Join) || rng.gen_bool(0.25) {
            let t = rng.gen_range(0..schema.tables().len());
            Operand::Column(Column::plain(ColumnRef::star(t)))
        } else if rng.gen_bool(0.15) {
            Operand::Column(random_column(rng, schema, 0.3))
        } else {
            random_literal(rng)
        };
        let right2 = op.takes_second_bound().then(|| random_literal(rng));
        q.conditions.push(Condition {
            conjunct,
            left,
            op,
            right,
            right2,
        });
    }
    if dialect == Dialect::NatsqlG && rng.gen_bool(0.5) {
        q.group_by = Some(
            (0..rng.gen_range(1..=2))
                .map(|_| random_column(rng, schema, 0.0))
                .collect(),
        );
    }
    if rng.gen_bool(0.4) {
        q.order_by = Some(OrderBy {
            keys: (0..rng.gen_range(1..=2))
                .map(|_| random_column(rng, schema, 0.4))
                .collect(),
            direction: *[Direction::Asc, Direction::Desc, Direction::Unspecified]
                .choose(rng)
                .unwrap(),
            limit: rng.gen_bool(0.5).then(|| rng.gen_range(0..50)),
        });
    }
    q
}

fn grammar_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let schemas: Vec<DatabaseSchema> = {
        let mut all: Vec<_> = golden::schemas().into_values().collect();
        all.sort_by(|a, b| a.db_id.cmp(&b.db_id));
        all
    };
    let (mut valid, mut identical, mut attempts) = (0, 0, 0);
    let mut problems = Vec::new();
    while valid < ROUND_TRIP_ASTS && attempts < 200 * ROUND_TRIP_ASTS {
        attempts += 1;
        let schema = schemas.choose(&mut rng).unwrap();
        let dialect = if rng.gen_bool(0.5) {
            Dialect::Base
        } else {
            Dialect::NatsqlG
        };
        let q = random_query(&mut rng, schema, dialect);
        if !validate(&q, schema, dialect).is_empty() {
            continue;
        }
        valid += 1;
        let text = print_natsql(&q, schema);
        match parse_natsql(&text, schema, dialect) {
            Ok(back) if back == q => identical += 1,
            other => {
                if problems.len() < 3 {
                    problems.push(format!("{text} -> {other:?}"));
                }
            }
        }
    }

    let pets = &golden::schemas()["pets_1"];
    let mut panics = 0;
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    for i in 0..FUZZ_INPUTS {
        let len = rng.gen_range(0..64);
        let bytes: Vec<u8> = if i % 2 == 0 {
            (0..len).map(|_| rng.gen()).collect()
        } else {
            // Printable bytes reach deeper into the grammar.
            (0..len).map(|_| rng.gen_range(0x20..0x7f)).collect()
        };
        let text = String::from_utf8_lossy(&bytes);
        let result = catch_unwind(AssertUnwindSafe(|| {
            let _ = parse_natsql(&text, pets, Dialect::NatsqlG);
            let _ = parse_sql(&text, pets);
        }));
        if result.is_err() {
            panics += 1;
        }
    }
    std::panic::set_hook(hook);

    check(
        valid == ROUND_TRIP_ASTS && identical == valid && panics == 0,
        format!(
            "{identical}/{valid} valid random ASTs round-trip ({attempts} generated); {panics} panics on {FUZZ_INPUTS} random byte strings{}",
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join(" | ")) }
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Planner

fn planner_rules() -> Verdict {
    let schemas = golden::schemas();
    let plan = |db: &str, text: &str| {
        let schema = &schemas[db];
        let q = parse_natsql(text, schema, Dialect::Base).unwrap_or_else(|e| panic!("{text}: {e}"));
        let resolved = resolve_placeholders(&q, schema).unwrap_or_else(|e| panic!("{text}: {e}"));
        let plan = plan_segments(&resolved.query);
        let rules: Vec<Rule> = plan
            .segments
            .iter()
            .flat_map(|s| s.conditions.iter().map(|c| c.rule))
            .collect();
        let sql = compile(&q, schema, &CompileConfig::default()).unwrap_or_else(|e| panic!("{text}: {e}"));
        (rules, plan.kinds(), sql.set_op.as_ref().map(|(k, _)| *k))
    };
    type Case = (&'static str, &'static str, &'static str, Rule, Option<SetOpKind>);
    let cases: [Case; 7] = [
        ("a", "car_1", "SELECT countries.countryname WHERE except @ is car_makers.*", Rule::SetConjunct, Some(SetOpKind::Except)),
        (
            "b",
            "apartment_rentals",
            "SELECT apartments.apt_number WHERE apartments.bathroom_count > 1 or apartments.bedroom_count > 2 and apartments.room_count > 1",
            Rule::OrBeforeAnd,
            Some(SetOpKind::Union),
        ),
        ("c", "sakila_1", "SELECT film.title WHERE film.rental_rate = 0.99 or count(inventory.*) < 3", Rule::OrMixesAggregation, Some(SetOpKind::Union)),
        ("d", "sakila_1", "SELECT film.title WHERE count(film_actor.*) > 5 and count(inventory.*) < 3", Rule::AndAcrossAggregateTables, Some(SetOpKind::Intersect)),
        (
            "e",
            "employee_hire_evaluation",
            "SELECT shop.district WHERE shop.number_products < 3000 and shop.number_products > 10000",
            Rule::AndUnsatisfiable,
            Some(SetOpKind::Intersect),
        ),
        (
            "e",
            "department_store",
            r#"SELECT staff.staff_name WHERE staff_da.job_title_code = "Sales Person" and staff_da.job_title_code != "Clerical Staff""#,
            Rule::AndUnsatisfiable,
            Some(SetOpKind::Except),
        ),
        ("f", "pets_1", "SELECT student.fname WHERE student.age > 20 and student.sex = \"F\"", Rule::Concatenate, None),
    ];
    let mut seen = Vec::new();
    let mut problems = Vec::new();
    for (label, db, text, rule, kind) in cases {
        let (rules, _, compiled_kind) = plan(db, text);
        if rules.contains(&rule) && compiled_kind == kind {
            seen.push(label);
        } else {
            problems.push(format!("({label}) {text}: rules {rules:?}, set op {compiled_kind:?}"));
        }
    }
    seen.dedup();
    check(
        problems.is_empty() && seen.len() == 6,
        format!(
            "rules {} covered; OR+HAVING gives UNION, disjoint AND gives INTERSECT, negated AND gives EXCEPT{}",
            seen.iter().map(|l| format!("({l})")).collect::<Vec<_>>().join(""),
            if problems.is_empty() {
                String::new()
            } else {
                format!("; {}", problems.join(" | "))
            }
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Evaluator

fn score(examples: &[Example], preds: &[Prediction], dir: &Path) -> EvalReport {
    let config = EvalConfig {
        databases_dir: Some(dir.to_path_buf()),
        ..EvalConfig::default()
    };
    evaluate_corpus(examples, preds, &golden::schemas(), &config).expect("aligned")
}

/// A query over the example's first gold table that returns no rows, while
/// every gold query in the corpus returns at least one.
fn corrupted(ex: &GoldenExample, schema: &DatabaseSchema) -> String {
    let gold = ex.example().gold_sql(schema).expect("gold parses");
    let t = gold.from_tables().next().expect("gold reads a table");
    let pk = schema.primary_key_of(t).unwrap_or(ColumnRef::new(t, 1));
    format!(
        "SELECT * FROM {} WHERE {} < -999999",
        schema.table(t).name,
        schema.column(pk).name
    )
}

fn evaluator_self_consistency() -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    golden::write_databases(dir.path()).expect("fixtures");
    let schemas = golden::schemas();
    let golden = golden::examples();
    let examples: Vec<Example> = golden.iter().map(GoldenExample::example).collect();
    let gold_preds: Vec<Prediction> = golden.iter().map(|g| Prediction::sql(g.query.clone())).collect();
    let n = examples.len();

    let report = score(&examples, &gold_preds, dir.path());
    let s = &report.summary;
    let worst_f1 = s.components.values().map(|p| p.f1).fold(1.0, f64::min);
    let mut ok = s.invalid == 0 && s.exact_accuracy == 1.0 && s.exec_accuracy == Some(1.0) && worst_f1 == 1.0;
    let mut detail = format!(
        "self-score exact {:.3}, exec {:.3}, lowest component F1 {worst_f1:.3} over {n}",
        s.exact_accuracy,
        s.exec_accuracy.unwrap_or(f64::NAN)
    );

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let mut ks = Vec::new();
    for k in [1, 2, 5, n / 2, n] {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let mut preds = gold_preds.clone();
        for &i in &idx[..k] {
            preds[i] = Prediction::sql(corrupted(&golden[i], &schemas[&golden[i].db_id]));
        }
        let s = score(&examples, &preds, dir.path()).summary;
        let expect = (n - k) as f64 / n as f64;
        let hit = s.exact_accuracy == expect && s.exec_accuracy == Some(expect);
        ok &= hit;
        ks.push(format!(
            "k={k}: {:.4}/{:.4} vs {expect:.4}{}",
            s.exact_accuracy,
            s.exec_accuracy.unwrap_or(f64::NAN),
            if hit { "" } else { " MISMATCH" }
        ));
    }
    // The corruption used in the documentation: `>=` read as `>`.
    let concert = golden
        .iter()
        .position(|g| g.id == "concerts-since")
        .expect("concert example");
    let mut preds = gold_preds.clone();
    preds[concert] = Prediction::sql(golden[concert].query.replace(">=", ">"));
    let s = score(&examples, &preds, dir.path()).summary;
    let expect = (n - 1) as f64 / n as f64;
    ok &= s.exec_accuracy == Some(expect);
    detail.push_str(&format!(
        "; corrupted {}; `year > 2014` exec {:.4}",
        ks.join(", "),
        s.exec_accuracy.unwrap_or(f64::NAN)
    ));

    // Informational: the golden NatSQL, compiled, scored against gold.
    let natsql_preds: Vec<Prediction> = golden.iter().map(|g| Prediction::natsql(g.natsql.clone())).collect();
    let mut with_dialect = examples.clone();
    for (e, g) in with_dialect.iter_mut().zip(&golden) {
        e.extra.insert("dialect".into(), json!(g.dialect));
    }
    let s = score(&with_dialect, &natsql_preds, dir.path()).summary;
    detail.push_str(&format!(
        " (golden NatSQL as predictions: exact {:.3}, exec {:.3})",
        s.exact_accuracy,
        s.exec_accuracy.unwrap_or(f64::NAN)
    ));
    check(ok, detail)
}

// ---------------------------------------------------------------------------
// 7. Text preprocessing

fn text_preprocessing() -> Verdict {
    let lexicon = UnifyLexicon::english();
    let pairs = [
        ("How many concerts in 2014 or after?", "How many concerts [GE] 2014?"),
        (
            "Which countries have at least 3 cities?",
            "Which countries [GE] 3 cities?",
        ),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (q, want) in pairs {
        let got = unify_question(q, &lexicon);
        ok &= got == want;
        notes.push(format!("{got:?}"));
    }
    let shop = golden::examples()
        .into_iter()
        .find(|g| g.id == "shop-district-both-slots")
        .expect("shop example");
    let schema = &golden::schemas()[&shop.db_id];
    let q = parse_natsql(&shop.natsql, schema, shop.dialect).expect("shop NatSQL parses");
    let values = extract_values(&shop.question, None, ExtractOptions::default());
    let filled: Vec<Operand> = fill_values(&q, &values)
        .map(|f| f.conditions.into_iter().map(|c| c.right).collect())
        .unwrap_or_default();
    let want = vec![Operand::Number(3000.0), Operand::Number(10000.0)];
    ok &= q.value_slots() == 2 && filled == want;
    notes.push(format!("shop slots filled {:?}", filled));
    check(ok, notes.join("; "))
}

// ---------------------------------------------------------------------------
// 8. Spider (needs the dataset)

fn spider_coverage() -> Verdict {
    let Some(root) = std::env::var_os(SPIDER_ENV) else {
        return Verdict::Skip(format!(
            "set {SPIDER_ENV} to a Spider directory holding dev.json, tables.json and database/ to run"
        ));
    };
    let root = Path::new(&root);
    let read = |name: &str| std::fs::read_to_string(root.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    let schemas = load_schemas(&read("tables.json")).expect("tables.json");
    let examples = load_examples(&read("dev.json")).expect("dev.json");
    let dbs = root.join("database");
    let mut ok = true;
    let mut notes = Vec::new();
    for (dialect, target) in SPIDER_TARGETS {
        let mut hits = 0;
        let mut sets = Vec::new();
        for ex in &examples {
            let Some(schema) = schemas.get(&ex.db_id) else { continue };
            let Ok(gold) = ex.gold_sql(schema) else { continue };
            let Some(natsql) = sql_to_natsql(&gold, schema, dialect).natsql else {
                continue;
            };
            let Ok(sql) = compile(&natsql, schema, &CompileConfig::with_dialect(dialect)) else {
                continue;
            };
            sets.push(exact_match(&sql, &gold, schema, false).1);
            let db = database_path(&dbs, &ex.db_id);
            if execution_match(&render_sql(&sql, schema), &ex.query, &db, order_sensitive(&gold)).is_match() {
                hits += 1;
            }
        }
        let acc = 100.0 * hits as f64 / examples.len() as f64;
        ok &= (acc - target).abs() <= SPIDER_TOLERANCE_PP;
        let f1 = component_f1(&sets);
        let lowest: Vec<String> = {
            let mut v: Vec<_> = f1.iter().collect();
            v.sort_by(|a, b| a.1.f1.total_cmp(&b.1.f1));
            v.iter().take(2).map(|(k, p)| format!("{k} {:.3}", p.f1)).collect()
        };
        notes.push(format!(
            "{dialect}: {acc:.1}% (target {target}% ± {SPIDER_TOLERANCE_PP}), lowest F1 {}",
            lowest.join(", ")
        ));
    }
    check(ok, notes.join("; "))
}
