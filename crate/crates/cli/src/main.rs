//! `natsql`: parse, compile, convert, unify and evaluate from the shell.
//!
//! Exit status is 0 on success, 1 when an item fails (any failure for the
//! single-query commands, any failure under `--strict` for the batch ones)
//! and 2 for usage errors and unreadable inputs.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value as Json};

use natsql::compiler::{compile, CompileConfig, GroupByPolicy};
use natsql::converter::{
    roundtrip_check, sql_to_natsql, ConversionReport, ConversionStatus, RoundtripResult, RoundtripVerdict,
};
use natsql::dataset::{load_schemas, Example};
use natsql::evaluator::{database_path, evaluate_corpus, EvalConfig, EvalReport, Prediction, PredictionKind};
use natsql::golden;
use natsql::natsql::{parse_natsql, print_natsql, Dialect};
use natsql::schema::DatabaseSchema;
use natsql::sql::render_sql;
use natsql::textprep::{extract_values, fill_values, unify_question, CellIndex, ExtractOptions, UnifyLexicon};

#[derive(Parser)]
#[command(
    name = "natsql",
    version,
    about = "NatSQL parser, SQL compiler, gold converter and evaluator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse one NatSQL query and print its AST as JSON.
    Parse(ParseArgs),
    /// Compile one NatSQL query to SQLite SQL.
    Compile(CompileArgs),
    /// Add NatSQL to every record of a Spider-format dataset.
    Convert(ConvertArgs),
    /// Replace comparative phrases in questions with placeholder tokens.
    Unify(UnifyArgs),
    /// Score predictions against a dataset.
    Eval(EvalArgs),
    /// Convert each gold query to NatSQL and back, and classify the round trip.
    CorpusCheck(CorpusCheckArgs),
    /// Write the bundled golden corpus, its schemas and databases to a directory.
    Golden(GoldenArgs),
}

#[derive(Args)]
struct SchemaArgs {
    /// Spider `tables.json`; the bundled schemas when omitted.
    #[arg(long)]
    schema: Option<PathBuf>,
}

impl SchemaArgs {
    fn load(&self) -> Result<HashMap<String, DatabaseSchema>> {
        match &self.schema {
            Some(path) => {
                let text = read_text(path)?;
                load_schemas(&text).with_context(|| format!("loading {}", path.display()))
            }
            None => Ok(golden::schemas()),
        }
    }

    fn one(&self, db: &str) -> Result<DatabaseSchema> {
        self.load()?
            .remove(db)
            .ok_or_else(|| anyhow!("no database `{db}` in the schema file"))
    }
}

#[derive(Args)]
struct ParseArgs {
    /// NatSQL text; read from stdin when omitted.
    query: Option<String>,
    #[command(flatten)]
    schema: SchemaArgs,
    /// Database id in the schema file.
    #[arg(long)]
    db: String,
    #[arg(long, default_value = "base")]
    dialect: Dialect,
    /// Print the normalized NatSQL text instead of the AST.
    #[arg(long)]
    print: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    FirstSelectColumn,
    PrimaryKeyOfSelectTable,
}

#[derive(Args)]
struct CompileArgs {
    /// NatSQL text; read from stdin when omitted.
    query: Option<String>,
    #[command(flatten)]
    schema: SchemaArgs,
    #[arg(long)]
    db: String,
    #[arg(long, default_value = "base")]
    dialect: Dialect,
    /// Fill `value` slots with values mentioned in this question.
    #[arg(long)]
    question: Option<String>,
    /// SQLite database whose text cells are matched against the question.
    #[arg(long, requires = "question")]
    cells_db: Option<PathBuf>,
    /// Fail if value slots remain.
    #[arg(long)]
    require_values: bool,
    /// GROUP BY key when none is written and no other rule applies.
    #[arg(long, value_enum, default_value_t = Policy::FirstSelectColumn)]
    groupby_policy: Policy,
    /// Drop the DISTINCT written in NatSQL.
    #[arg(long)]
    no_distinct: bool,
    /// Print {"natsql", "sql"} as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ConvertArgs {
    /// Dataset as a JSON array or JSON lines; `-` reads stdin.
    input: PathBuf,
    /// Output file, same layout as the input; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    schema: SchemaArgs,
    #[arg(long, default_value = "base")]
    dialect: Dialect,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Records converted per batch.
    #[arg(long, default_value_t = 1024)]
    chunk: usize,
    /// Exit 1 if any record is unsupported.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct UnifyArgs {
    /// Questions; one per stdin line when omitted.
    questions: Vec<String>,
    /// TSV lexicon of `pattern<TAB>placeholder` rules.
    #[arg(long, env = "NATSQL_LEXICON")]
    lexicon: Option<PathBuf>,
    /// Print a JSON array of {question, unified}.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PredKind {
    Natsql,
    Sql,
}

#[derive(Args)]
struct EvalArgs {
    /// Gold dataset (JSON array).
    #[arg(long)]
    gold: PathBuf,
    /// Predictions, one per line or a JSON array of strings, aligned with the gold records.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_enum, default_value_t = PredKind::Natsql)]
    pred_kind: PredKind,
    #[command(flatten)]
    schema: SchemaArgs,
    /// Dialect for compiling NatSQL predictions.
    #[arg(long, default_value = "base")]
    dialect: Dialect,
    /// `<dir>/<db_id>/<db_id>.sqlite`; execution match is skipped without it.
    #[arg(long)]
    databases_dir: Option<PathBuf>,
    /// Sort FROM and JOIN items before exact matching.
    #[arg(long)]
    normalize_join_order: bool,
    /// Leave NatSQL value slots empty instead of filling them from the question.
    #[arg(long)]
    no_fill_values: bool,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Exit 1 if any valid example misses exact or execution match.
    #[arg(long)]
    strict: bool,
    /// Write the full JSON report here.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CorpusCheckArgs {
    /// Dataset as a JSON array or JSON lines.
    #[arg(required_unless_present = "golden", conflicts_with = "golden")]
    input: Option<PathBuf>,
    /// Check the bundled golden corpus on its bundled databases.
    #[arg(long)]
    golden: bool,
    #[command(flatten)]
    schema: SchemaArgs,
    #[arg(long, default_value = "base")]
    dialect: Dialect,
    #[arg(long)]
    databases_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Exit 1 unless every round trip is exact or execution-equal.
    #[arg(long)]
    strict: bool,
    /// Print one JSON object per line.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GoldenArgs {
    /// Output directory.
    out: PathBuf,
}

/// Failures that are the input's fault, not the user's invocation.
struct ItemFailure;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Parse(a) => parse_cmd(a),
        Command::Compile(a) => compile_cmd(a),
        Command::Convert(a) => convert_cmd(a),
        Command::Unify(a) => unify_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::CorpusCheck(a) => corpus_check_cmd(a),
        Command::Golden(a) => golden_cmd(a),
    };
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(ItemFailure)) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

type Outcome = Result<Result<(), ItemFailure>>;

fn read_text(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading stdin")?;
        return Ok(s);
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn query_text(arg: Option<String>) -> Result<String> {
    let text = match arg {
        Some(q) => q,
        None => read_text(Path::new("-"))?,
    };
    let text = text.trim().to_string();
    if text.is_empty() {
        bail!("no query given");
    }
    Ok(text)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("starting worker pool")
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn item_result(ok: bool) -> Result<(), ItemFailure> {
    if ok {
        Ok(())
    } else {
        Err(ItemFailure)
    }
}

fn parse_cmd(a: ParseArgs) -> Outcome {
    let schema = a.schema.one(&a.db)?;
    let text = query_text(a.query)?;
    match parse_natsql(&text, &schema, a.dialect) {
        Ok(q) if a.print => println!("{}", print_natsql(&q, &schema)),
        Ok(q) => println!("{}", serde_json::to_string_pretty(&q)?),
        Err(e) => {
            eprintln!("parse error: {e}");
            return Ok(Err(ItemFailure));
        }
    }
    Ok(Ok(()))
}

fn compile_cmd(a: CompileArgs) -> Outcome {
    let schema = a.schema.one(&a.db)?;
    let text = query_text(a.query)?;
    let mut query = match parse_natsql(&text, &schema, a.dialect) {
        Ok(q) => q,
        Err(e) => {
            eprintln!("parse error: {e}");
            return Ok(Err(ItemFailure));
        }
    };
    if let (Some(question), true) = (&a.question, query.value_slots() > 0) {
        let cells = match &a.cells_db {
            Some(path) => Some(
                CellIndex::from_database(path, &schema, 1000)
                    .with_context(|| format!("reading cell values from {}", path.display()))?,
            ),
            None => None,
        };
        let values = extract_values(question, cells.as_ref(), ExtractOptions::default());
        query = match fill_values(&query, &values) {
            Ok(q) => q,
            Err(e) => {
                eprintln!("value filling: {e}");
                return Ok(Err(ItemFailure));
            }
        };
    }
    let config = CompileConfig {
        dialect: a.dialect,
        groupby_policy: match a.groupby_policy {
            Policy::FirstSelectColumn => GroupByPolicy::FirstSelectColumn,
            Policy::PrimaryKeyOfSelectTable => GroupByPolicy::PrimaryKeyOfSelectTable,
        },
        emit_distinct: !a.no_distinct,
        require_values: a.require_values,
    };
    let sql = match compile(&query, &schema, &config) {
        Ok(s) => render_sql(&s, &schema),
        Err(e) => {
            eprintln!("compile error: {e}");
            return Ok(Err(ItemFailure));
        }
    };
    if a.json {
        println!("{}", json!({ "natsql": print_natsql(&query, &schema), "sql": sql }));
    } else {
        println!("{sql}");
    }
    Ok(Ok(()))
}

/// Records of a JSON-array or JSON-lines dataset, read in batches so large
/// JSON-lines files are never held in memory at once.
enum Records {
    Array(std::vec::IntoIter<Json>),
    Lines(Box<dyn BufRead>, usize),
}

impl Records {
    fn open(path: &Path) -> Result<(Self, bool)> {
        let mut reader: Box<dyn BufRead> = if path == Path::new("-") {
            Box::new(BufReader::new(io::stdin()))
        } else {
            Box::new(BufReader::new(
                File::open(path).with_context(|| format!("opening {}", path.display()))?,
            ))
        };
        let first = loop {
            let buf = reader.fill_buf()?;
            match buf.iter().position(|b| !b.is_ascii_whitespace()) {
                Some(i) => break Some(buf[i]),
                None if buf.is_empty() => break None,
                None => {
                    let n = buf.len();
                    reader.consume(n);
                }
            }
        };
        if first == Some(b'[') {
            let all: Vec<Json> = serde_json::from_reader(reader).context("parsing dataset array")?;
            Ok((Records::Array(all.into_iter()), true))
        } else {
            Ok((Records::Lines(reader, 0), false))
        }
    }

    fn batch(&mut self, size: usize) -> Result<Vec<Json>> {
        let mut out = Vec::new();
        while out.len() < size.max(1) {
            match self {
                Records::Array(it) => match it.next() {
                    Some(v) => out.push(v),
                    None => break,
                },
                Records::Lines(reader, line_no) => {
                    let mut line = String::new();
                    if reader.read_line(&mut line)? == 0 {
                        break;
                    }
                    *line_no += 1;
                    if line.trim().is_empty() {
                        continue;
                    }
                    out.push(serde_json::from_str(&line).with_context(|| format!("line {line_no}"))?);
                }
            }
        }
        Ok(out)
    }
}

fn examples_of(batch: Vec<Json>, offset: usize) -> Result<Vec<Example>> {
    batch
        .into_iter()
        .enumerate()
        .map(|(i, v)| serde_json::from_value(v).with_context(|| format!("record {}", offset + i)))
        .collect()
}

fn convert_one(
    example: &Example,
    schemas: &HashMap<String, DatabaseSchema>,
    dialect: Dialect,
) -> (Option<String>, ConversionReport) {
    let unsupported = |why: String| ConversionReport {
        status: ConversionStatus::Unsupported,
        flags: vec![why],
    };
    let Some(schema) = schemas.get(&example.db_id) else {
        return (None, unsupported(format!("unknown database `{}`", example.db_id)));
    };
    let gold = match example.gold_sql(schema) {
        Ok(g) => g,
        Err(e) => return (None, unsupported(format!("gold SQL: {e}"))),
    };
    let conv = sql_to_natsql(&gold, schema, dialect);
    (conv.natsql.map(|q| print_natsql(&q, schema)), conv.report)
}

fn convert_cmd(a: ConvertArgs) -> Outcome {
    let schemas = a.schema.load()?;
    let pool = pool(a.workers)?;
    let (mut records, array) = Records::open(&a.input)?;
    let mut out = writer(a.output.as_deref())?;
    let mut counts: HashMap<&'static str, usize> = HashMap::new();
    let mut seen = 0;
    if array {
        out.write_all(b"[")?;
    }
    loop {
        let batch = records.batch(a.chunk)?;
        if batch.is_empty() {
            break;
        }
        let mut examples = examples_of(batch, seen)?;
        let converted: Vec<_> = pool.install(|| {
            examples
                .par_iter()
                .map(|e| convert_one(e, &schemas, a.dialect))
                .collect()
        });
        for (example, (natsql, report)) in examples.iter_mut().zip(converted) {
            *counts
                .entry(match report.status {
                    ConversionStatus::Converted => "converted",
                    ConversionStatus::Lossy => "lossy",
                    ConversionStatus::Unsupported => "unsupported",
                })
                .or_default() += 1;
            example.natsql = natsql;
            example
                .extra
                .insert("natsql_report".into(), serde_json::to_value(&report)?);
            let line = serde_json::to_string(example)?;
            if array {
                out.write_all(if seen == 0 { b"\n" } else { b",\n" })?;
            }
            out.write_all(line.as_bytes())?;
            if !array {
                out.write_all(b"\n")?;
            }
            seen += 1;
        }
    }
    if array {
        out.write_all(b"\n]\n")?;
    }
    out.flush()?;
    let count = |k| counts.get(k).copied().unwrap_or(0);
    eprintln!(
        "{seen} records: {} converted, {} lossy, {} unsupported",
        count("converted"),
        count("lossy"),
        count("unsupported")
    );
    Ok(item_result(!a.strict || count("unsupported") == 0))
}

fn unify_cmd(a: UnifyArgs) -> Outcome {
    let lexicon = match &a.lexicon {
        Some(path) => UnifyLexicon::from_file(path)?,
        None => UnifyLexicon::english(),
    };
    let questions = if a.questions.is_empty() {
        read_text(Path::new("-"))?.lines().map(str::to_string).collect()
    } else {
        a.questions
    };
    let mut out = writer(None)?;
    if a.json {
        let rows: Vec<Json> = questions
            .iter()
            .map(|q| json!({ "question": q, "unified": unify_question(q, &lexicon) }))
            .collect();
        writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?;
    } else {
        for q in &questions {
            writeln!(out, "{}", unify_question(q, &lexicon))?;
        }
    }
    out.flush()?;
    Ok(Ok(()))
}

fn load_dataset(path: &Path) -> Result<Vec<Example>> {
    let (mut records, _) = Records::open(path)?;
    examples_of(records.batch(usize::MAX)?, 0)
}

/// A JSON array of strings, or one prediction per line. Anything after a tab
/// is dropped, so `sql<TAB>db_id` files work as well.
fn load_predictions(path: &Path, kind: PredictionKind) -> Result<Vec<Prediction>> {
    let text = read_text(path)?;
    let texts: Vec<String> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        let mut lines: Vec<String> = text
            .lines()
            .map(|l| l.split('\t').next().unwrap_or("").trim().to_string())
            .collect();
        while lines.last().is_some_and(String::is_empty) {
            lines.pop();
        }
        lines
    };
    Ok(texts.into_iter().map(|text| Prediction { kind, text }).collect())
}

fn eval_cmd(a: EvalArgs) -> Outcome {
    let schemas = a.schema.load()?;
    let examples = load_dataset(&a.gold)?;
    let kind = match a.pred_kind {
        PredKind::Natsql => PredictionKind::NatSql,
        PredKind::Sql => PredictionKind::Sql,
    };
    let predictions = load_predictions(&a.pred, kind)?;
    let config = EvalConfig {
        normalize_join_order: a.normalize_join_order,
        compile: CompileConfig::with_dialect(a.dialect),
        databases_dir: a.databases_dir.clone(),
        workers: a.workers,
        fill_values: !a.no_fill_values,
    };
    let report = evaluate_corpus(&examples, &predictions, &schemas, &config)?;
    if let Some(path) = &a.output {
        let mut w = writer(Some(path))?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        w.flush()?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_table());
    }
    Ok(item_result(!a.strict || all_match(&report)))
}

fn all_match(report: &EvalReport) -> bool {
    report
        .examples
        .iter()
        .filter(|v| v.is_valid())
        .all(|v| v.exact && v.exec != Some(false))
}

#[derive(Serialize)]
struct CheckRow<'a> {
    index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<&'a str>,
    db_id: &'a str,
    #[serde(flatten)]
    result: &'a RoundtripResult,
}

/// Optional label, the record, and the dialect to convert it in.
type CheckItem = (Option<String>, Example, Dialect);

fn corpus_check_cmd(a: CorpusCheckArgs) -> Outcome {
    let scratch;
    let (items, schemas, dir): (Vec<CheckItem>, _, Option<PathBuf>) = if a.golden {
        scratch = tempfile::tempdir().context("creating scratch directory")?;
        golden::write_databases(scratch.path())?;
        let items = golden::examples()
            .into_iter()
            .map(|g| (Some(g.id.clone()), g.example(), g.dialect))
            .collect();
        (items, golden::schemas(), Some(scratch.path().to_path_buf()))
    } else {
        let input = a.input.as_deref().expect("clap requires input without --golden");
        let items = load_dataset(input)?.into_iter().map(|e| (None, e, a.dialect)).collect();
        (items, a.schema.load()?, a.databases_dir.clone())
    };
    let results: Vec<RoundtripResult> = pool(a.workers)?.install(|| {
        items
            .par_iter()
            .map(|(_, example, dialect)| match schemas.get(&example.db_id) {
                Some(schema) => {
                    let db = dir.as_deref().map(|d| database_path(d, &example.db_id));
                    roundtrip_check(example, schema, *dialect, db.as_deref().filter(|p| p.exists()))
                }
                None => {
                    let why = format!("unknown database `{}`", example.db_id);
                    RoundtripResult {
                        verdict: RoundtripVerdict::Unsupported,
                        natsql: None,
                        sql: None,
                        report: ConversionReport {
                            status: ConversionStatus::Unsupported,
                            flags: vec![why.clone()],
                        },
                        detail: Some(why),
                    }
                }
            })
            .collect()
    });

    let mut out = writer(None)?;
    let mut counts: HashMap<RoundtripVerdict, usize> = HashMap::new();
    for (index, ((id, example, _), result)) in items.iter().zip(&results).enumerate() {
        *counts.entry(result.verdict).or_default() += 1;
        if a.json {
            let row = CheckRow {
                index,
                id: id.as_deref(),
                db_id: &example.db_id,
                result,
            };
            writeln!(out, "{}", serde_json::to_string(&row)?)?;
        } else {
            let label = id.clone().unwrap_or_else(|| index.to_string());
            let verdict = serde_json::to_value(result.verdict)?;
            let mut line = format!(
                "{label}\t{}\t{}",
                verdict.as_str().unwrap_or_default(),
                result.natsql.as_deref().unwrap_or("-")
            );
            let notes: Vec<&str> = result
                .report
                .flags
                .iter()
                .map(String::as_str)
                .chain(result.detail.as_deref())
                .collect();
            if !notes.is_empty() {
                line.push('\t');
                line.push_str(&notes.join("; "));
            }
            writeln!(out, "{line}")?;
        }
    }
    out.flush()?;
    let count = |v| counts.get(&v).copied().unwrap_or(0);
    eprintln!(
        "{} queries: {} exact, {} execution-equal, {} lossy, {} unsupported",
        results.len(),
        count(RoundtripVerdict::Exact),
        count(RoundtripVerdict::ExecutionEqual),
        count(RoundtripVerdict::Lossy),
        count(RoundtripVerdict::Unsupported)
    );
    let ok = count(RoundtripVerdict::Lossy) + count(RoundtripVerdict::Unsupported) == 0;
    Ok(item_result(!a.strict || ok))
}

fn golden_cmd(a: GoldenArgs) -> Outcome {
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    std::fs::write(a.out.join("tables.json"), golden::TABLES_JSON)?;
    let examples = golden::examples();
    let records: Vec<Json> = examples
        .iter()
        .map(|g| {
            let mut v = serde_json::to_value(g.example()).expect("example serializes");
            v["id"] = json!(g.id);
            v["dialect"] = json!(g.dialect);
            v
        })
        .collect();
    std::fs::write(a.out.join("dev.json"), serde_json::to_string_pretty(&records)? + "\n")?;
    let natsql: String = examples.iter().map(|g| g.natsql.clone() + "\n").collect();
    std::fs::write(a.out.join("pred_natsql.txt"), natsql)?;
    let gold: String = examples.iter().map(|g| format!("{}\t{}\n", g.query, g.db_id)).collect();
    std::fs::write(a.out.join("gold.sql"), gold)?;
    golden::write_databases(&a.out.join("database"))?;
    eprintln!(
        "wrote {} examples and {} databases to {}",
        examples.len(),
        golden::fixture_ids().count(),
        a.out.display()
    );
    Ok(Ok(()))
}
