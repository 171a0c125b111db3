use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn natsql(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_natsql"))
        .args(args)
        .env_remove("NATSQL_LEXICON")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary starts");
    let mut pipe = child.stdin.take().expect("stdin");
    if let Some(text) = stdin {
        pipe.write_all(text.as_bytes()).expect("write stdin");
    }
    drop(pipe);
    child.wait_with_output().expect("binary finishes")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn export(dir: &Path) {
    let o = natsql(&["golden", dir.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn compile_reads_stdin() {
    let o = natsql(
        &["compile", "--db", "pets_1"],
        Some("SELECT student.fname WHERE @ in has_pet.*\n"),
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o).trim(),
        "SELECT Fname FROM Student WHERE StuID IN ( SELECT StuID FROM Has_Pet )"
    );
}

#[test]
fn compile_fills_values_from_question() {
    let o = natsql(
        &[
            "compile",
            "--db",
            "pets_1",
            "--json",
            "--question",
            "Students older than 20?",
            "SELECT student.fname WHERE student.age > value",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["sql"], "SELECT Fname FROM Student WHERE Age > 20");
}

#[test]
fn bad_query_exits_one_and_bad_usage_two() {
    let o = natsql(&["compile", "--db", "pets_1", "SELECT student.nope"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    let o = natsql(&["compile", "--db", "no_such_db", "SELECT x"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = natsql(&["compile", "--bogus-flag"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = natsql(
        &[
            "eval",
            "--gold",
            "/nonexistent/dev.json",
            "--pred",
            "/nonexistent/p.txt",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn parse_prints_ast_json() {
    let o = natsql(
        &[
            "parse",
            "--db",
            "pets_1",
            "SELECT count(student.*) WHERE student.age > 20",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.get("select").is_some() && v.get("where").is_some(), "{v}");
}

#[test]
fn unify_lines() {
    let o = natsql(
        &["unify"],
        Some("How many concerts in 2014 or after?\nWhich countries have at least 3 cities?\n"),
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "How many concerts [GE] 2014?\nWhich countries [GE] 3 cities?\n"
    );
}

#[test]
fn unify_custom_lexicon() {
    let dir = tempfile::tempdir().unwrap();
    let lex = dir.path().join("lex.tsv");
    std::fs::write(&lex, "# test\nno fewer than\t[GE]\n").unwrap();
    let o = natsql(
        &[
            "unify",
            "--lexicon",
            lex.to_str().unwrap(),
            "no fewer than 3 pets, at least 2",
        ],
        None,
    );
    assert_eq!(stdout(&o), "[GE] 3 pets, at least 2\n");
}

#[test]
fn eval_strict_flags_a_corrupted_prediction() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let d = dir.path();
    let arg = |name: &str| d.join(name).to_str().unwrap().to_string();
    let gold_sql: Vec<String> = std::fs::read_to_string(d.join("gold.sql"))
        .unwrap()
        .lines()
        .map(|l| l.split('\t').next().unwrap().to_string())
        .collect();
    std::fs::write(d.join("pred.sql"), gold_sql.join("\n")).unwrap();
    let report = d.join("report.json");
    let (dev, dbs, pred, bad) = (arg("dev.json"), arg("database"), arg("pred.sql"), arg("bad.sql"));
    let base = [
        "eval",
        "--gold",
        &dev,
        "--databases-dir",
        &dbs,
        "--pred-kind",
        "sql",
        "--strict",
    ];

    let mut args = base.to_vec();
    args.extend(["--pred", &pred]);
    let o = natsql(&args, None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    let mut corrupted = gold_sql.clone();
    let i = corrupted
        .iter()
        .position(|q| q.contains("year >= 2014"))
        .expect("concert query present");
    corrupted[i] = corrupted[i].replace("year >= 2014", "year > 2014");
    std::fs::write(d.join("bad.sql"), corrupted.join("\n")).unwrap();
    let mut args = base.to_vec();
    args.extend(["--pred", &bad, "--output", report.to_str().unwrap()]);
    let o = natsql(&args, None);
    assert_eq!(o.status.code(), Some(1));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["examples"][i]["exec"], false);
    assert_eq!(
        r["examples"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|e| e["exec"] == false)
            .count(),
        1
    );
}

#[test]
fn eval_natsql_predictions_execute() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let d = dir.path().to_str().unwrap();
    let o = natsql(
        &[
            "eval",
            "--gold",
            &format!("{d}/dev.json"),
            "--pred",
            &format!("{d}/pred_natsql.txt"),
            "--databases-dir",
            &format!("{d}/database"),
            "--json",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["summary"]["exec_accuracy"], 1.0);
    assert_eq!(r["summary"]["invalid"], 0);
}

#[test]
fn convert_golden_corpus_has_no_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let out = dir.path().join("converted.json");
    let o = natsql(
        &[
            "convert",
            dir.path().join("dev.json").to_str().unwrap(),
            "-o",
            out.to_str().unwrap(),
            "--strict",
            "--chunk",
            "7",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let records: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(records.len(), 29);
    for r in &records {
        assert!(r["natsql"].is_string(), "{r}");
        assert_ne!(r["natsql_report"]["status"], "unsupported");
        assert!(r["id"].is_string(), "extra fields survive");
    }
}

#[test]
fn convert_streams_json_lines() {
    let input = concat!(
        r#"{"question": "q1", "db_id": "pets_1", "query": "SELECT count(*) FROM student WHERE age > 20"}"#,
        "\n\n",
        r#"{"question": "q2", "db_id": "pets_1", "query": "SELECT age + 1 FROM student"}"#,
        "\n",
    );
    let o = natsql(&["convert", "-", "--chunk", "1"], Some(input));
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["natsql"], "SELECT count(student.*) WHERE student.age > 20");
    assert_eq!(lines[1]["natsql_report"]["status"], "unsupported");

    let o = natsql(&["convert", "-", "--strict"], Some(input));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn corpus_check_golden_is_clean() {
    let o = natsql(&["corpus-check", "--golden", "--strict", "--json"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 29);
    assert!(rows
        .iter()
        .all(|r| r["verdict"] == "exact" || r["verdict"] == "execution-equal"));
}
