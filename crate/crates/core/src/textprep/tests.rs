use proptest::prelude::*;

use super::*;
use crate::natsql::{parse_natsql, Dialect, Operand};
use crate::testing::schema;

fn unify(q: &str) -> String {
    static LEXICON: std::sync::OnceLock<UnifyLexicon> = std::sync::OnceLock::new();
    unify_question(q, LEXICON.get_or_init(UnifyLexicon::english))
}

fn numbers(q: &str) -> Vec<f64> {
    extract_values(q, None, ExtractOptions::default())
        .into_iter()
        .map(|c| match c.value {
            Literal::Number(n) => n,
            Literal::String(s) => panic!("unexpected string {s}"),
        })
        .collect()
}

#[test]
fn unifies_the_two_known_questions() {
    assert_eq!(
        unify("How many concerts in 2014 or after?"),
        "How many concerts [GE] 2014?"
    );
    assert_eq!(
        unify("Which countries have at least 3 cities?"),
        "Which countries [GE] 3 cities?"
    );
}

#[test]
fn other_phrases() {
    assert_eq!(unify("Singers aged 30 or less"), "Singers aged [LE] 30");
    assert_eq!(unify("Shops with at most 10 staff"), "Shops [LE] 10 staff");
    assert_eq!(unify("Films released in 2005 or before"), "Films released [LE] 2005");
    assert_eq!(unify("Names that contain the word 'Dr'"), "Names that [LIKE] 'Dr'");
    assert_eq!(unify("Teams with 5 or more players"), "Teams with [GE] 5 players");
}

#[test]
fn plain_questions_are_unchanged() {
    let q = "What are the names of all singers?";
    assert_eq!(unify(q), q);
    assert_eq!(unify(""), "");
}

#[test]
fn lexicon_file_format() {
    let lex = UnifyLexicon::parse("# comment\n\n\\bover\\b\t[GE]\n").unwrap();
    assert_eq!(lex.rules.len(), 1);
    assert_eq!(unify_question("Ages over 3", &lex), "Ages [GE] 3");
    assert!(matches!(
        UnifyLexicon::parse("no tab here"),
        Err(LexiconError::Line { line: 1, .. })
    ));
    assert!(matches!(
        UnifyLexicon::parse("(\t[GE]"),
        Err(LexiconError::Line { line: 1, .. })
    ));
    assert!(matches!(UnifyLexicon::parse("x\t[GT]"), Err(LexiconError::Line { .. })));
}

#[test]
fn longest_match_wins_at_the_same_start() {
    let lex = UnifyLexicon::parse("\\bat\\b\t[LIKE]\n\\bat least\\b\t[GE]\n").unwrap();
    assert_eq!(unify_question("at least 2", &lex), "[GE] 2");
}

#[test]
fn extracts_numbers_in_order() {
    assert_eq!(numbers("How many concerts in 2014 or after?"), vec![2014.0]);
    assert_eq!(
        numbers(
            "Which district has both stores with less than 3000 products and stores with more than 10000 products?"
        ),
        vec![3000.0, 10000.0]
    );
    assert_eq!(numbers("What is the rate, 0.99 or 10,000?"), vec![0.99, 10000.0]);
    assert!(numbers("Who are the singers?").is_empty());
}

#[test]
fn quoted_spans_and_apostrophes() {
    let q = "Find the student's pets of type \"dog\" named 'Rex'";
    let got = extract_values(q, None, ExtractOptions::default());
    let strings: Vec<&Literal> = got.iter().map(|c| &c.value).collect();
    assert_eq!(
        strings,
        vec![&Literal::String("dog".into()), &Literal::String("Rex".into())]
    );
    assert!(got.iter().all(|c| c.source == ValueSource::QuotedSpan));
}

#[test]
fn cell_values_match_longest_first() {
    let mut cells = CellIndex::default();
    cells
        .columns
        .insert("t.c".into(), vec!["New York".into(), "York".into(), "a".into()]);
    let got = extract_values(
        "Shops in new york with 3 staff",
        Some(&cells),
        ExtractOptions::default(),
    );
    assert_eq!(got.len(), 2);
    assert_eq!(got[0].value, Literal::String("New York".into()));
    assert_eq!(got[0].surface, "new york");
    assert_eq!(got[0].source, ValueSource::CellMatch);
    assert_eq!(got[1].value, Literal::Number(3.0));
}

#[test]
fn word_numbers_are_opt_in() {
    assert!(numbers("Students with two pets").is_empty());
    let got = extract_values("Students with two pets", None, ExtractOptions { word_numbers: true });
    assert_eq!(got[0].value, Literal::Number(2.0));
}

#[test]
fn fills_slots_in_order() {
    let s = schema("employee_hire_evaluation");
    let q = parse_natsql(
        "SELECT shop.district WHERE shop.number_products < value and shop.number_products > value",
        &s,
        Dialect::Base,
    )
    .unwrap();
    let question =
        "Which district has both stores with less than 3000 products and stores with more than 10000 products?";
    let filled = fill_values(&q, &extract_values(question, None, ExtractOptions::default())).unwrap();
    assert_eq!(filled.conditions[0].right, Operand::Number(3000.0));
    assert_eq!(filled.conditions[1].right, Operand::Number(10000.0));
    assert_eq!(filled.value_slots(), 0);

    let one = extract_values("less than 3000", None, ExtractOptions::default());
    assert_eq!(
        fill_values(&q, &one),
        Err(FillError::InsufficientValues { unfilled: vec![2] })
    );
    assert_eq!(
        FillError::InsufficientValues { unfilled: vec![2] }.to_string(),
        "insufficient values: slots 2 unfilled"
    );
}

#[test]
fn no_slots_means_no_change() {
    let s = schema("employee_hire_evaluation");
    let q = parse_natsql("SELECT shop.district WHERE shop.number_products < 5", &s, Dialect::Base).unwrap();
    let cands = extract_values("9 and 10", None, ExtractOptions::default());
    assert_eq!(fill_values(&q, &cands).unwrap(), q);
}

const FRAGMENTS: &[&str] = &[
    "How many",
    "concerts",
    "in",
    "2014",
    "or",
    "after",
    "at least",
    "at most",
    "have",
    "3",
    "cities",
    "or more",
    "or less",
    "contain",
    "the word",
    "before",
    "with",
    "no more than",
    "10,000",
    "'x'",
    "?",
    "[GE]",
    "more",
    "than",
    "or equal to",
    "greater",
    "including",
    "7.5",
];

proptest! {
    #[test]
    fn unify_is_idempotent(words in prop::collection::vec(prop::sample::select(FRAGMENTS), 0..12)) {
        let q = words.join(" ");
        let once = unify(&q);
        prop_assert_eq!(unify(&once), once);
    }

    #[test]
    fn spans_increase_and_map_back(words in prop::collection::vec(prop::sample::select(FRAGMENTS), 0..12)) {
        let q = words.join(" ");
        let got = extract_values(&q, None, ExtractOptions { word_numbers: true });
        for pair in got.windows(2) {
            prop_assert!(pair[0].end <= pair[1].start);
        }
        for c in &got {
            prop_assert_eq!(&q[c.start..c.end], c.surface.as_str());
        }
    }

    #[test]
    fn filling_only_touches_slots(values in prop::collection::vec(0u32..5000, 0..4), extra in 0usize..3) {
        let s = schema("employee_hire_evaluation");
        let conds: Vec<String> = values
            .iter()
            .map(|_| "shop.number_products > value".to_string())
            .collect();
        let text = if conds.is_empty() {
            "SELECT shop.name".to_string()
        } else {
            format!("SELECT shop.name WHERE {}", conds.join(" and "))
        };
        let q = parse_natsql(&text, &s, Dialect::Base).unwrap();
        let question: Vec<String> = values.iter().map(|v| v.to_string()).chain((0..extra).map(|i| format!("{}", 9000 + i))).collect();
        let cands = extract_values(&question.join(" then "), None, ExtractOptions::default());
        let filled = fill_values(&q, &cands).unwrap();
        prop_assert_eq!(filled.select.clone(), q.select.clone());
        for (i, (a, b)) in filled.conditions.iter().zip(&q.conditions).enumerate() {
            prop_assert_eq!(&a.left, &b.left);
            prop_assert_eq!(a.op, b.op);
            prop_assert_eq!(a.conjunct, b.conjunct);
            prop_assert_eq!(&a.right, &Operand::Number(values[i] as f64));
        }
    }
}
