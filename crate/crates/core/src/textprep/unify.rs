use std::fmt;
use std::path::Path;
use std::str::FromStr;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable naming a lexicon file to use instead of the
/// built-in English rules.
pub const LEXICON_ENV: &str = "NATSQL_LEXICON";

const DEFAULT_LEXICON: &str = include_str!("lexicon_en.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Placeholder {
    Ge,
    Le,
    Like,
}

impl Placeholder {
    pub fn token(self) -> &'static str {
        match self {
            Placeholder::Ge => "[GE]",
            Placeholder::Le => "[LE]",
            Placeholder::Like => "[LIKE]",
        }
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Placeholder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "[GE]" | "GE" => Ok(Placeholder::Ge),
            "[LE]" | "LE" => Ok(Placeholder::Le),
            "[LIKE]" | "LIKE" => Ok(Placeholder::Like),
            other => Err(format!("unknown placeholder `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnifyRule {
    pub pattern: Regex,
    pub placeholder: Placeholder,
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("cannot read lexicon {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Ordered phrase rules for question unification.
#[derive(Debug, Clone)]
pub struct UnifyLexicon {
    pub rules: Vec<UnifyRule>,
}

impl UnifyLexicon {
    /// Parse `pattern<TAB>placeholder` lines. Blank lines and lines starting
    /// with `#` are skipped; patterns are case-insensitive.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| LexiconError::Line { line: i + 1, message };
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (pattern, placeholder) = line
                .rsplit_once('\t')
                .ok_or_else(|| err("expected pattern<TAB>placeholder".into()))?;
            let placeholder = placeholder.parse().map_err(err)?;
            let pattern = RegexBuilder::new(pattern)
                .case_insensitive(true)
                .build()
                .map_err(|e| err(e.to_string()))?;
            rules.push(UnifyRule { pattern, placeholder });
        }
        Ok(Self { rules })
    }

    /// The built-in English rules.
    pub fn english() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("built-in lexicon parses")
    }

    pub fn from_file(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// `NATSQL_LEXICON` if set, else the built-in rules.
    pub fn from_env() -> Result<Self, LexiconError> {
        match std::env::var_os(LEXICON_ENV) {
            Some(path) if !path.is_empty() => Self::from_file(Path::new(&path)),
            _ => Ok(Self::english()),
        }
    }
}

impl Default for UnifyLexicon {
    fn default() -> Self {
        Self::english()
    }
}

/// Bound on rewrite passes, in case a custom lexicon matches its own output.
const MAX_PASSES: usize = 16;

/// Replace comparative phrases with their placeholder token. Scanning left to
/// right, the earliest match wins, then the longest, then the earlier rule.
/// Captured groups are kept after the placeholder. A kept value can form a
/// new phrase with the text after it ("3 or more or more"), so passes repeat
/// until nothing changes.
pub fn unify_question(question: &str, lexicon: &UnifyLexicon) -> String {
    let mut text = question.to_string();
    for _ in 0..MAX_PASSES {
        let next = unify_pass(&text, lexicon);
        if next == text {
            break;
        }
        text = next;
    }
    text
}

fn unify_pass(question: &str, lexicon: &UnifyLexicon) -> String {
    let mut out = String::with_capacity(question.len());
    let mut pos = 0;
    while pos <= question.len() {
        let best = lexicon
            .rules
            .iter()
            .filter_map(|r| r.pattern.captures_at(question, pos).map(|c| (r, c)))
            .filter(|(_, c)| !c.get(0).expect("group 0").is_empty())
            .min_by_key(|(_, c)| {
                let m = c.get(0).expect("group 0");
                (m.start(), std::cmp::Reverse(m.end()))
            });
        let Some((rule, caps)) = best else { break };
        let whole = caps.get(0).expect("group 0");
        out.push_str(&question[pos..whole.start()]);
        out.push_str(rule.placeholder.token());
        for group in caps.iter().skip(1).flatten() {
            out.push(' ');
            out.push_str(group.as_str());
        }
        pos = whole.end();
    }
    if pos < question.len() {
        out.push_str(&question[pos..]);
    }
    out
}
