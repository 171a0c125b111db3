//! Tokenizer shared by the NatSQL and SQL parsers.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    /// Identifier or keyword; keywords are recognised by the parsers.
    Word(String),
    /// Backtick-quoted identifier.
    QuotedIdent(String),
    Number(f64),
    Str(String),
    Sym(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::QuotedIdent(w) => write!(f, "`{w}`"),
            Tok::Number(n) => write!(f, "number {n}"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Sym(s) => write!(f, "`{s}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    /// Byte offset into the source.
    pub pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub pos: usize,
    pub snippet: String,
    pub message: String,
}

const SYMBOLS: [&str; 18] = [
    "!=", "<>", ">=", "<=", "=", ">", "<", ".", ",", "(", ")", "*", "@", "-", "+", "/", ";", "%",
];

fn snippet(src: &str, pos: usize) -> String {
    src[pos..].chars().take(12).collect()
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

const OPERATOR_WORDS: [&str; 16] = [
    "and", "or", "not", "between", "in", "like", "is", "exists", "where", "select", "having", "on", "limit", "by",
    "join", "sub",
];

/// Whether a `-` after this token is a binary minus rather than a sign.
fn ends_value(tok: Option<&Token>) -> bool {
    match tok.map(|t| &t.tok) {
        Some(Tok::Word(w)) => !OPERATOR_WORDS.iter().any(|k| w.eq_ignore_ascii_case(k)),
        Some(Tok::QuotedIdent(_) | Tok::Number(_) | Tok::Str(_) | Tok::Sym(")" | "*")) => true,
        _ => false,
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut out: Vec<Token> = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(pos, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
            continue;
        }
        let negative_number =
            c == '-' && !ends_value(out.last()) && src[pos + 1..].chars().next().is_some_and(|d| d.is_ascii_digit());
        if c.is_ascii_digit() || negative_number {
            it.next();
            let mut end = pos + c.len_utf8();
            let mut seen_dot = false;
            let mut wordish = false;
            while let Some(&(i, d)) = it.peek() {
                if d.is_ascii_digit() {
                    end = i + 1;
                    it.next();
                } else if d == '.'
                    && !seen_dot
                    && !wordish
                    && src[i + 1..].chars().next().is_some_and(|n| n.is_ascii_digit())
                {
                    seen_dot = true;
                    end = i + 1;
                    it.next();
                } else if is_ident_char(d) && !seen_dot && !negative_number {
                    wordish = true;
                    end = i + d.len_utf8();
                    it.next();
                } else {
                    break;
                }
            }
            let text = &src[pos..end];
            let tok = if wordish {
                Tok::Word(text.to_string())
            } else {
                match text.parse::<f64>() {
                    Ok(n) if n.is_finite() => Tok::Number(n),
                    _ => {
                        return Err(LexError {
                            pos,
                            snippet: snippet(src, pos),
                            message: "number out of range".into(),
                        })
                    }
                }
            };
            out.push(Token { tok, pos });
            continue;
        }
        if is_ident_char(c) {
            let mut end = pos;
            while let Some(&(i, d)) = it.peek() {
                if is_ident_char(d) {
                    end = i + d.len_utf8();
                    it.next();
                } else {
                    break;
                }
            }
            out.push(Token {
                tok: Tok::Word(src[pos..end].to_string()),
                pos,
            });
            continue;
        }
        if c == '"' || c == '\'' || c == '`' {
            it.next();
            let mut value = String::new();
            let mut closed = false;
            while let Some((_, d)) = it.next() {
                if d == c {
                    if it.peek().map(|&(_, n)| n) == Some(c) {
                        it.next();
                        value.push(c);
                    } else {
                        closed = true;
                        break;
                    }
                } else {
                    value.push(d);
                }
            }
            if !closed {
                return Err(LexError {
                    pos,
                    snippet: snippet(src, pos),
                    message: "unterminated quoted text".into(),
                });
            }
            let tok = if c == '`' {
                Tok::QuotedIdent(value)
            } else {
                Tok::Str(value)
            };
            out.push(Token { tok, pos });
            continue;
        }
        let rest = &src[pos..];
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                for _ in 0..sym.len() {
                    it.next();
                }
                out.push(Token {
                    tok: Tok::Sym(sym),
                    pos,
                });
            }
            None => {
                return Err(LexError {
                    pos,
                    snippet: snippet(src, pos),
                    message: format!("unexpected character {c:?}"),
                })
            }
        }
    }
    Ok(out)
}
