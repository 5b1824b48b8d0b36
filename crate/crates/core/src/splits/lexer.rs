//! A small SQL lexer for SQLite-flavoured query text.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Keyword,
    Identifier,
    Number,
    StringLiteral,
    Operator,
    Punctuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlToken {
    /// Source text of the token, quotes included for literals.
    pub text: String,
    pub kind: TokenKind,
}

impl SqlToken {
    pub fn is_keyword(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text.eq_ignore_ascii_case(kw)
    }
}

/// Reserved words recognised case-insensitively. Sorted for binary search.
const KEYWORDS: &[&str] = &[
    "ALL",
    "AND",
    "AS",
    "ASC",
    "AVG",
    "BETWEEN",
    "BY",
    "CASE",
    "CAST",
    "COUNT",
    "CROSS",
    "DESC",
    "DISTINCT",
    "ELSE",
    "END",
    "EXCEPT",
    "EXISTS",
    "FROM",
    "FULL",
    "GLOB",
    "GROUP",
    "HAVING",
    "IN",
    "INNER",
    "INTERSECT",
    "IS",
    "JOIN",
    "LEFT",
    "LIKE",
    "LIMIT",
    "MAX",
    "MIN",
    "NATURAL",
    "NOT",
    "NULL",
    "OFFSET",
    "ON",
    "OR",
    "ORDER",
    "OUTER",
    "RIGHT",
    "SELECT",
    "SUM",
    "THEN",
    "UNION",
    "USING",
    "WHEN",
    "WHERE",
    "WITH",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS
        .binary_search_by(|k| k.bytes().cmp(word.bytes().map(|b| b.to_ascii_uppercase())))
        .is_ok()
}

const OPERATORS_2: &[&str] = &["<=", ">=", "<>", "!=", "==", "||"];
const OPERATORS_1: &[u8] = b"=<>+-*/%";
const PUNCTUATION: &[u8] = b"(),;.";

fn lex_error(position: usize, message: impl Into<String>) -> Error {
    Error::Lex {
        position,
        message: message.into(),
    }
}

/// Splits `sql` into tokens. `--` comments and whitespace are skipped.
pub fn lex_sql(sql: &str) -> Result<Vec<SqlToken>> {
    if sql.trim().is_empty() {
        return Err(lex_error(0, "empty query"));
    }
    let bytes = sql.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    let push = |tokens: &mut Vec<SqlToken>, start: usize, end: usize, kind| {
        tokens.push(SqlToken {
            text: sql[start..end].to_string(),
            kind,
        })
    };

    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c == b'\'' || c == b'"' {
            i += 1;
            loop {
                match bytes.get(i) {
                    None => return Err(lex_error(start, "unterminated string literal")),
                    Some(&q) if q == c => {
                        // A doubled quote is an escaped quote.
                        if bytes.get(i + 1) == Some(&c) {
                            i += 2;
                        } else {
                            i += 1;
                            break;
                        }
                    }
                    Some(_) => i += 1,
                }
            }
            push(&mut tokens, start, i, TokenKind::StringLiteral);
        } else if c == b'`' || c == b'[' {
            let close = if c == b'`' { b'`' } else { b']' };
            i += 1;
            while i < bytes.len() && bytes[i] != close {
                i += 1;
            }
            if i == bytes.len() {
                return Err(lex_error(start, "unterminated quoted identifier"));
            }
            i += 1;
            push(&mut tokens, start, i, TokenKind::Identifier);
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if bytes.get(i) == Some(&b'.') && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if matches!(bytes.get(i), Some(b'e' | b'E')) {
                let mut j = i + 1;
                if matches!(bytes.get(j), Some(b'+' | b'-')) {
                    j += 1;
                }
                if bytes.get(j).is_some_and(u8::is_ascii_digit) {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            push(&mut tokens, start, i, TokenKind::Number);
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let kind = if is_keyword(&sql[start..i]) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            push(&mut tokens, start, i, kind);
        } else if i + 1 < bytes.len() && OPERATORS_2.contains(&&sql[i..i + 2]) {
            i += 2;
            push(&mut tokens, start, i, TokenKind::Operator);
        } else if OPERATORS_1.contains(&c) {
            i += 1;
            push(&mut tokens, start, i, TokenKind::Operator);
        } else if PUNCTUATION.contains(&c) {
            i += 1;
            push(&mut tokens, start, i, TokenKind::Punctuation);
        } else {
            let ch = sql[i..].chars().next().unwrap_or('?');
            return Err(lex_error(i, format!("illegal character {ch:?}")));
        }
    }
    if tokens.is_empty() {
        return Err(lex_error(0, "query contains no tokens"));
    }
    Ok(tokens)
}
