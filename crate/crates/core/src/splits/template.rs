//! Template masking: replace schema identifiers and literals with
//! placeholder tokens to get a structural signature of a query.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::lexer::{lex_sql, SqlToken, TokenKind};
use crate::error::Result;

pub const TABLE: &str = "TABLE";
pub const ATTRIBUTE: &str = "ATTRIBUTE";
pub const NUMERIC: &str = "NUMERIC";
pub const VALUE: &str = "VALUE";

const PLACEHOLDERS: [&str; 4] = [TABLE, ATTRIBUTE, NUMERIC, VALUE];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaTable {
    pub name: String,
    #[serde(default)]
    pub columns: Vec<String>,
}

/// Database schema as read from `schema.json`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub tables: Vec<SchemaTable>,
}

impl Schema {
    fn table_names(&self) -> BTreeSet<String> {
        self.tables.iter().map(|t| t.name.to_lowercase()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentRole {
    Table,
    Attribute,
    /// Name introduced by `AS`.
    Alias,
    /// One of the placeholder tokens, left untouched.
    Placeholder,
}

/// Assigns a role to every identifier token (`None` for other tokens).
///
/// With a schema, an identifier is a table iff it names a schema table.
/// Without one, it is a table when it directly follows `FROM`/`JOIN` or
/// precedes a `.`.
pub fn classify_identifiers(tokens: &[SqlToken], schema: Option<&Schema>) -> Vec<Option<IdentRole>> {
    let tables = schema.map(Schema::table_names);
    tokens
        .iter()
        .enumerate()
        .map(|(i, tok)| {
            if tok.kind != TokenKind::Identifier {
                return None;
            }
            if PLACEHOLDERS.contains(&tok.text.as_str()) {
                return Some(IdentRole::Placeholder);
            }
            let prev = i.checked_sub(1).map(|p| &tokens[p]);
            if prev.is_some_and(|p| p.is_keyword("AS")) {
                return Some(IdentRole::Alias);
            }
            let is_table = match &tables {
                Some(names) => names.contains(&unquote(&tok.text).to_lowercase()),
                None => {
                    prev.is_some_and(|p| p.is_keyword("FROM") || p.is_keyword("JOIN"))
                        || tokens
                            .get(i + 1)
                            .is_some_and(|n| n.kind == TokenKind::Punctuation && n.text == ".")
                }
            };
            Some(if is_table {
                IdentRole::Table
            } else {
                IdentRole::Attribute
            })
        })
        .collect()
}

fn unquote(ident: &str) -> &str {
    ident
        .strip_prefix('`')
        .and_then(|s| s.strip_suffix('`'))
        .or_else(|| ident.strip_prefix('[').and_then(|s| s.strip_suffix(']')))
        .unwrap_or(ident)
}

/// Masks a query into its template, e.g.
/// `SELECT name FROM singer WHERE age = 21` becomes
/// `SELECT ATTRIBUTE FROM TABLE WHERE ATTRIBUTE = NUMERIC`.
pub fn mask_template(sql: &str, schema: Option<&Schema>) -> Result<String> {
    let tokens = lex_sql(sql)?;
    Ok(mask_tokens(&tokens, schema))
}

pub fn mask_tokens(tokens: &[SqlToken], schema: Option<&Schema>) -> String {
    let roles = classify_identifiers(tokens, schema);
    let parts: Vec<String> = tokens
        .iter()
        .zip(roles)
        .map(|(tok, role)| match tok.kind {
            TokenKind::Keyword => tok.text.to_uppercase(),
            TokenKind::Number => NUMERIC.to_string(),
            TokenKind::StringLiteral => VALUE.to_string(),
            TokenKind::Identifier => match role {
                Some(IdentRole::Table) => TABLE.to_string(),
                Some(IdentRole::Placeholder) => tok.text.clone(),
                _ => ATTRIBUTE.to_string(),
            },
            TokenKind::Operator | TokenKind::Punctuation => tok.text.clone(),
        })
        .collect();
    parts.join(" ")
}
