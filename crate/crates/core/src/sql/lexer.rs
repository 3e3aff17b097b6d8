use serde::{Deserialize, Serialize};

use super::SqlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Keyword,
    Identifier,
    Literal,
    Operator,
    Punct,
}

/// A canonical token. String literals keep their quotes and exact bytes;
/// identifiers are stored unquoted and lowercased.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
}

impl Token {
    fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        Token {
            kind,
            text: text.into(),
        }
    }

    /// Text that lexes back to this same token.
    pub fn render(&self) -> String {
        match self.kind {
            TokenKind::Identifier if !needs_quotes(&self.text) => self.text.clone(),
            TokenKind::Identifier => format!("\"{}\"", self.text.replace('"', "\"\"")),
            _ => self.text.clone(),
        }
    }
}

fn needs_quotes(ident: &str) -> bool {
    let mut chars = ident.chars();
    let head_ok = chars
        .next()
        .is_some_and(|c| c == '_' || (c.is_alphabetic() && !c.is_uppercase()));
    !head_ok
        || !ident
            .chars()
            .all(|c| c == '_' || c.is_numeric() || (c.is_alphabetic() && !c.is_uppercase()))
        || ident.chars().any(|c| c.to_lowercase().ne(std::iter::once(c)))
        || is_keyword(ident)
}

const KEYWORDS: &[&str] = &[
    "ABORT", "ACTION", "ADD", "AFTER", "ALL", "ALTER", "ALWAYS", "ANALYZE", "AND", "AS", "ASC",
    "ATTACH", "AUTOINCREMENT", "BEFORE", "BEGIN", "BETWEEN", "BY", "CASCADE", "CASE", "CAST",
    "CHECK", "COLLATE", "COLUMN", "COMMIT", "CONFLICT", "CONSTRAINT", "CREATE", "CROSS",
    "CURRENT", "CURRENT_DATE", "CURRENT_TIME", "CURRENT_TIMESTAMP", "DATABASE", "DEFAULT",
    "DEFERRABLE", "DEFERRED", "DELETE", "DESC", "DETACH", "DISTINCT", "DO", "DROP", "EACH",
    "ELSE", "END", "ESCAPE", "EXCEPT", "EXCLUDE", "EXCLUSIVE", "EXISTS", "EXPLAIN", "FAIL",
    "FILTER", "FIRST", "FOLLOWING", "FOR", "FOREIGN", "FROM", "FULL", "GENERATED", "GLOB",
    "GROUP", "GROUPS", "HAVING", "IF", "IGNORE", "IMMEDIATE", "IN", "INDEX", "INDEXED",
    "INITIALLY", "INNER", "INSERT", "INSTEAD", "INTERSECT", "INTO", "IS", "ISNULL", "JOIN",
    "KEY", "LAST", "LEFT", "LIKE", "LIMIT", "MATCH", "MATERIALIZED", "NATURAL", "NO", "NOT",
    "NOTHING", "NOTNULL", "NULL", "NULLS", "OF", "OFFSET", "ON", "OR", "ORDER", "OTHERS",
    "OUTER", "OVER", "PARTITION", "PLAN", "PRAGMA", "PRECEDING", "PRIMARY", "QUERY", "RAISE",
    "RANGE", "RECURSIVE", "REFERENCES", "REGEXP", "REINDEX", "RELEASE", "RENAME", "REPLACE",
    "RESTRICT", "RETURNING", "RIGHT", "ROLLBACK", "ROW", "ROWS", "SAVEPOINT", "SELECT", "SET",
    "TABLE", "TEMP", "TEMPORARY", "THEN", "TIES", "TO", "TRANSACTION", "TRIGGER", "UNBOUNDED",
    "UNION", "UNIQUE", "UPDATE", "USING", "VACUUM", "VALUES", "VIEW", "VIRTUAL", "WHEN",
    "WHERE", "WINDOW", "WITH", "WITHOUT",
];

pub fn is_keyword(word: &str) -> bool {
    let upper = word.to_ascii_uppercase();
    KEYWORDS.binary_search(&upper.as_str()).is_ok()
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Canonical text of a numeric literal: no leading zeros in the integer part,
/// no trailing zeros (or bare point) in the fraction, lowercase exponent
/// without `+` or leading zeros.
fn normalize_number(raw: &str) -> String {
    let lower = raw.to_ascii_lowercase();
    if lower.starts_with("0x") {
        return lower;
    }
    let (mantissa, exponent) = match lower.split_once('e') {
        Some((m, e)) => (m, Some(e)),
        None => (lower.as_str(), None),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let int = int.trim_start_matches('0');
    let int = if int.is_empty() { "0" } else { int };
    let frac = frac.trim_end_matches('0');
    let mut out = int.to_string();
    if !frac.is_empty() {
        out.push('.');
        out.push_str(frac);
    }
    if let Some(e) = exponent {
        let (sign, digits) = match e.strip_prefix('-') {
            Some(d) => ("-", d),
            None => ("", e.strip_prefix('+').unwrap_or(e)),
        };
        let digits = digits.trim_start_matches('0');
        let digits = if digits.is_empty() { "0" } else { digits };
        if digits != "0" {
            out.push('e');
            out.push_str(sign);
            out.push_str(digits);
        }
    }
    out
}

/// Whether a `+` at this point is a unary sign rather than addition.
fn unary_position(prev: Option<&Token>) -> bool {
    match prev {
        None => true,
        Some(t) => match t.kind {
            TokenKind::Operator | TokenKind::Keyword => true,
            TokenKind::Punct => t.text == "(" || t.text == ",",
            TokenKind::Identifier | TokenKind::Literal => false,
        },
    }
}

pub(crate) fn tokenize(sql: &str) -> Result<Vec<Token>, SqlError> {
    let bytes: Vec<(usize, char)> = sql.char_indices().collect();
    let at = |i: usize| bytes.get(i).map(|&(_, c)| c);
    let offset = |i: usize| bytes.get(i).map(|&(o, _)| o).unwrap_or(sql.len());
    let lex_err = |i: usize, message: &str| SqlError::Lex {
        offset: offset(i),
        message: message.to_string(),
    };

    let mut tokens: Vec<Token> = Vec::new();
    let mut i = 0;
    while let Some(c) = at(i) {
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '-' && at(i + 1) == Some('-') {
            while at(i).is_some_and(|c| c != '\n') {
                i += 1;
            }
            continue;
        }
        if c == '/' && at(i + 1) == Some('*') {
            let start = i;
            i += 2;
            loop {
                match (at(i), at(i + 1)) {
                    (Some('*'), Some('/')) => {
                        i += 2;
                        break;
                    }
                    (Some(_), _) => i += 1,
                    (None, _) => return Err(lex_err(start, "unterminated block comment")),
                }
            }
            continue;
        }
        // string literal, kept verbatim; blob literals x'..' too
        let blob = matches!(c, 'x' | 'X') && at(i + 1) == Some('\'');
        if c == '\'' || blob {
            let start = i;
            i += if blob { 2 } else { 1 };
            loop {
                match at(i) {
                    Some('\'') if at(i + 1) == Some('\'') => i += 2,
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                    None => return Err(lex_err(start, "unterminated string literal")),
                }
            }
            tokens.push(Token::new(TokenKind::Literal, &sql[offset(start)..offset(i)]));
            continue;
        }
        // quoted identifiers
        if let Some(close) = match c {
            '"' => Some('"'),
            '`' => Some('`'),
            '[' => Some(']'),
            _ => None,
        } {
            let start = i;
            i += 1;
            let mut name = String::new();
            loop {
                match at(i) {
                    Some(ch) if ch == close && close != ']' && at(i + 1) == Some(close) => {
                        name.push(close);
                        i += 2;
                    }
                    Some(ch) if ch == close => {
                        i += 1;
                        break;
                    }
                    Some(ch) => {
                        name.push(ch);
                        i += 1;
                    }
                    None => return Err(lex_err(start, "unterminated quoted identifier")),
                }
            }
            tokens.push(Token::new(TokenKind::Identifier, name.to_lowercase()));
            continue;
        }
        let number_start = c.is_ascii_digit() || (c == '.' && at(i + 1).is_some_and(|d| d.is_ascii_digit()));
        if number_start {
            let start = i;
            if c == '0' && matches!(at(i + 1), Some('x' | 'X')) && at(i + 2).is_some_and(|d| d.is_ascii_hexdigit()) {
                i += 2;
                while at(i).is_some_and(|d| d.is_ascii_hexdigit()) {
                    i += 1;
                }
            } else {
                while at(i).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                }
                if at(i) == Some('.') {
                    i += 1;
                    while at(i).is_some_and(|d| d.is_ascii_digit()) {
                        i += 1;
                    }
                }
                if matches!(at(i), Some('e' | 'E')) {
                    let sign = usize::from(matches!(at(i + 1), Some('+' | '-')));
                    if at(i + 1 + sign).is_some_and(|d| d.is_ascii_digit()) {
                        i += 1 + sign;
                        while at(i).is_some_and(|d| d.is_ascii_digit()) {
                            i += 1;
                        }
                    }
                }
            }
            let raw = &sql[offset(start)..offset(i)];
            tokens.push(Token::new(TokenKind::Literal, normalize_number(raw)));
            continue;
        }
        if is_ident_start(c) {
            let start = i;
            while at(i).is_some_and(is_ident_char) {
                i += 1;
            }
            let word = &sql[offset(start)..offset(i)];
            if is_keyword(word) {
                tokens.push(Token::new(TokenKind::Keyword, word.to_ascii_uppercase()));
            } else {
                tokens.push(Token::new(TokenKind::Identifier, word.to_lowercase()));
            }
            continue;
        }
        if c == '+' && unary_position(tokens.last()) {
            let next = at(i + 1);
            let next2 = at(i + 2);
            let digit_follows = next.is_some_and(|d| d.is_ascii_digit())
                || (next == Some('.') && next2.is_some_and(|d| d.is_ascii_digit()));
            if digit_follows {
                i += 1;
                continue;
            }
        }
        let two: String = [Some(c), at(i + 1)].into_iter().flatten().collect();
        if ["<=", ">=", "<>", "!=", "==", "||", "<<", ">>", "->"].contains(&two.as_str()) {
            tokens.push(Token::new(TokenKind::Operator, two));
            i += 2;
            continue;
        }
        let kind = match c {
            '=' | '<' | '>' | '+' | '-' | '*' | '/' | '%' | '&' | '|' | '~' | '!' => TokenKind::Operator,
            _ => TokenKind::Punct,
        };
        tokens.push(Token::new(kind, c.to_string()));
        i += 1;
    }
    Ok(tokens)
}
