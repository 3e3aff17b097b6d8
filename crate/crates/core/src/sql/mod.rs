//! SQL comparison: token-level canonicalization for exact match, and
//! result-set comparison on a SQLite database for execution match.

mod exec;
mod lexer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exec::{execution_match, execution_match_with_timeout, ExecError, ExecSide, DEFAULT_EXEC_TIMEOUT};
pub use lexer::{is_keyword, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("empty SQL text")]
    Empty,
    #[error("{message} at byte {offset}")]
    Lex { offset: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalSql {
    pub tokens: Vec<Token>,
    pub source: String,
}

impl CanonicalSql {
    /// Renders the canonical tokens back to SQL text, one space apart.
    pub fn render(&self) -> String {
        render(&self.tokens)
    }

    /// Whether the outermost query carries an ORDER BY clause.
    pub fn has_outer_order_by(&self) -> bool {
        let mut depth = 0i32;
        let mut prev_order = false;
        for t in &self.tokens {
            match (t.kind, t.text.as_str()) {
                (TokenKind::Punct, "(") => depth += 1,
                (TokenKind::Punct, ")") => depth -= 1,
                (TokenKind::Keyword, "BY") if depth == 0 && prev_order => return true,
                _ => {}
            }
            prev_order = depth == 0 && t.kind == TokenKind::Keyword && t.text == "ORDER";
        }
        false
    }
}

impl PartialEq<CanonicalSql> for Vec<Token> {
    fn eq(&self, other: &CanonicalSql) -> bool {
        *self == other.tokens
    }
}

pub fn render(tokens: &[Token]) -> String {
    tokens.iter().map(Token::render).collect::<Vec<_>>().join(" ")
}

/// Tokenizes and normalizes SQL text: keywords uppercased, identifiers
/// lowercased and unquoted, string literals kept byte-exact, numeric literals
/// normalized, comments and trailing terminators removed. Clause order and
/// parentheses are left alone.
pub fn canonicalize(sql: &str) -> Result<CanonicalSql, SqlError> {
    if sql.trim().is_empty() {
        return Err(SqlError::Empty);
    }
    let mut tokens = lexer::tokenize(sql)?;
    while tokens
        .last()
        .is_some_and(|t| t.kind == TokenKind::Punct && t.text == ";")
    {
        tokens.pop();
    }
    if tokens.is_empty() {
        return Err(SqlError::Empty);
    }
    Ok(CanonicalSql {
        tokens,
        source: sql.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub index: usize,
    pub gold: Option<String>,
    pub pred: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_divergence: Option<Divergence>,
    #[serde(default)]
    pub notes: String,
}

pub fn exact_match(pred: &str, gold: &str) -> Result<ComparisonReport, SqlError> {
    let p = canonicalize(pred)?;
    let g = canonicalize(gold)?;
    let exact = p.tokens == g.tokens;
    let first_divergence = (!exact).then(|| {
        let index = p
            .tokens
            .iter()
            .zip(&g.tokens)
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| p.tokens.len().min(g.tokens.len()));
        Divergence {
            index,
            gold: g.tokens.get(index).map(Token::render),
            pred: p.tokens.get(index).map(Token::render),
        }
    });
    Ok(ComparisonReport {
        exact,
        execution: None,
        first_divergence,
        notes: String::new(),
    })
}

/// Exact match plus, when a database is given, execution match. Errors are
/// turned into notes on a non-matching report rather than propagated.
pub fn compare(pred: &str, gold: &str, db: Option<&std::path::Path>) -> ComparisonReport {
    let mut report = match exact_match(pred, gold) {
        Ok(r) => r,
        Err(e) => ComparisonReport {
            exact: false,
            execution: None,
            first_divergence: None,
            notes: format!("not canonicalizable: {e}"),
        },
    };
    if let Some(db) = db {
        match execution_match(pred, gold, db) {
            Ok(same) => report.execution = Some(same),
            Err(e) => {
                if !report.notes.is_empty() {
                    report.notes.push_str("; ");
                }
                report.notes.push_str(&e.to_string());
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn same(a: &str, b: &str) -> bool {
        exact_match(a, b).unwrap().exact
    }

    #[test]
    fn whitespace_case_terminator() {
        assert!(same("select  A from T;", "SELECT a FROM t"));
        assert!(same("SELECT a\n\tFROM t ;;", "select a from t"));
    }

    #[test]
    fn literal_case_matters() {
        assert!(!same("SELECT * FROM t WHERE x = 'Abc'", "SELECT * FROM t WHERE x = 'abc'"));
        assert!(same("SELECT * FROM T WHERE X = 'abc'", "select * from t where x = 'abc'"));
    }

    #[test]
    fn numeric_normalization() {
        let a = canonicalize("SELECT a FROM t LIMIT 1.0").unwrap();
        let b = canonicalize("SELECT a FROM t LIMIT 1").unwrap();
        assert_eq!(a.tokens, b.tokens);
        assert!(same("SELECT +5", "SELECT 5"));
        assert!(same("SELECT 0.50, 007, .5, 1e+03", "SELECT .5, 7, 0.5, 1E3"));
        assert!(!same("SELECT 1.05", "SELECT 1.5"));
        assert!(!same("SELECT 1 + 2", "SELECT 1 2"));
    }

    #[test]
    fn divergence_points_at_identifier() {
        let gold = "SELECT COUNT(*) FROM results WHERE rank = 2";
        let pred = "SELECT COUNT(*) FROM results WHERE position = 2";
        let r = exact_match(pred, gold).unwrap();
        assert!(!r.exact);
        let d = r.first_divergence.unwrap();
        assert_eq!(d.gold.as_deref(), Some("rank"));
        assert_eq!(d.pred.as_deref(), Some("position"));
        assert_eq!(d.index, 8);

        let longer = exact_match("SELECT a FROM t LIMIT 1", "SELECT a FROM t").unwrap();
        let d = longer.first_divergence.unwrap();
        assert_eq!((d.index, d.gold, d.pred.as_deref()), (4, None, Some("LIMIT")));
        assert!(exact_match(gold, gold).unwrap().first_divergence.is_none());
    }

    #[test]
    fn lex_errors_and_empty() {
        assert!(matches!(canonicalize("SELECT 'abc"), Err(SqlError::Lex { offset: 7, .. })));
        assert!(matches!(canonicalize("SELECT 1 /* open"), Err(SqlError::Lex { offset: 9, .. })));
        assert_eq!(canonicalize("  "), Err(SqlError::Empty));
        assert_eq!(canonicalize(";"), Err(SqlError::Empty));
        assert!(exact_match("SELECT 'x", "SELECT 1").is_err());
    }

    #[test]
    fn outer_order_by() {
        assert!(canonicalize("select a from t order by a").unwrap().has_outer_order_by());
        assert!(!canonicalize("select a from (select a from t order by a)").unwrap().has_outer_order_by());
        assert!(!canonicalize("select \"order\", by from t").unwrap().has_outer_order_by());
    }

    #[test]
    fn compare_reports_lex_failure_as_note() {
        let r = compare("SELECT 'x", "SELECT 1", None);
        assert!(!r.exact);
        assert!(r.notes.contains("not canonicalizable"));
    }
}
