use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use rusqlite::types::Value;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::canonicalize;

pub const DEFAULT_EXEC_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecSide {
    Pred,
    Gold,
    Database,
}

impl fmt::Display for ExecSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecSide::Pred => "predicted SQL",
            ExecSide::Gold => "gold SQL",
            ExecSide::Database => "database",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{side}: {message}")]
pub struct ExecError {
    pub side: ExecSide,
    pub message: String,
}

impl ExecError {
    fn new(side: ExecSide, message: impl Into<String>) -> Self {
        ExecError {
            side,
            message: message.into(),
        }
    }
}

/// Cell value with integral reals folded into integers, so `1.0` and `1`
/// compare equal. Ordering only serves to sort rows for multiset comparison.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
enum Cell {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl From<Value> for Cell {
    fn from(v: Value) -> Self {
        match v {
            Value::Null => Cell::Null,
            Value::Integer(i) => Cell::Int(i),
            Value::Real(r) if r.fract() == 0.0 && r.abs() < 9.0e15 => Cell::Int(r as i64),
            Value::Real(r) => Cell::Real(r),
            Value::Text(t) => Cell::Text(t),
            Value::Blob(b) => Cell::Blob(b),
        }
    }
}

fn open(db: &Path, timeout: Duration) -> Result<Connection, ExecError> {
    if !db.is_file() {
        return Err(ExecError::new(
            ExecSide::Database,
            format!("{} does not exist", db.display()),
        ));
    }
    let conn = Connection::open_with_flags(
        db,
        OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
    )
    .map_err(|e| ExecError::new(ExecSide::Database, e.to_string()))?;
    let deadline = Instant::now() + timeout;
    conn.progress_handler(1000, Some(move || Instant::now() > deadline))
        .map_err(|e| ExecError::new(ExecSide::Database, e.to_string()))?;
    Ok(conn)
}

fn run(conn: &Connection, sql: &str, side: ExecSide) -> Result<(usize, Vec<Vec<Cell>>), ExecError> {
    let err = |e: rusqlite::Error| {
        let message = match e {
            rusqlite::Error::SqliteFailure(f, _) if f.code == rusqlite::ErrorCode::OperationInterrupted => {
                "execution timed out".to_string()
            }
            rusqlite::Error::MultipleStatement => "expected a single statement".to_string(),
            other => other.to_string(),
        };
        ExecError::new(side, message)
    };
    let mut stmt = conn.prepare(sql.trim().trim_end_matches(';')).map_err(err)?;
    if !stmt.readonly() {
        return Err(ExecError::new(side, "statement is not read-only"));
    }
    let arity = stmt.column_count();
    let rows = stmt
        .query_map([], |row| {
            (0..arity)
                .map(|i| row.get::<_, Value>(i).map(Cell::from))
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(err)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    Ok((arity, rows))
}

fn sort_rows(rows: &mut [Vec<Cell>]) {
    rows.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
}

pub fn execution_match(pred: &str, gold: &str, db: &Path) -> Result<bool, ExecError> {
    execution_match_with_timeout(pred, gold, db, DEFAULT_EXEC_TIMEOUT)
}

/// Runs both queries read-only and compares their results: as sequences when
/// the gold query has an outer ORDER BY, as multisets otherwise. Column
/// names are ignored; column counts must agree.
pub fn execution_match_with_timeout(
    pred: &str,
    gold: &str,
    db: &Path,
    timeout: Duration,
) -> Result<bool, ExecError> {
    let ordered = canonicalize(gold)
        .map_err(|e| ExecError::new(ExecSide::Gold, e.to_string()))?
        .has_outer_order_by();
    canonicalize(pred).map_err(|e| ExecError::new(ExecSide::Pred, e.to_string()))?;

    let conn = open(db, timeout)?;
    let (gold_arity, mut gold_rows) = run(&conn, gold, ExecSide::Gold)?;
    let (pred_arity, mut pred_rows) = run(&conn, pred, ExecSide::Pred)?;
    if gold_arity != pred_arity || gold_rows.len() != pred_rows.len() {
        return Ok(false);
    }
    if !ordered {
        sort_rows(&mut gold_rows);
        sort_rows(&mut pred_rows);
    }
    Ok(gold_rows == pred_rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> tempfile::NamedTempFile {
        let file = tempfile::NamedTempFile::new().unwrap();
        let conn = Connection::open(file.path()).unwrap();
        conn.execute_batch(
            "CREATE TABLE results (driverId INTEGER, position INTEGER, rank INTEGER, points REAL);
             INSERT INTO results VALUES (1, 1, 2, 25.0), (2, 2, 1, 18.0), (3, 3, 2, 15.5), (4, 4, 3, 18.0), (5, 5, 2, 1.0);",
        )
        .unwrap();
        file
    }

    #[test]
    fn multiset_vs_sequence() {
        let db = fixture();
        let p = db.path();
        assert!(execution_match("SELECT driverId FROM results ORDER BY driverId DESC", "SELECT driverId FROM results", p).unwrap());
        assert!(!execution_match("SELECT driverId FROM results ORDER BY driverId DESC", "SELECT driverId FROM results ORDER BY driverId", p).unwrap());
        assert!(execution_match("SELECT COUNT(*) FROM results WHERE rank = 2", "SELECT COUNT(*) FROM results WHERE driverId IN (1, 3, 5)", p).unwrap());
        assert!(!execution_match("SELECT COUNT(*) FROM results WHERE position = 2", "SELECT COUNT(*) FROM results WHERE rank = 2", p).unwrap());
    }

    #[test]
    fn integral_reals_and_arity() {
        let db = fixture();
        let p = db.path();
        assert!(execution_match("SELECT 25", "SELECT points FROM results WHERE driverId = 1", p).unwrap());
        assert!(!execution_match("SELECT driverId, rank FROM results", "SELECT driverId FROM results", p).unwrap());
        assert!(execution_match("SELECT a.x AS q FROM (SELECT 1 AS x) a", "SELECT 1 AS different_name", p).unwrap());
    }

    #[test]
    fn duplicates_count() {
        let db = fixture();
        let p = db.path();
        assert!(!execution_match("SELECT DISTINCT points FROM results", "SELECT points FROM results", p).unwrap());
    }

    #[test]
    fn errors_name_the_side() {
        let db = fixture();
        let p = db.path();
        let e = execution_match("SELECT nope FROM results", "SELECT 1", p).unwrap_err();
        assert_eq!(e.side, ExecSide::Pred);
        let e = execution_match("SELECT 1", "SELECT * FROM missing", p).unwrap_err();
        assert_eq!(e.side, ExecSide::Gold);
        let e = execution_match("DELETE FROM results", "SELECT 1", p).unwrap_err();
        assert_eq!(e.side, ExecSide::Pred);
        let e = execution_match("SELECT 1; SELECT 2", "SELECT 1", p).unwrap_err();
        assert_eq!(e.side, ExecSide::Pred);
        let e = execution_match("SELECT 1", "SELECT 1", Path::new("/nonexistent/x.sqlite")).unwrap_err();
        assert_eq!(e.side, ExecSide::Database);
    }

    #[test]
    fn runaway_query_times_out() {
        let db = fixture();
        let slow = "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) SELECT COUNT(*) FROM c";
        let started = Instant::now();
        let e = execution_match_with_timeout(slow, "SELECT 1", db.path(), Duration::from_millis(200)).unwrap_err();
        assert_eq!(e.side, ExecSide::Pred);
        assert!(e.message.contains("timed out"), "{e}");
        assert!(started.elapsed() < Duration::from_secs(5));
    }
}
