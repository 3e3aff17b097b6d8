//! Schema ingestion from SQLite files or JSON descriptors, value sampling,
//! and the snippets shown next to clarification options.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of distinct values sampled per column.
pub const DEFAULT_SAMPLE_K: usize = 5;
/// Default character budget for schema text in detection prompts.
pub const DEFAULT_PROMPT_BUDGET: usize = 6000;
/// Sample values shown per column in prompt renderings.
const PROMPT_VALUES_PER_COLUMN: usize = 3;
pub const TRUNCATION_MARKER: &str = "[schema truncated:";

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path} is not a valid database file: {message}")]
    Format { path: PathBuf, message: String },
    #[error("invalid schema descriptor at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("unknown column {table}.{column}")]
    UnknownColumn { table: String, column: String },
    #[error("unknown database `{0}`")]
    UnknownDatabase(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub declared_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub sample_values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableInfo {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_count: Option<u64>,
    pub columns: Vec<ColumnInfo>,
}

impl TableInfo {
    pub fn column(&self, name: &str) -> Option<&ColumnInfo> {
        self.columns
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "path", rename_all = "snake_case")]
pub enum SchemaSource {
    DatabaseFile(PathBuf),
    Descriptor(Option<PathBuf>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaModel {
    pub database_id: String,
    pub dialect: String,
    pub tables: Vec<TableInfo>,
    #[serde(skip, default = "in_memory_source")]
    pub source: SchemaSource,
}

fn in_memory_source() -> SchemaSource {
    SchemaSource::Descriptor(None)
}

/// A column with a handful of its values, used as clarification evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaSnippet {
    pub table: String,
    pub column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub values: Vec<String>,
}

impl SchemaModel {
    pub fn table(&self, name: &str) -> Option<&TableInfo> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    /// Looks up `table.column`, case-insensitively.
    pub fn column(&self, table: &str, column: &str) -> Option<(&TableInfo, &ColumnInfo)> {
        let t = self.table(table)?;
        t.column(column).map(|c| (t, c))
    }

    /// Resolves a `table.column` reference.
    pub fn qualified_column(&self, reference: &str) -> Option<(&TableInfo, &ColumnInfo)> {
        let (table, column) = reference.trim().split_once('.')?;
        self.column(table.trim(), column.trim())
    }

    /// Every (table, column) pair in declaration order.
    pub fn columns(&self) -> impl Iterator<Item = (&TableInfo, &ColumnInfo)> {
        self.tables
            .iter()
            .flat_map(|t| t.columns.iter().map(move |c| (t, c)))
    }

    /// Serializes back to the descriptor format.
    pub fn to_descriptor(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("schema model serializes")
    }

    fn validate(&self) -> Result<(), SchemaError> {
        let invalid = |path: String, message: &str| SchemaError::Validation {
            path,
            message: message.to_string(),
        };
        if self.database_id.trim().is_empty() {
            return Err(invalid("database_id".into(), "must be non-empty"));
        }
        let mut tables = HashSet::new();
        for (ti, table) in self.tables.iter().enumerate() {
            if table.name.trim().is_empty() {
                return Err(invalid(format!("tables[{ti}].name"), "must be non-empty"));
            }
            if !tables.insert(table.name.to_lowercase()) {
                return Err(invalid(
                    format!("tables[{ti}].name"),
                    &format!("duplicate table `{}`", table.name),
                ));
            }
            let mut columns = HashSet::new();
            for (ci, column) in table.columns.iter().enumerate() {
                let path = format!("tables[{ti}].columns[{ci}]");
                if column.name.trim().is_empty() {
                    return Err(invalid(format!("{path}.name"), "must be non-empty"));
                }
                if !columns.insert(column.name.to_lowercase()) {
                    return Err(invalid(
                        format!("{path}.name"),
                        &format!("duplicate column `{}`", column.name),
                    ));
                }
                let mut seen = HashSet::new();
                for (vi, v) in column.sample_values.iter().enumerate() {
                    if !seen.insert(v) {
                        return Err(invalid(
                            format!("{path}.sample_values[{vi}]"),
                            &format!("duplicate sample value `{v}`"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

pub(crate) fn render_value(value: ValueRef<'_>) -> Option<String> {
    match value {
        ValueRef::Null => None,
        ValueRef::Integer(i) => Some(i.to_string()),
        ValueRef::Real(r) => Some(r.to_string()),
        ValueRef::Text(t) => Some(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Some(format!("<blob {} bytes>", b.len())),
    }
}

/// Reads every user table of a SQLite file. Each column gets up to `sample_k`
/// distinct non-null values, smallest first by their text rendering.
pub fn ingest_database_file(path: &Path, sample_k: usize) -> Result<SchemaModel, SchemaError> {
    let io_err = |message: String| SchemaError::Io {
        path: path.to_path_buf(),
        message,
    };
    let format_err = |e: rusqlite::Error| SchemaError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let meta = std::fs::metadata(path).map_err(|e| io_err(e.to_string()))?;
    if !meta.is_file() {
        return Err(io_err("not a regular file".into()));
    }
    std::fs::File::open(path).map_err(|e| io_err(e.to_string()))?;

    let conn = Connection::open_with_flags(
        path,
        OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
    )
    .map_err(format_err)?;

    let mut stmt = conn
        .prepare(
            "SELECT name FROM sqlite_master WHERE type = 'table' \
             AND name NOT LIKE 'sqlite_%' ORDER BY rowid",
        )
        .map_err(format_err)?;
    let names = stmt
        .query_map([], |r| r.get::<_, String>(0))
        .and_then(|rows| rows.collect::<Result<Vec<_>, _>>())
        .map_err(format_err)?;

    let mut tables = Vec::with_capacity(names.len());
    for name in names {
        let qt = quote_ident(&name);
        let mut info = conn
            .prepare(&format!("PRAGMA table_info({qt})"))
            .map_err(format_err)?;
        let cols = info
            .query_map([], |r| Ok((r.get::<_, String>(1)?, r.get::<_, String>(2)?)))
            .and_then(|rows| rows.collect::<Result<Vec<_>, _>>())
            .map_err(format_err)?;

        let row_count: i64 = conn
            .query_row(&format!("SELECT COUNT(*) FROM {qt}"), [], |r| r.get(0))
            .map_err(format_err)?;

        let mut columns = Vec::with_capacity(cols.len());
        for (col, declared_type) in cols {
            let qc = quote_ident(&col);
            let mut sample = conn
                .prepare(&format!(
                    "SELECT DISTINCT CAST({qc} AS TEXT) AS v FROM {qt} \
                     WHERE {qc} IS NOT NULL ORDER BY v LIMIT ?1"
                ))
                .map_err(format_err)?;
            let mut rows = sample.query([sample_k as i64]).map_err(format_err)?;
            let mut sample_values = Vec::new();
            while let Some(row) = rows.next().map_err(format_err)? {
                if let Some(v) = render_value(row.get_ref(0).map_err(format_err)?) {
                    if !sample_values.contains(&v) {
                        sample_values.push(v);
                    }
                }
            }
            columns.push(ColumnInfo {
                name: col,
                declared_type,
                description: None,
                sample_values,
            });
        }
        tables.push(TableInfo {
            name,
            row_count: Some(row_count.max(0) as u64),
            columns,
        });
    }

    let database_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(SchemaModel {
        database_id,
        dialect: "sqlite".into(),
        tables,
        source: SchemaSource::DatabaseFile(path.to_path_buf()),
    })
}

/// Builds a model from descriptor JSON text.
pub fn ingest_descriptor(doc: &str) -> Result<SchemaModel, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(doc);
    let model: SchemaModel =
        serde_path_to_error::deserialize(de).map_err(|e| SchemaError::Validation {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    model.validate()?;
    Ok(model)
}

pub fn load_descriptor(path: &Path) -> Result<SchemaModel, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|e| SchemaError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut model = ingest_descriptor(&text)?;
    model.source = SchemaSource::Descriptor(Some(path.to_path_buf()));
    Ok(model)
}

pub fn column_snippet(
    model: &SchemaModel,
    table: &str,
    column: &str,
    k: usize,
) -> Result<SchemaSnippet, SchemaError> {
    let (t, c) = model
        .column(table, column)
        .ok_or_else(|| SchemaError::UnknownColumn {
            table: table.to_string(),
            column: column.to_string(),
        })?;
    Ok(SchemaSnippet {
        table: t.name.clone(),
        column: c.name.clone(),
        description: c.description.clone(),
        values: c.sample_values.iter().take(k).cloned().collect(),
    })
}

fn render_table(table: &TableInfo) -> String {
    let mut out = String::new();
    match table.row_count {
        Some(n) => writeln!(out, "TABLE {} ({n} rows)", table.name),
        None => writeln!(out, "TABLE {}", table.name),
    }
    .unwrap();
    for c in &table.columns {
        write!(out, "  - {} {}", c.name, c.declared_type).unwrap();
        if let Some(d) = &c.description {
            write!(out, " -- {d}").unwrap();
        }
        if !c.sample_values.is_empty() {
            let vals: Vec<_> = c
                .sample_values
                .iter()
                .take(PROMPT_VALUES_PER_COLUMN)
                .map(|v| format!("{v:?}"))
                .collect();
            write!(out, " [e.g. {}]", vals.join(", ")).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Deterministic schema text for prompts. Whole tables are emitted while they
/// fit in `budget` characters; the rest are replaced by a truncation marker.
pub fn render_for_prompt(model: &SchemaModel, budget: usize) -> String {
    let mut out = format!(
        "DATABASE {} (dialect: {})\n",
        model.database_id, model.dialect
    );
    for (i, table) in model.tables.iter().enumerate() {
        let block = render_table(table);
        if out.chars().count() + block.chars().count() > budget {
            let remaining = model.tables.len() - i;
            writeln!(out, "{TRUNCATION_MARKER} {remaining} more table(s) omitted]").unwrap();
            break;
        }
        out.push_str(&block);
    }
    out
}

/// Database files and descriptors found in a directory, keyed by database id.
#[derive(Debug, Clone, Default)]
pub struct SchemaCatalog {
    entries: BTreeMap<String, CatalogEntry>,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub model: std::sync::Arc<SchemaModel>,
    /// SQLite file for execution checks, when one exists.
    pub database_file: Option<PathBuf>,
}

impl SchemaCatalog {
    /// Loads `*.sqlite`/`*.db` files and `*.json` descriptors. A descriptor
    /// takes precedence over a database file with the same id, but the file
    /// is still attached for execution.
    pub fn load_dir(dir: &Path, sample_k: usize) -> Result<Self, SchemaError> {
        let read = std::fs::read_dir(dir).map_err(|e| SchemaError::Io {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut paths: Vec<PathBuf> = read.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();

        let mut files = BTreeMap::new();
        let mut descriptors = BTreeMap::new();
        for path in paths {
            match path.extension().and_then(|e| e.to_str()) {
                Some("sqlite" | "db" | "sqlite3") => {
                    let model = ingest_database_file(&path, sample_k)?;
                    files.insert(model.database_id.clone(), (model, path));
                }
                Some("json") => {
                    let model = load_descriptor(&path)?;
                    descriptors.insert(model.database_id.clone(), model);
                }
                _ => {}
            }
        }

        let mut catalog = SchemaCatalog::default();
        for (id, (model, path)) in files {
            let model = descriptors.remove(&id).unwrap_or(model);
            catalog.insert(model, Some(path));
        }
        for (_, model) in descriptors {
            catalog.insert(model, None);
        }
        Ok(catalog)
    }

    pub fn insert(&mut self, model: SchemaModel, database_file: Option<PathBuf>) {
        self.entries.insert(
            model.database_id.clone(),
            CatalogEntry {
                model: std::sync::Arc::new(model),
                database_file,
            },
        );
    }

    pub fn get(&self, database_id: &str) -> Result<&CatalogEntry, SchemaError> {
        self.entries
            .get(database_id)
            .ok_or_else(|| SchemaError::UnknownDatabase(database_id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_db(dir: &Path) -> PathBuf {
        let path = dir.join("f1.sqlite");
        let conn = Connection::open(&path).unwrap();
        conn.execute_batch(
            "CREATE TABLE drivers(driverId INTEGER PRIMARY KEY, forename TEXT, dob DATE, nationality TEXT);
             CREATE TABLE results(driverId INTEGER, position INTEGER, rank INTEGER);
             INSERT INTO drivers VALUES (1,'Lewis','1985-01-07','British'),(2,'Sebastian','1987-07-03','German'),(3,'Nico','1985-06-27',NULL);
             INSERT INTO results VALUES (1,2,1),(2,1,3),(3,3,2),(1,2,1);",
        )
        .unwrap();
        path
    }

    #[test]
    fn ingests_tables_and_samples_ascending() {
        let dir = tempfile::tempdir().unwrap();
        let path = fixture_db(dir.path());
        let model = ingest_database_file(&path, 2).unwrap();
        assert_eq!(model.database_id, "f1");
        assert_eq!(model.tables.len(), 2);
        let results = model.table("results").unwrap();
        assert!(results.column("position").is_some());
        assert!(results.column("RANK").is_some());
        assert_eq!(results.row_count, Some(4));
        // values read back with direct queries on the fixture above
        assert_eq!(results.column("rank").unwrap().sample_values, ["1", "2"]);
        let nat = &model.table("drivers").unwrap().column("nationality").unwrap();
        assert_eq!(nat.sample_values, ["British", "German"]);
        assert_eq!(ingest_database_file(&path, 2).unwrap(), model);
    }

    #[test]
    fn sample_k_one_takes_smallest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.sqlite");
        let conn = Connection::open(&path).unwrap();
        conn.execute_batch("CREATE TABLE t(v INTEGER); INSERT INTO t VALUES (2),(1),(3);")
            .unwrap();
        let model = ingest_database_file(&path, 1).unwrap();
        assert_eq!(model.tables[0].columns[0].sample_values, ["1"]);
    }

    #[test]
    fn empty_and_invalid_files() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.sqlite");
        std::fs::write(&empty, b"").unwrap();
        assert!(ingest_database_file(&empty, 3).unwrap().tables.is_empty());

        let junk = dir.path().join("junk.sqlite");
        std::fs::write(&junk, b"this is definitely not a sqlite database file....").unwrap();
        assert!(matches!(
            ingest_database_file(&junk, 3),
            Err(SchemaError::Format { .. })
        ));
        assert!(matches!(
            ingest_database_file(&dir.path().join("missing.sqlite"), 3),
            Err(SchemaError::Io { .. })
        ));
    }

    const DESCRIPTOR: &str = r#"{
        "database_id": "california_schools",
        "dialect": "sqlite",
        "tables": [{
            "name": "schools",
            "row_count": 3,
            "columns": [
                {"name": "City", "declared_type": "TEXT", "description": "city of the school", "sample_values": ["Clovis", "Fresno"]},
                {"name": "County", "declared_type": "TEXT", "sample_values": ["Fresno", "Kern"]}
            ]
        }]
    }"#;

    #[test]
    fn descriptor_maps_directly() {
        let model = ingest_descriptor(DESCRIPTOR).unwrap();
        assert_eq!(model.tables.len(), 1);
        let fresno: Vec<_> = model
            .columns()
            .filter(|(_, c)| c.sample_values.iter().any(|v| v == "Fresno"))
            .map(|(_, c)| c.name.as_str())
            .collect();
        assert_eq!(fresno, ["City", "County"]);
    }

    #[test]
    fn descriptor_errors_carry_paths() {
        let dup = r#"{"database_id":"x","dialect":"sqlite","tables":[
            {"name":"a","columns":[]},{"name":"A","columns":[]}]}"#;
        match ingest_descriptor(dup) {
            Err(SchemaError::Validation { path, .. }) => assert_eq!(path, "tables[1].name"),
            other => panic!("{other:?}"),
        }
        let bad = r#"{"database_id":"x","dialect":"sqlite","tables":[
            {"name":"a","columns":[{"declared_type":"TEXT"}]},
            {"name":"b","columns":[{"name": 3}]}]}"#;
        match ingest_descriptor(bad) {
            Err(SchemaError::Validation { path, .. }) => assert_eq!(path, "tables[0].columns[0]"),
            other => panic!("{other:?}"),
        }
        let bad_type = r#"{"database_id":"x","dialect":"sqlite","tables":[
            {"name":"b","columns":[{"name": 3, "declared_type": "INT"}]}]}"#;
        match ingest_descriptor(bad_type) {
            Err(SchemaError::Validation { path, .. }) => {
                assert_eq!(path, "tables[0].columns[0].name")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn snippets() {
        let model = ingest_descriptor(DESCRIPTOR).unwrap();
        let s = column_snippet(&model, "schools", "city", 1).unwrap();
        assert_eq!(s.values, ["Clovis"]);
        assert_eq!(s.description.as_deref(), Some("city of the school"));
        let all = column_snippet(&model, "schools", "County", 10).unwrap();
        assert_eq!(all.values, ["Fresno", "Kern"]);
        assert!(matches!(
            column_snippet(&model, "schools", "nosuch", 3),
            Err(SchemaError::UnknownColumn { .. })
        ));
    }

    #[test]
    fn prompt_rendering() {
        let dir = tempfile::tempdir().unwrap();
        let model = ingest_database_file(&fixture_db(dir.path()), 3).unwrap();
        let text = render_for_prompt(&model, 10_000);
        assert_eq!(text.matches("TABLE drivers").count(), 1);
        assert_eq!(text.matches("TABLE results").count(), 1);
        assert!(!text.contains(TRUNCATION_MARKER));
        assert_eq!(text, render_for_prompt(&model, 10_000));

        let short = render_for_prompt(&model, 40);
        assert!(short.contains(TRUNCATION_MARKER));
        assert!(!short.contains("TABLE drivers"));
    }
}
