//! Session service behind the HTTP API. Transport-agnostic: every operation
//! returns either a serializable payload or an [`ApiError`] whose code fixes
//! the HTTP status.

use std::sync::Arc;

use dashmap::DashMap;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::{
    ClarificationQuestion, DetectedAmbiguity, Engine, EngineError, Session, SessionState, UserAnswer,
};
use crate::eval::EvalCase;
use crate::hook::SqlGenerator;
use crate::schema::SchemaCatalog;
use crate::sql::{compare, ComparisonReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiErrorCode {
    NotFound,
    Conflict,
    Validation,
    Upstream,
    Internal,
}

impl ApiErrorCode {
    pub fn status(self) -> u16 {
        match self {
            ApiErrorCode::NotFound => 404,
            ApiErrorCode::Conflict => 409,
            ApiErrorCode::Validation => 422,
            ApiErrorCode::Upstream => 502,
            ApiErrorCode::Internal => 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{message}")]
pub struct ApiError {
    pub code: ApiErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(code: ApiErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn status(&self) -> u16 {
        self.code.status()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        use ApiErrorCode::*;
        let message = e.to_string();
        match e {
            EngineError::InvalidState { .. } => ApiError::new(Conflict, message),
            EngineError::Unanswered(ids) => ApiError::new(Validation, message).with_detail(json!({ "unanswered": ids })),
            EngineError::StaleAnswer(_)
            | EngineError::InvalidOption { .. }
            | EngineError::DuplicateAnswer(_)
            | EngineError::Contract(_) => ApiError::new(Validation, message),
            EngineError::DetectionFailure(_)
            | EngineError::RefinementFailure(_)
            | EngineError::ClarificationFailure(_) => ApiError::new(Upstream, message),
            EngineError::MaxIterationsExceeded(_) | EngineError::Provider(_) => ApiError::new(Internal, message),
        }
    }
}

/// A bundled question the UI can prefill.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleEntry {
    pub id: String,
    pub label: String,
    pub question: String,
    pub dialect: String,
    pub database_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold_sql: Option<String>,
}

impl ExampleEntry {
    pub fn from_case(case: &EvalCase, dialect: &str) -> Self {
        ExampleEntry {
            id: case.id.clone(),
            label: format!("{} ({}, {})", case.question, case.source.label(), case.database_id),
            question: case.question.clone(),
            dialect: dialect.to_string(),
            database_id: case.database_id.clone(),
            gold_sql: Some(case.gold_sql.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseInfo {
    pub id: String,
    pub dialect: String,
    pub tables: Vec<String>,
    pub executable: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub question: String,
    #[serde(default)]
    pub dialect: Option<String>,
    pub database_id: String,
    #[serde(default)]
    pub example_id: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitAnswersRequest {
    #[serde(default)]
    pub answers: Vec<UserAnswer>,
    #[serde(default)]
    pub additional_constraints: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompareRequest {
    pub pred: String,
    pub gold: String,
    #[serde(default)]
    pub database_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub state: SessionState,
    pub iteration: u32,
    pub database_id: String,
    pub dialect: String,
    pub original_question: String,
    pub rewritten_question: String,
    /// Findings of the latest detection pass.
    pub detected: Vec<DetectedAmbiguity>,
    pub open_questions: Vec<ClarificationQuestion>,
    pub constraints: Vec<String>,
    pub preference_snapshot: Value,
    pub has_gold: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sql: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultComparison {
    pub gold_sql: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub without: Option<ComparisonReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub with: Option<ComparisonReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub rewritten_question: String,
    pub preference_snapshot: Value,
    pub generated_sql_without: SideResult,
    pub generated_sql_with: SideResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ResultComparison>,
}

struct Slot {
    session: Session,
    gold_sql: Option<String>,
    result: Option<SessionResult>,
}

/// In-memory sessions. The map allows concurrent access across sessions;
/// each slot's mutex keeps one writer per session.
#[derive(Default)]
pub struct SessionStore {
    sessions: DashMap<String, Arc<Mutex<Slot>>>,
}

impl SessionStore {
    fn insert(&self, slot: Slot) -> String {
        let id = slot.session.id.clone();
        self.sessions.insert(id.clone(), Arc::new(Mutex::new(slot)));
        id
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Slot>>, ApiError> {
        self.sessions
            .get(id)
            .map(|s| s.value().clone())
            .ok_or_else(|| ApiError::new(ApiErrorCode::NotFound, format!("unknown session `{id}`")))
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }
}

fn summarize(slot: &Slot) -> SessionSummary {
    let s = &slot.session;
    SessionSummary {
        id: s.id.clone(),
        state: s.state,
        iteration: s.iteration,
        database_id: s.schema.database_id.clone(),
        dialect: s.dialect.clone(),
        original_question: s.original_question.clone(),
        rewritten_question: s.rewritten_question.clone(),
        detected: s.detection_history.last().cloned().unwrap_or_default(),
        open_questions: s.open_questions.clone(),
        constraints: s.constraint_log.clone(),
        preference_snapshot: s.preference_tree.snapshot(),
        has_gold: slot.gold_sql.is_some(),
        failure: s.failure.clone(),
    }
}

pub struct Service {
    engine: Arc<Engine>,
    catalog: Arc<SchemaCatalog>,
    generator: Arc<dyn SqlGenerator>,
    examples: Vec<ExampleEntry>,
    store: SessionStore,
}

impl Service {
    pub fn new(
        engine: Arc<Engine>,
        catalog: Arc<SchemaCatalog>,
        generator: Arc<dyn SqlGenerator>,
        examples: Vec<ExampleEntry>,
    ) -> Self {
        Service {
            engine,
            catalog,
            generator,
            examples,
            store: SessionStore::default(),
        }
    }

    /// Example entries for dataset cases whose database is in the catalog.
    pub fn examples_from_cases(catalog: &SchemaCatalog, cases: &[EvalCase]) -> Vec<ExampleEntry> {
        cases
            .iter()
            .filter_map(|c| {
                let entry = catalog.get(&c.database_id).ok()?;
                Some(ExampleEntry::from_case(c, &entry.model.dialect))
            })
            .collect()
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    pub fn examples(&self) -> &[ExampleEntry] {
        &self.examples
    }

    pub fn databases(&self) -> Vec<DatabaseInfo> {
        self.catalog
            .entries()
            .map(|e| DatabaseInfo {
                id: e.model.database_id.clone(),
                dialect: e.model.dialect.clone(),
                tables: e.model.tables.iter().map(|t| t.name.clone()).collect(),
                executable: e.database_file.is_some(),
            })
            .collect()
    }

    pub fn create_session(&self, req: &CreateSessionRequest) -> Result<SessionSummary, ApiError> {
        let question = req.question.trim();
        if question.is_empty() {
            return Err(ApiError::new(ApiErrorCode::Validation, "question must not be empty"));
        }
        let entry = self
            .catalog
            .get(&req.database_id)
            .map_err(|e| ApiError::new(ApiErrorCode::NotFound, e.to_string()))?;
        let example = match &req.example_id {
            Some(id) => Some(
                self.examples
                    .iter()
                    .find(|e| &e.id == id)
                    .ok_or_else(|| ApiError::new(ApiErrorCode::NotFound, format!("unknown example `{id}`")))?,
            ),
            None => self
                .examples
                .iter()
                .find(|e| e.question == question && e.database_id == req.database_id),
        };
        let gold_sql = example
            .filter(|e| e.question == question && e.database_id == req.database_id)
            .and_then(|e| e.gold_sql.clone());
        let dialect = req
            .dialect
            .as_deref()
            .filter(|d| !d.trim().is_empty())
            .unwrap_or(&entry.model.dialect);

        let mut session = Session::new(question, entry.model.clone(), dialect);
        let started = self.engine.start(&mut session);
        if let Err(e) = started {
            if session.state != SessionState::Failed {
                return Err(e.into());
            }
            if matches!(e, EngineError::DetectionFailure(_)) {
                return Err(e.into());
            }
        }
        let slot = Slot {
            session,
            gold_sql,
            result: None,
        };
        let summary = summarize(&slot);
        self.store.insert(slot);
        Ok(summary)
    }

    pub fn get_session(&self, id: &str) -> Result<SessionSummary, ApiError> {
        let slot = self.store.get(id)?;
        let guard = slot.lock();
        Ok(summarize(&guard))
    }

    /// Applies one round. A session that ends Failed (iteration cap, no
    /// usable clarification) is returned normally with its failure reason.
    pub fn submit_answers(&self, id: &str, req: &SubmitAnswersRequest) -> Result<SessionSummary, ApiError> {
        let slot = self.store.get(id)?;
        let mut guard = slot.lock();
        match self
            .engine
            .apply_answers(&mut guard.session, &req.answers, &req.additional_constraints)
        {
            Ok(()) => Ok(summarize(&guard)),
            Err(EngineError::MaxIterationsExceeded(_) | EngineError::ClarificationFailure(_))
                if guard.session.state == SessionState::Failed =>
            {
                Ok(summarize(&guard))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn generate(&self, session: &Session, question: &str) -> SideResult {
        match self.generator.generate(question, &session.schema, &session.dialect) {
            Ok(sql) => SideResult { sql: Some(sql), error: None },
            Err(e) => SideResult {
                sql: None,
                error: Some(e.to_string()),
            },
        }
    }

    /// SQL for the original and the rewritten question, compared against
    /// the gold query when the session came from an example. Complete
    /// results are cached; a side that failed is retried on the next call.
    pub fn get_result(&self, id: &str) -> Result<SessionResult, ApiError> {
        let slot = self.store.get(id)?;
        let mut guard = slot.lock();
        if guard.session.state != SessionState::Resolved {
            return Err(ApiError::new(
                ApiErrorCode::Conflict,
                format!("session is {}, expected resolved", guard.session.state),
            ));
        }
        if let Some(cached) = &guard.result {
            return Ok(cached.clone());
        }
        let session = &guard.session;
        let without = self.generate(session, &session.original_question);
        let with = self.generate(session, &session.rewritten_question);
        let db_file = self
            .catalog
            .get(&session.schema.database_id)
            .ok()
            .and_then(|e| e.database_file.clone());
        let comparison = guard.gold_sql.as_ref().map(|gold| ResultComparison {
            gold_sql: gold.clone(),
            without: without.sql.as_deref().map(|p| compare(p, gold, db_file.as_deref())),
            with: with.sql.as_deref().map(|p| compare(p, gold, db_file.as_deref())),
        });
        let result = SessionResult {
            rewritten_question: session.rewritten_question.clone(),
            preference_snapshot: session.preference_tree.snapshot(),
            generated_sql_without: without,
            generated_sql_with: with,
            comparison,
        };
        let failed_sides = [&result.generated_sql_without, &result.generated_sql_with]
            .iter()
            .filter(|s| s.error.is_some())
            .count();
        match failed_sides {
            0 => {
                guard.result = Some(result.clone());
                Ok(result)
            }
            1 => Ok(result),
            _ => Err(ApiError::new(ApiErrorCode::Upstream, "generator failed for both questions")
                .with_detail(serde_json::to_value(&result).unwrap_or(Value::Null))),
        }
    }

    pub fn compare(&self, req: &CompareRequest) -> Result<ComparisonReport, ApiError> {
        if req.pred.trim().is_empty() || req.gold.trim().is_empty() {
            return Err(ApiError::new(ApiErrorCode::Validation, "pred and gold must not be empty"));
        }
        let db_file = match &req.database_id {
            Some(id) => self
                .catalog
                .get(id)
                .map_err(|e| ApiError::new(ApiErrorCode::NotFound, e.to_string()))?
                .database_file
                .clone(),
            None => None,
        };
        Ok(compare(&req.pred, &req.gold, db_file.as_deref()))
    }

    /// Summaries of every session, for writing to disk on shutdown.
    pub fn snapshot(&self) -> Value {
        let mut all: Vec<SessionSummary> = self
            .store
            .sessions
            .iter()
            .map(|e| summarize(&e.value().lock()))
            .collect();
        all.sort_by(|a, b| a.id.cmp(&b.id));
        json!({ "sessions": all })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineConfig;
    use crate::hook::{GeneratorScriptEntry, ScriptedGenerator};
    use crate::llm::{Gateway, ScriptEntry, Stage};
    use crate::schema::ingest_descriptor;

    fn entry(stage: Stage, m: &str, r: &str) -> ScriptEntry {
        ScriptEntry {
            stage,
            match_substring: m.into(),
            response: r.into(),
            consume_once: false,
        }
    }

    fn service() -> Service {
        let gw = Gateway::scripted(vec![
            entry(
                Stage::Detect,
                "QUESTION: Who is the best driver",
                r#"[{"phrase":"best","category":"unclear_schema_reference","rationale":"results.position or results.points"}]"#,
            ),
            entry(Stage::Detect, "QUESTION: List drivers", "[]"),
            entry(Stage::Detect, "QUESTION: Drivers with the most points", "[]"),
            entry(
                Stage::Clarify,
                "AMBIGUOUS PHRASE: \"best\"",
                r#"{"question":"What makes a driver best?","options":[
                    {"display":"Most points","resolution":"Rank drivers by total points.","column":"results.points"},
                    {"display":"Best position","resolution":"Rank drivers by best finishing position.","column":"results.position"}]}"#,
            ),
            entry(Stage::Refine, "Rank drivers by total points.", "Drivers with the most points"),
        ])
        .unwrap();
        let engine = Arc::new(Engine::new(Arc::new(gw), EngineConfig::default()));
        let mut catalog = SchemaCatalog::default();
        catalog.insert(
            ingest_descriptor(
                r#"{"database_id":"f1","dialect":"sqlite","tables":[{"name":"results","columns":[
                    {"name":"position","declared_type":"INTEGER"},{"name":"points","declared_type":"REAL"}]}]}"#,
            )
            .unwrap(),
            None,
        );
        let generator = ScriptedGenerator::new(vec![
            GeneratorScriptEntry { match_substring: "most points".into(), sql: "SELECT MAX(points) FROM results".into() },
            GeneratorScriptEntry { match_substring: "best driver".into(), sql: "SELECT MIN(position) FROM results".into() },
        ]);
        let examples = vec![ExampleEntry {
            id: "ex1".into(),
            label: "best".into(),
            question: "Who is the best driver?".into(),
            dialect: "sqlite".into(),
            database_id: "f1".into(),
            gold_sql: Some("select max(points) from results".into()),
        }];
        Service::new(engine, Arc::new(catalog), Arc::new(generator), examples)
    }

    fn create(svc: &Service, q: &str, db: &str) -> Result<SessionSummary, ApiError> {
        svc.create_session(&CreateSessionRequest {
            question: q.into(),
            dialect: None,
            database_id: db.into(),
            example_id: None,
        })
    }

    #[test]
    fn create_errors() {
        let svc = service();
        assert_eq!(create(&svc, "  ", "f1").unwrap_err().status(), 422);
        assert_eq!(create(&svc, "List drivers", "nope").unwrap_err().status(), 404);
        assert_eq!(svc.get_session("missing").unwrap_err().status(), 404);
    }

    #[test]
    fn clean_question_resolves_immediately() {
        let svc = service();
        let s = create(&svc, "List drivers", "f1").unwrap();
        assert_eq!(s.state, SessionState::Resolved);
        assert!(s.open_questions.is_empty());
        assert!(!s.has_gold);
        let r = svc.get_result(&s.id);
        // no scripted SQL for this question: both sides fail
        assert_eq!(r.unwrap_err().status(), 502);
    }

    #[test]
    fn full_round_with_gold() {
        let svc = service();
        let s = create(&svc, "Who is the best driver?", "f1").unwrap();
        assert_eq!(s.state, SessionState::AwaitingAnswers);
        assert!(s.has_gold);
        assert_eq!(svc.get_result(&s.id).unwrap_err().status(), 409);

        let q = &s.open_questions[0];
        let stale = SubmitAnswersRequest {
            answers: vec![UserAnswer::new("q9-9", "A")],
            additional_constraints: vec![],
        };
        assert_eq!(svc.submit_answers(&s.id, &stale).unwrap_err().status(), 422);
        let partial = SubmitAnswersRequest::default();
        let err = svc.submit_answers(&s.id, &partial).unwrap_err();
        assert_eq!(err.status(), 422);
        assert_eq!(err.detail.unwrap()["unanswered"][0], q.id.as_str());

        let req = SubmitAnswersRequest {
            answers: vec![UserAnswer::new(&q.id, "A")],
            additional_constraints: vec![],
        };
        let s2 = svc.submit_answers(&s.id, &req).unwrap();
        assert_eq!(s2.state, SessionState::Resolved);
        assert_eq!(s2.rewritten_question, "Drivers with the most points");
        assert_eq!(svc.submit_answers(&s.id, &req).unwrap_err().status(), 409);

        let r1 = svc.get_result(&s.id).unwrap();
        let r2 = svc.get_result(&s.id).unwrap();
        assert_eq!(r1, r2);
        let cmp = r1.comparison.unwrap();
        assert!(cmp.with.unwrap().exact);
        assert!(!cmp.without.unwrap().exact);
    }

    #[test]
    fn compare_endpoint() {
        let svc = service();
        let r = svc
            .compare(&CompareRequest {
                pred: "select a from t;".into(),
                gold: "SELECT a FROM t".into(),
                database_id: None,
            })
            .unwrap();
        assert!(r.exact);
        let missing = CompareRequest {
            pred: "SELECT 1".into(),
            gold: "SELECT 1".into(),
            database_id: Some("zzz".into()),
        };
        assert_eq!(svc.compare(&missing).unwrap_err().status(), 404);
    }

    #[test]
    fn api_error_json_shape() {
        let e = ApiError::new(ApiErrorCode::Conflict, "x");
        assert_eq!(serde_json::to_value(&e).unwrap(), json!({"code":"conflict","message":"x"}));
        assert_eq!(e.status(), 409);
    }
}
