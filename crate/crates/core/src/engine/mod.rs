//! The clarification loop: detect ambiguous phrases, turn them into
//! multiple-choice questions, fold answers and constraints into a rewritten
//! question, and re-detect until the rewrite is clean or the iteration cap
//! is reached.

mod types;

use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;

pub use types::*;

use crate::llm::{
    build_clarification_prompt, build_detection_prompt_with_context, build_refinement_prompt,
    Gateway, GatewayError, OutputKind, RawClarification, Structured,
};
use crate::preferences::{target_key, PreferenceEntry, PreferenceTree};
use crate::schema::{column_snippet, render_for_prompt, SchemaModel, SchemaSnippet, DEFAULT_PROMPT_BUDGET};
use crate::taxonomy::{parse_category, Dimension};

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub max_iterations: u32,
    /// Character budget for schema text in detection prompts.
    pub schema_budget: usize,
    /// Candidate columns attached as evidence per ambiguity.
    pub max_evidence_columns: usize,
    /// Sample values per evidence snippet.
    pub snippet_values: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_iterations: 3,
            schema_budget: DEFAULT_PROMPT_BUDGET,
            max_evidence_columns: 3,
            snippet_values: 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("precondition violated: {0}")]
    Contract(String),
    #[error("session is {actual}, expected {expected}")]
    InvalidState {
        expected: SessionState,
        actual: SessionState,
    },
    #[error("answer references unknown question `{0}`")]
    StaleAnswer(String),
    #[error("option `{key}` does not exist for question `{question_id}`")]
    InvalidOption { question_id: String, key: String },
    #[error("question `{0}` answered more than once")]
    DuplicateAnswer(String),
    #[error("unanswered questions: {}", .0.join(", "))]
    Unanswered(Vec<String>),
    #[error("ambiguity detection failed: {0}")]
    DetectionFailure(#[source] GatewayError),
    #[error("no clarification question could be generated: {0}")]
    ClarificationFailure(String),
    #[error("question refinement failed: {0}")]
    RefinementFailure(#[source] GatewayError),
    #[error("still ambiguous after {0} iteration(s)")]
    MaxIterationsExceeded(u32),
    #[error("answer provider failed: {0}")]
    Provider(String),
}

/// Clarification questions produced for a batch of ambiguities, plus the
/// ones that had to be skipped.
#[derive(Debug, Clone, Default)]
pub struct ClarifyOutcome {
    pub questions: Vec<ClarificationQuestion>,
    pub skipped: Vec<(String, String)>,
}

/// What an answer provider returns for one round: answers and any
/// additional constraints.
/// A detection item rejected by validation: (phrase, category, reason).
pub type DroppedItem = (String, String, String);

pub type AnswerRound = (Vec<UserAnswer>, Vec<String>);

pub struct Engine {
    gateway: Arc<Gateway>,
    config: EngineConfig,
}

const OPTION_KEYS: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte offsets of `needle` in `haystack` (both lowercase) with word
/// boundaries. A `.` directly before the match is rejected when `bare`, so a
/// bare column name does not match inside `table.column`.
fn word_positions(haystack: &str, needle: &str, bare: bool) -> Vec<usize> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(i) = haystack[from..].find(needle).map(|i| i + from) {
        let before = haystack[..i].chars().next_back();
        let after = haystack[i + needle.len()..].chars().next();
        let left_ok = before.is_none_or(|c| !is_word_char(c) && !(bare && c == '.'));
        let right_ok = after.is_none_or(|c| !is_word_char(c));
        if left_ok && right_ok {
            out.push(i);
        }
        from = i + needle.len().max(1);
        if from >= haystack.len() {
            break;
        }
    }
    out
}

/// Columns named in a rationale, in order of first mention. Qualified
/// `table.column` mentions pick one column; bare names pick every table's
/// column of that name.
pub fn columns_mentioned(rationale: &str, schema: &SchemaModel) -> Vec<(String, String)> {
    let text = rationale.to_lowercase();
    let mut hits: Vec<(usize, usize, String, String)> = Vec::new();
    for (order, (table, column)) in schema.columns().enumerate() {
        let qualified = format!("{}.{}", table.name, column.name).to_lowercase();
        let mut pos = word_positions(&text, &qualified, false);
        pos.extend(word_positions(&text, &column.name.to_lowercase(), true));
        if let Some(first) = pos.into_iter().min() {
            hits.push((first, order, table.name.clone(), column.name.clone()));
        }
    }
    hits.sort();
    hits.into_iter().map(|(_, _, t, c)| (t, c)).collect()
}

impl Engine {
    pub fn new(gateway: Arc<Gateway>, config: EngineConfig) -> Self {
        Engine { gateway, config }
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Runs detection and validates every reported item against the
    /// question and the taxonomy. Invalid items are dropped and returned in
    /// `dropped` as (phrase, category, reason).
    pub fn detect_with_log(
        &self,
        question: &str,
        schema: &SchemaModel,
        preferences: Option<&PreferenceTree>,
        iteration: u32,
    ) -> Result<(Vec<DetectedAmbiguity>, Vec<DroppedItem>), EngineError> {
        if question.trim().is_empty() {
            return Err(EngineError::Contract("question must be non-empty".into()));
        }
        let schema_text = render_for_prompt(schema, self.config.schema_budget);
        let prefs = preferences.filter(|t| !t.is_empty()).map(PreferenceTree::render);
        let request = build_detection_prompt_with_context(question, &schema_text, prefs.as_deref());
        let raw = self
            .gateway
            .complete_validated(&request, OutputKind::DetectionList, |s| match s {
                Structured::Detections(items) => Ok(items),
                other => Err(format!("unexpected output {other:?}")),
            })
            .map_err(EngineError::DetectionFailure)?;

        let mut detected = Vec::new();
        let mut dropped = Vec::new();
        let mut seen = HashSet::new();
        for item in raw {
            let category = match parse_category(&item.category) {
                Ok(c) => c,
                Err(e) => {
                    dropped.push((item.phrase, item.category, e.to_string()));
                    continue;
                }
            };
            let phrase = item.phrase.trim();
            let Some(span) = find_case_insensitive(question, phrase) else {
                dropped.push((
                    item.phrase.clone(),
                    item.category,
                    "phrase does not occur in the question".into(),
                ));
                continue;
            };
            if !seen.insert((span, category)) {
                dropped.push((item.phrase.clone(), item.category, "duplicate".into()));
                continue;
            }
            let evidence = if category.dimension() == Dimension::DbRelated {
                self.evidence_for(&item.rationale, schema)
            } else {
                Vec::new()
            };
            detected.push(DetectedAmbiguity {
                id: format!("a{iteration}-{}", detected.len()),
                phrase: char_slice(question, span).unwrap_or_else(|| phrase.to_string()),
                span,
                category,
                rationale: item.rationale,
                evidence,
            });
        }
        for (phrase, category, reason) in &dropped {
            tracing::info!(%phrase, %category, %reason, "dropped detection item");
        }
        Ok((detected, dropped))
    }

    pub fn detect(
        &self,
        question: &str,
        schema: &SchemaModel,
    ) -> Result<Vec<DetectedAmbiguity>, EngineError> {
        self.detect_with_log(question, schema, None, 0).map(|(d, _)| d)
    }

    fn evidence_for(&self, rationale: &str, schema: &SchemaModel) -> Vec<SchemaSnippet> {
        columns_mentioned(rationale, schema)
            .into_iter()
            .take(self.config.max_evidence_columns)
            .filter_map(|(t, c)| column_snippet(schema, &t, &c, self.config.snippet_values).ok())
            .collect()
    }

    fn build_question(
        &self,
        raw: RawClarification,
        ambiguity: &DetectedAmbiguity,
        schema: &SchemaModel,
        id: String,
    ) -> Result<ClarificationQuestion, String> {
        if raw.question.trim().is_empty() {
            return Err("empty question text".into());
        }
        if !(2..=OPTION_KEYS.len()).contains(&raw.options.len()) {
            return Err(format!("expected 2 to 6 options, got {}", raw.options.len()));
        }
        let db_related = ambiguity.category.dimension() == Dimension::DbRelated;
        let mut options = Vec::with_capacity(raw.options.len());
        for (key, opt) in OPTION_KEYS.iter().zip(raw.options) {
            if opt.resolution.trim().is_empty() || opt.display.trim().is_empty() {
                return Err(format!("option {key} lacks display text or resolution"));
            }
            let snippet = match (db_related, opt.column.as_deref().map(str::trim)) {
                (true, Some(reference)) if !reference.is_empty() => {
                    let (t, c) = schema
                        .qualified_column(reference)
                        .ok_or_else(|| format!("option {key} names unknown column `{reference}`"))?;
                    Some(
                        column_snippet(schema, &t.name, &c.name, self.config.snippet_values)
                            .map_err(|e| e.to_string())?,
                    )
                }
                _ => None,
            };
            options.push(ClarificationOption {
                key: key.to_string(),
                display: opt.display.trim().to_string(),
                resolution: opt.resolution.trim().to_string(),
                snippet,
            });
        }
        Ok(ClarificationQuestion {
            id,
            ambiguity_id: ambiguity.id.clone(),
            phrase: ambiguity.phrase.clone(),
            span: ambiguity.span,
            category: ambiguity.category,
            text: raw.question.trim().to_string(),
            options,
        })
    }

    /// One clarification question per ambiguity, in order. Items whose
    /// generation fails after the repair retry are skipped and reported.
    pub fn clarify(
        &self,
        ambiguities: &[DetectedAmbiguity],
        schema: &SchemaModel,
        question: &str,
        iteration: u32,
    ) -> Result<ClarifyOutcome, EngineError> {
        if ambiguities.is_empty() {
            return Err(EngineError::Contract("clarify needs at least one ambiguity".into()));
        }
        let mut outcome = ClarifyOutcome::default();
        for (i, amb) in ambiguities.iter().enumerate() {
            let request = build_clarification_prompt(amb, &amb.evidence, question);
            let id = format!("q{iteration}-{i}");
            let result = self
                .gateway
                .complete_validated(&request, OutputKind::Clarification, |s| match s {
                    Structured::Clarification(raw) => self.build_question(raw, amb, schema, id.clone()),
                    other => Err(format!("unexpected output {other:?}")),
                });
            match result {
                Ok(q) => outcome.questions.push(q),
                Err(e) => {
                    tracing::warn!(ambiguity = %amb.id, error = %e, "clarification skipped");
                    outcome.skipped.push((amb.id.clone(), e.to_string()));
                }
            }
        }
        Ok(outcome)
    }

    /// Detection plus clarification on the session's current question;
    /// moves the session to AwaitingAnswers, Resolved or Failed.
    fn examine(&self, session: &mut Session) -> Result<(), EngineError> {
        let question = session.rewritten_question.clone();
        let prefs = (!session.preference_tree.is_empty()).then_some(&session.preference_tree);
        let detection =
            self.detect_with_log(&question, &session.schema, prefs, session.iteration);
        let (detected, dropped) = match detection {
            Ok(d) => d,
            Err(e) => {
                session.fail(e.to_string());
                return Err(e);
            }
        };
        for (phrase, category, reason) in dropped {
            session.log(SessionEvent::AmbiguityDropped { phrase, category, reason });
        }
        session.log(SessionEvent::DetectionCompleted {
            iteration: session.iteration,
            question: question.clone(),
            detected: detected.len(),
        });
        session.detection_history.push(detected.clone());

        if detected.is_empty() {
            session.open_questions.clear();
            session.transition(SessionState::Resolved);
            return Ok(());
        }
        if session.iteration >= self.config.max_iterations {
            let err = EngineError::MaxIterationsExceeded(session.iteration);
            session.open_questions.clear();
            session.fail(err.to_string());
            return Err(err);
        }

        let outcome = self.clarify(&detected, &session.schema, &question, session.iteration)?;
        for (ambiguity_id, reason) in outcome.skipped {
            session.log(SessionEvent::ClarificationSkipped { ambiguity_id, reason });
        }
        if outcome.questions.is_empty() {
            let err = EngineError::ClarificationFailure(format!(
                "all {} clarification(s) failed",
                detected.len()
            ));
            session.fail(err.to_string());
            return Err(err);
        }
        session.log(SessionEvent::QuestionsOpened {
            ids: outcome.questions.iter().map(|q| q.id.clone()).collect(),
        });
        session.open_questions = outcome.questions;
        session.transition(SessionState::AwaitingAnswers);
        Ok(())
    }

    /// First detection pass for a freshly created session.
    pub fn start(&self, session: &mut Session) -> Result<(), EngineError> {
        if session.state != SessionState::Detecting {
            return Err(EngineError::InvalidState {
                expected: SessionState::Detecting,
                actual: session.state,
            });
        }
        self.examine(session)
    }

    fn check_answers(
        session: &Session,
        answers: &[UserAnswer],
    ) -> Result<Vec<(ClarificationQuestion, UserAnswer)>, EngineError> {
        let mut pairs = Vec::with_capacity(answers.len());
        let mut answered = HashSet::new();
        for a in answers {
            let q = session
                .open_questions
                .iter()
                .find(|q| q.id == a.question_id)
                .ok_or_else(|| EngineError::StaleAnswer(a.question_id.clone()))?;
            let opt = q.option(&a.selected_key).ok_or_else(|| EngineError::InvalidOption {
                question_id: q.id.clone(),
                key: a.selected_key.clone(),
            })?;
            if !answered.insert(q.id.clone()) {
                return Err(EngineError::DuplicateAnswer(q.id.clone()));
            }
            pairs.push((q.clone(), UserAnswer::new(&q.id, &opt.key)));
        }
        let missing: Vec<String> = session
            .open_questions
            .iter()
            .filter(|q| !answered.contains(&q.id))
            .map(|q| q.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(EngineError::Unanswered(missing));
        }
        Ok(pairs)
    }

    /// Applies one round of answers and constraints: records preferences,
    /// rewrites the question, and re-detects on the rewrite.
    pub fn apply_answers(
        &self,
        session: &mut Session,
        answers: &[UserAnswer],
        constraints: &[String],
    ) -> Result<(), EngineError> {
        if session.state != SessionState::AwaitingAnswers {
            return Err(EngineError::InvalidState {
                expected: SessionState::AwaitingAnswers,
                actual: session.state,
            });
        }
        let pairs = Self::check_answers(session, answers)?;
        let constraints: Vec<String> = constraints
            .iter()
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();

        for (q, a) in &pairs {
            let opt = q.option(&a.selected_key).expect("validated").clone();
            let entry = PreferenceEntry::new(&target_key(q.category, &q.phrase), &opt.resolution, &q.id);
            let stored = session
                .preference_tree
                .record(q.category, entry, Some(&self.gateway))
                .clone();
            session.log(SessionEvent::AnswerApplied {
                question_id: q.id.clone(),
                selected_key: opt.key.clone(),
                resolution: opt.resolution.clone(),
            });
            session.log(SessionEvent::PreferenceRecorded {
                category: q.category,
                target_key: stored.target_key,
                version: stored.version,
                resolution: stored.resolution,
            });
            session.answered.push(AnsweredQuestion {
                question: q.clone(),
                selected: opt,
                iteration: session.iteration,
            });
        }
        for c in &constraints {
            session.constraint_log.push(c.clone());
            session.log(SessionEvent::ConstraintAdded { constraint: c.clone() });
        }

        if !pairs.is_empty() || !constraints.is_empty() {
            let request = build_refinement_prompt(&session.rewritten_question, &pairs, &constraints);
            let rewrite = self
                .gateway
                .complete_validated(&request, OutputKind::SingleLine, |s| match s {
                    Structured::Line(line) => Ok(line),
                    other => Err(format!("unexpected output {other:?}")),
                });
            match rewrite {
                Ok(text) => {
                    session.log(SessionEvent::QuestionRewritten {
                        from: session.rewritten_question.clone(),
                        to: text.clone(),
                    });
                    session.rewritten_question = text;
                }
                Err(e) => {
                    let err = EngineError::RefinementFailure(e);
                    session.fail(err.to_string());
                    return Err(err);
                }
            }
        }

        session.iteration += 1;
        session.open_questions.clear();
        session.transition(SessionState::Detecting);
        self.examine(session)
    }

    /// Drives a session from Detecting to Resolved or Failed, asking
    /// `provider` for answers whenever questions are open. Failures end up in
    /// the session's state; only a wrong starting state is an error.
    pub fn resolve_loop(
        &self,
        mut session: Session,
        provider: &mut dyn FnMut(&Session) -> Result<AnswerRound, String>,
    ) -> Result<Session, EngineError> {
        if session.state != SessionState::Detecting {
            return Err(EngineError::InvalidState {
                expected: SessionState::Detecting,
                actual: session.state,
            });
        }
        if self.start(&mut session).is_err() {
            return Ok(session);
        }
        while session.state == SessionState::AwaitingAnswers {
            let (answers, constraints) = match provider(&session) {
                Ok(round) => round,
                Err(reason) => {
                    session.fail(EngineError::Provider(reason).to_string());
                    break;
                }
            };
            match self.apply_answers(&mut session, &answers, &constraints) {
                Ok(()) => {}
                Err(_) if session.state == SessionState::Failed => break,
                Err(e) => {
                    session.fail(e.to_string());
                    break;
                }
            }
        }
        Ok(session)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ScriptEntry, Stage};
    use crate::schema::ingest_descriptor;
    use crate::taxonomy::AmbiguityCategory;

    const DESCRIPTOR: &str = r#"{"database_id":"f1","dialect":"sqlite","tables":[
        {"name":"drivers","columns":[
            {"name":"driverId","declared_type":"INTEGER","sample_values":["1","2"]},
            {"name":"nationality","declared_type":"TEXT","sample_values":["British","German"]}]},
        {"name":"results","columns":[
            {"name":"position","declared_type":"INTEGER","sample_values":["1","2","3","4"]},
            {"name":"rank","declared_type":"INTEGER","sample_values":["1","2"]}]},
        {"name":"driverStandings","columns":[
            {"name":"position","declared_type":"INTEGER","sample_values":["1"]}]}]}"#;

    fn schema() -> Arc<SchemaModel> {
        Arc::new(ingest_descriptor(DESCRIPTOR).unwrap())
    }

    fn entry(stage: Stage, m: &str, r: &str) -> ScriptEntry {
        ScriptEntry {
            stage,
            match_substring: m.into(),
            response: r.into(),
            consume_once: false,
        }
    }

    fn engine(entries: Vec<ScriptEntry>) -> Engine {
        Engine::new(Arc::new(Gateway::scripted(entries).unwrap()), EngineConfig::default())
    }

    const Q: &str = "How many drivers have been ranked 2?";

    fn detect_ranked() -> ScriptEntry {
        entry(
            Stage::Detect,
            "QUESTION: How many drivers have been ranked 2?",
            r#"[{"phrase":"Ranked 2","category":"unclear schema reference","rationale":"could be results.position, results.rank or driverStandings.position"},
                {"phrase":"ranked 2","category":"largest city","rationale":"junk"},
                {"phrase":"not in question","category":"conflicting_knowledge","rationale":""}]"#,
        )
    }

    fn clarify_ranked() -> ScriptEntry {
        entry(
            Stage::Clarify,
            "AMBIGUOUS PHRASE: \"ranked 2\"",
            r#"{"question":"Which column does \"ranked 2\" refer to?","options":[
                {"display":"results.position","resolution":"Use results.position.","column":"results.position"},
                {"display":"results.rank","resolution":"Use results.rank.","column":"results.rank"},
                {"display":"driverStandings.position","resolution":"Use driverStandings.position.","column":"driverStandings.position"}]}"#,
        )
    }

    #[test]
    fn mentioned_columns_in_order() {
        let s = schema();
        let cols = columns_mentioned("results.rank, or perhaps the position, or results.position", &s);
        assert_eq!(
            cols,
            vec![
                ("results".to_string(), "rank".to_string()),
                ("results".to_string(), "position".to_string()),
                ("driverStandings".to_string(), "position".to_string()),
            ]
        );
        assert!(columns_mentioned("nothing here, positions are plural", &s).is_empty());
    }

    #[test]
    fn detect_validates_items() {
        let e = engine(vec![detect_ranked()]);
        let s = schema();
        let (found, dropped) = e.detect_with_log(Q, &s, None, 0).unwrap();
        assert_eq!(found.len(), 1);
        let a = &found[0];
        assert_eq!(a.phrase, "ranked 2");
        assert_eq!(a.span, Span::new(27, 35));
        assert!(span_matches(Q, a.span, &a.phrase));
        assert_eq!(a.category, AmbiguityCategory::UnclearSchemaReference);
        let ev: Vec<_> = a.evidence.iter().map(|s| format!("{}.{}", s.table, s.column)).collect();
        assert_eq!(ev, ["results.position", "results.rank", "driverStandings.position"]);
        assert_eq!(dropped.len(), 2);
    }

    #[test]
    fn detect_no_ambiguity_and_failure() {
        let e = engine(vec![entry(Stage::Detect, "QUESTION: clean", "```json\n[]\n```")]);
        assert!(e.detect("clean question", &schema()).unwrap().is_empty());
        assert!(matches!(e.detect("other", &schema()), Err(EngineError::DetectionFailure(_))));
        assert!(matches!(e.detect("  ", &schema()), Err(EngineError::Contract(_))));
    }

    #[test]
    fn clarify_builds_lettered_options_with_snippets() {
        let e = engine(vec![detect_ranked(), clarify_ranked()]);
        let s = schema();
        let found = e.detect(Q, &s).unwrap();
        let out = e.clarify(&found, &s, Q, 0).unwrap();
        assert!(out.skipped.is_empty());
        let q = &out.questions[0];
        assert_eq!(q.ambiguity_id, found[0].id);
        let keys: Vec<_> = q.options.iter().map(|o| o.key.as_str()).collect();
        assert_eq!(keys, ["A", "B", "C"]);
        assert!(q.options.iter().all(|o| o.snippet.is_some()));
        assert_eq!(q.options[1].snippet.as_ref().unwrap().values, ["1", "2"]);
        assert!(matches!(e.clarify(&[], &s, Q, 0), Err(EngineError::Contract(_))));
    }

    #[test]
    fn clarify_skips_invalid_items() {
        let e = engine(vec![
            detect_ranked(),
            entry(
                Stage::Clarify,
                "ranked 2",
                r#"{"question":"?","options":[{"display":"x","resolution":"y","column":"results.nosuch"},{"display":"z","resolution":"w"}]}"#,
            ),
        ]);
        let s = schema();
        let found = e.detect(Q, &s).unwrap();
        let out = e.clarify(&found, &s, Q, 0).unwrap();
        assert!(out.questions.is_empty());
        assert_eq!(out.skipped.len(), 1);
    }

    #[test]
    fn identity_step_without_answers() {
        let e = engine(vec![detect_ranked(), clarify_ranked()]);
        let mut session = Session::new(Q, schema(), "sqlite");
        session.state = SessionState::AwaitingAnswers;
        e.apply_answers(&mut session, &[], &[]).unwrap();
        assert_eq!(session.rewritten_question, Q);
        assert_eq!(session.iteration, 1);
        assert_eq!(session.state, SessionState::AwaitingAnswers);
    }

    #[test]
    fn answer_validation() {
        let e = engine(vec![detect_ranked(), clarify_ranked()]);
        let mut session = Session::new(Q, schema(), "sqlite");
        e.start(&mut session).unwrap();
        let qid = session.open_questions[0].id.clone();
        assert!(matches!(
            e.apply_answers(&mut session, &[UserAnswer::new("nope", "A")], &[]),
            Err(EngineError::StaleAnswer(_))
        ));
        assert!(matches!(
            e.apply_answers(&mut session, &[UserAnswer::new(&qid, "Z")], &[]),
            Err(EngineError::InvalidOption { .. })
        ));
        assert!(matches!(
            e.apply_answers(&mut session, &[], &["x".into()]),
            Err(EngineError::Unanswered(ids)) if ids == vec![qid.clone()]
        ));
        assert_eq!(session.state, SessionState::AwaitingAnswers);
        assert!(session.constraint_log.is_empty());
    }

    #[test]
    fn resolve_loop_caps_iterations() {
        let e = engine(vec![
            entry(
                Stage::Detect,
                "",
                r#"[{"phrase":"ranked 2","category":"unclear_schema_reference","rationale":"results.rank"}]"#,
            ),
            clarify_ranked(),
            entry(Stage::Refine, "", "How many drivers have been ranked 2?"),
        ]);
        let mut calls = 0;
        let session = e
            .resolve_loop(Session::new(Q, schema(), "sqlite"), &mut |s: &Session| {
                calls += 1;
                Ok((
                    s.open_questions.iter().map(|q| UserAnswer::new(&q.id, "B")).collect(),
                    vec![],
                ))
            })
            .unwrap();
        assert_eq!(session.state, SessionState::Failed);
        assert_eq!(session.iteration, 3);
        assert_eq!(calls, 3);
        // repeated answers about the same phrase are merged into one live preference
        let live = session.preference_tree.lookup(AmbiguityCategory::UnclearSchemaReference);
        assert_eq!(live.len(), 1);
        assert_eq!(live[0].version, 3);
    }

    #[test]
    fn resolve_loop_immediate_resolution() {
        let e = engine(vec![entry(Stage::Detect, "", "[]")]);
        let session = e
            .resolve_loop(Session::new(Q, schema(), "sqlite"), &mut |_: &Session| {
                panic!("no questions expected")
            })
            .unwrap();
        assert_eq!(session.state, SessionState::Resolved);
        assert_eq!(session.rewritten_question, session.original_question);
        assert_eq!(session.iteration, 0);
    }
}
