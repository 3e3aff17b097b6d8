use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::preferences::PreferenceTree;
use crate::schema::{SchemaModel, SchemaSnippet};
use crate::taxonomy::AmbiguityCategory;

/// Half-open range of character (not byte) offsets into a question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overlap(&self, other: &Span) -> usize {
        self.end.min(other.end).saturating_sub(self.start.max(other.start))
    }
}

impl From<(usize, usize)> for Span {
    fn from((start, end): (usize, usize)) -> Self {
        Span { start, end }
    }
}

impl From<Span> for (usize, usize) {
    fn from(s: Span) -> Self {
        (s.start, s.end)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

fn chars_eq_ignore_case(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

/// First case-insensitive occurrence of `needle` in `haystack`, in chars.
pub fn find_case_insensitive(haystack: &str, needle: &str) -> Option<Span> {
    let hay: Vec<char> = haystack.chars().collect();
    let pat: Vec<char> = needle.chars().collect();
    if pat.is_empty() || pat.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - pat.len())
        .find(|&i| {
            hay[i..i + pat.len()]
                .iter()
                .zip(&pat)
                .all(|(a, b)| chars_eq_ignore_case(*a, *b))
        })
        .map(|i| Span::new(i, i + pat.len()))
}

/// The text covered by `span`, or `None` if it falls outside `text`.
pub fn char_slice(text: &str, span: Span) -> Option<String> {
    if span.start >= span.end {
        return None;
    }
    let total = text.chars().count();
    (span.end <= total).then(|| text.chars().skip(span.start).take(span.len()).collect())
}

/// Whether `text[span]` equals `phrase`, ignoring case.
pub fn span_matches(text: &str, span: Span, phrase: &str) -> bool {
    match char_slice(text, span) {
        Some(s) => {
            s.chars().count() == phrase.chars().count()
                && s.chars().zip(phrase.chars()).all(|(a, b)| chars_eq_ignore_case(a, b))
        }
        None => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectedAmbiguity {
    pub id: String,
    pub phrase: String,
    pub span: Span,
    pub category: AmbiguityCategory,
    pub rationale: String,
    #[serde(default)]
    pub evidence: Vec<SchemaSnippet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarificationOption {
    pub key: String,
    pub display: String,
    /// Standalone sentence inserted into the rewritten question.
    pub resolution: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet: Option<SchemaSnippet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarificationQuestion {
    pub id: String,
    pub ambiguity_id: String,
    pub phrase: String,
    pub span: Span,
    pub category: AmbiguityCategory,
    pub text: String,
    pub options: Vec<ClarificationOption>,
}

impl ClarificationQuestion {
    pub fn option(&self, key: &str) -> Option<&ClarificationOption> {
        self.options.iter().find(|o| o.key.eq_ignore_ascii_case(key))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAnswer {
    pub question_id: String,
    pub selected_key: String,
}

impl UserAnswer {
    pub fn new(question_id: &str, selected_key: &str) -> Self {
        UserAnswer {
            question_id: question_id.to_string(),
            selected_key: selected_key.to_string(),
        }
    }
}

/// A clarification question together with the option the user picked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsweredQuestion {
    pub question: ClarificationQuestion,
    pub selected: ClarificationOption,
    pub iteration: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Detecting,
    AwaitingAnswers,
    Resolved,
    Failed,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::Detecting => "detecting",
            SessionState::AwaitingAnswers => "awaiting_answers",
            SessionState::Resolved => "resolved",
            SessionState::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    Created { question: String },
    DetectionCompleted { iteration: u32, question: String, detected: usize },
    AmbiguityDropped { phrase: String, category: String, reason: String },
    ClarificationSkipped { ambiguity_id: String, reason: String },
    QuestionsOpened { ids: Vec<String> },
    AnswerApplied { question_id: String, selected_key: String, resolution: String },
    PreferenceRecorded { category: AmbiguityCategory, target_key: String, version: u32, resolution: String },
    ConstraintAdded { constraint: String },
    QuestionRewritten { from: String, to: String },
    StateChanged { from: SessionState, to: SessionState },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub event: SessionEvent,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub original_question: String,
    pub schema: Arc<SchemaModel>,
    pub dialect: String,
    pub rewritten_question: String,
    pub iteration: u32,
    pub state: SessionState,
    pub open_questions: Vec<ClarificationQuestion>,
    pub preference_tree: PreferenceTree,
    pub constraint_log: Vec<String>,
    pub event_log: Vec<LoggedEvent>,
    pub answered: Vec<AnsweredQuestion>,
    /// Every detection pass, in order; the first is on the original question.
    pub detection_history: Vec<Vec<DetectedAmbiguity>>,
    pub failure: Option<String>,
}

impl Session {
    pub fn new(question: &str, schema: Arc<SchemaModel>, dialect: &str) -> Self {
        let mut session = Session {
            id: uuid::Uuid::new_v4().to_string(),
            original_question: question.to_string(),
            schema,
            dialect: dialect.to_string(),
            rewritten_question: question.to_string(),
            iteration: 0,
            state: SessionState::Detecting,
            open_questions: Vec::new(),
            preference_tree: PreferenceTree::new(),
            constraint_log: Vec::new(),
            event_log: Vec::new(),
            answered: Vec::new(),
            detection_history: Vec::new(),
            failure: None,
        };
        session.log(SessionEvent::Created {
            question: question.to_string(),
        });
        session
    }

    pub fn log(&mut self, event: SessionEvent) {
        self.event_log.push(LoggedEvent { at: Utc::now(), event });
    }

    pub(crate) fn transition(&mut self, to: SessionState) {
        let from = self.state;
        if from != to {
            self.state = to;
            self.log(SessionEvent::StateChanged { from, to });
        }
    }

    pub(crate) fn fail(&mut self, reason: String) {
        self.failure = Some(reason.clone());
        self.log(SessionEvent::Failed { reason });
        self.transition(SessionState::Failed);
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.state, SessionState::Resolved | SessionState::Failed)
    }

    /// Ambiguities found by the first detection pass.
    pub fn initial_detections(&self) -> &[DetectedAmbiguity] {
        self.detection_history.first().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_insensitive_find_uses_char_offsets() {
        let q = "Wie viele Fahrer aus Österreich? ÖSTERREICH!";
        let s = find_case_insensitive(q, "österreich").unwrap();
        assert_eq!(s, Span::new(21, 31));
        assert!(span_matches(q, s, "ÖSTERREICH"));
        assert_eq!(find_case_insensitive("abc", ""), None);
        assert_eq!(find_case_insensitive("ab", "abc"), None);
    }

    #[test]
    fn first_occurrence_wins() {
        let q = "rank of the rank";
        assert_eq!(find_case_insensitive(q, "RANK"), Some(Span::new(0, 4)));
    }

    #[test]
    fn span_bounds() {
        assert_eq!(char_slice("abc", Span::new(1, 3)).as_deref(), Some("bc"));
        assert_eq!(char_slice("abc", Span::new(1, 4)), None);
        assert_eq!(char_slice("abc", Span::new(2, 2)), None);
        assert_eq!(Span::new(0, 5).overlap(&Span::new(3, 9)), 2);
        assert_eq!(Span::new(0, 3).overlap(&Span::new(3, 9)), 0);
        let json = serde_json::to_string(&Span::new(3, 7)).unwrap();
        assert_eq!(json, "[3,7]");
    }
}
