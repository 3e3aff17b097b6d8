//! Interactive ambiguity detection and clarification for text-to-SQL.
//!
//! A question is checked against a closed taxonomy of ambiguity categories,
//! each ambiguous phrase becomes a multiple-choice clarification question,
//! and the user's answers (plus any free-text constraints) are folded back
//! into a rewritten question until nothing ambiguous remains. The crate also
//! ships the evaluation side: SQL canonicalization and comparison, detection
//! scoring, and a batch runner with an oracle user.

pub mod engine;
pub mod eval;
pub mod hook;
pub mod llm;
pub mod metrics;
pub mod preferences;
pub mod schema;
pub mod service;
pub mod sql;
pub mod taxonomy;

pub use engine::{
    ClarificationOption, ClarificationQuestion, DetectedAmbiguity, Engine, EngineConfig,
    EngineError, Session, SessionState, Span, UserAnswer,
};
pub use llm::{BackendConfig, Gateway, GatewayError, PromptRequest, Stage};
pub use metrics::{Counts, Scores};
pub use preferences::{PreferenceEntry, PreferenceTree};
pub use schema::{SchemaCatalog, SchemaModel, SchemaSnippet};
pub use sql::{canonicalize, exact_match, execution_match, CanonicalSql, ComparisonReport};
pub use taxonomy::{parse_category, AmbiguityCategory, Dimension};

/// Detection scores in `f64`, the precision used by reports.
pub type Metrics = metrics::Scores<f64>;
/// Detection scores in `f32`.
pub type MetricsF32 = metrics::Scores<f32>;
