//! The downstream text-to-SQL generator: a function from (question, schema)
//! to SQL text.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::llm::{build_generation_prompt, count_network_call, Gateway, GatewayError};
use crate::schema::{render_for_prompt, SchemaModel, DEFAULT_PROMPT_BUDGET};

pub const DEFAULT_HOOK_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Error)]
pub enum HookError {
    #[error("generator hook misconfigured: {0}")]
    Config(String),
    #[error("no scripted SQL matches question `{0}`")]
    NoScriptMatch(String),
    #[error("generator unreachable: {0}")]
    Transport(String),
    #[error("generator replied with an unusable payload: {0}")]
    Protocol(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

pub trait SqlGenerator: Send + Sync {
    fn generate(&self, question: &str, schema: &SchemaModel, dialect: &str) -> Result<String, HookError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "target", rename_all = "snake_case")]
pub enum HookKind {
    ExternalHttp(String),
    GatewayPrompt,
    Scripted(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorHook {
    pub kind: HookKind,
    pub timeout_ms: u64,
}

impl GeneratorHook {
    pub fn new(kind: HookKind) -> Self {
        GeneratorHook {
            kind,
            timeout_ms: DEFAULT_HOOK_TIMEOUT_MS,
        }
    }

    /// Instantiates the hook. `GatewayPrompt` needs the gateway.
    pub fn build(&self, gateway: Option<Arc<Gateway>>) -> Result<Box<dyn SqlGenerator>, HookError> {
        if self.timeout_ms == 0 {
            return Err(HookError::Config("timeout_ms must be positive".into()));
        }
        Ok(match &self.kind {
            HookKind::ExternalHttp(url) => Box::new(HttpGenerator::new(url, Duration::from_millis(self.timeout_ms))?),
            HookKind::GatewayPrompt => Box::new(PromptGenerator {
                gateway: gateway.ok_or_else(|| HookError::Config("gateway_prompt hook needs a gateway".into()))?,
            }),
            HookKind::Scripted(path) => Box::new(ScriptedGenerator::load(path)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorScriptEntry {
    pub match_substring: String,
    pub sql: String,
}

/// Returns the SQL of the first entry whose substring occurs in the question.
#[derive(Debug, Clone)]
pub struct ScriptedGenerator {
    entries: Vec<GeneratorScriptEntry>,
}

impl ScriptedGenerator {
    pub fn new(entries: Vec<GeneratorScriptEntry>) -> Self {
        ScriptedGenerator { entries }
    }

    pub fn load(path: &Path) -> Result<Self, HookError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HookError::Config(format!("{}: {e}", path.display())))?;
        let entries = serde_json::from_str(&text)
            .map_err(|e| HookError::Config(format!("{}: {e}", path.display())))?;
        Ok(ScriptedGenerator { entries })
    }
}

impl SqlGenerator for ScriptedGenerator {
    fn generate(&self, question: &str, _schema: &SchemaModel, _dialect: &str) -> Result<String, HookError> {
        self.entries
            .iter()
            .find(|e| question.contains(&e.match_substring))
            .map(|e| e.sql.clone())
            .ok_or_else(|| HookError::NoScriptMatch(question.to_string()))
    }
}

/// POSTs `{question, database_id, dialect, schema_descriptor}` and expects
/// `{sql}` back.
pub struct HttpGenerator {
    agent: ureq::Agent,
    url: String,
}

impl HttpGenerator {
    pub fn new(url: &str, timeout: Duration) -> Result<Self, HookError> {
        if !(url.starts_with("http://") || url.starts_with("https://")) {
            return Err(HookError::Config(format!("not an http(s) url: {url}")));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpGenerator {
            agent,
            url: url.to_string(),
        })
    }
}

impl SqlGenerator for HttpGenerator {
    fn generate(&self, question: &str, schema: &SchemaModel, dialect: &str) -> Result<String, HookError> {
        count_network_call();
        let body = json!({
            "question": question,
            "database_id": schema.database_id,
            "dialect": dialect,
            "schema_descriptor": schema.to_descriptor(),
        });
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| HookError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status >= 400 {
            return Err(HookError::Transport(format!("HTTP {status}")));
        }
        let payload: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| HookError::Protocol(e.to_string()))?;
        payload["sql"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| HookError::Protocol("missing string field `sql`".into()))
    }
}

/// Asks the gateway's own model for SQL.
pub struct PromptGenerator {
    gateway: Arc<Gateway>,
}

impl PromptGenerator {
    pub fn new(gateway: Arc<Gateway>) -> Self {
        PromptGenerator { gateway }
    }
}

/// SQL from a completion: the first fenced block if any, else the whole text.
pub fn extract_sql(text: &str) -> Option<String> {
    let body = match text.find("```") {
        Some(open) => {
            let rest = &text[open + 3..];
            let rest = rest.split_once('\n').map_or("", |(_, r)| r);
            rest.split("```").next().unwrap_or(rest)
        }
        None => text,
    };
    let sql = body.trim();
    (!sql.is_empty()).then(|| sql.to_string())
}

impl SqlGenerator for PromptGenerator {
    fn generate(&self, question: &str, schema: &SchemaModel, dialect: &str) -> Result<String, HookError> {
        let prompt = build_generation_prompt(question, dialect, &render_for_prompt(schema, DEFAULT_PROMPT_BUDGET));
        let completion = self.gateway.complete(&prompt)?;
        extract_sql(&completion.text).ok_or_else(|| HookError::Protocol("empty SQL".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ScriptEntry, Stage};
    use crate::schema::ingest_descriptor;

    fn schema() -> SchemaModel {
        ingest_descriptor(r#"{"database_id":"x","dialect":"sqlite","tables":[]}"#).unwrap()
    }

    #[test]
    fn scripted_first_match_wins() {
        let g = ScriptedGenerator::new(vec![
            GeneratorScriptEntry { match_substring: "ranked 2".into(), sql: "SELECT 1".into() },
            GeneratorScriptEntry { match_substring: "ranked".into(), sql: "SELECT 2".into() },
        ]);
        assert_eq!(g.generate("drivers ranked 2", &schema(), "sqlite").unwrap(), "SELECT 1");
        assert_eq!(g.generate("ranked 3", &schema(), "sqlite").unwrap(), "SELECT 2");
        assert!(matches!(g.generate("other", &schema(), "sqlite"), Err(HookError::NoScriptMatch(_))));
    }

    #[test]
    fn sql_extraction() {
        assert_eq!(extract_sql("```sql\nSELECT 1\n```").as_deref(), Some("SELECT 1"));
        assert_eq!(extract_sql("sure:\n```\nSELECT a\nFROM t\n```\nbye").as_deref(), Some("SELECT a\nFROM t"));
        assert_eq!(extract_sql("  SELECT 2 ").as_deref(), Some("SELECT 2"));
        assert_eq!(extract_sql("```sql\n```"), None);
    }

    #[test]
    fn prompt_generator_uses_gateway() {
        let gw = Gateway::scripted(vec![ScriptEntry {
            stage: Stage::Generate,
            match_substring: "QUESTION: count".into(),
            response: "```sql\nSELECT COUNT(*) FROM t\n```".into(),
            consume_once: false,
        }])
        .unwrap();
        let g = GeneratorHook::new(HookKind::GatewayPrompt).build(Some(Arc::new(gw))).unwrap();
        assert_eq!(g.generate("count", &schema(), "sqlite").unwrap(), "SELECT COUNT(*) FROM t");
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(GeneratorHook::new(HookKind::GatewayPrompt).build(None).is_err());
        assert!(GeneratorHook::new(HookKind::ExternalHttp("ftp://x".into())).build(None).is_err());
        let mut h = GeneratorHook::new(HookKind::ExternalHttp("http://127.0.0.1:1".into()));
        h.timeout_ms = 0;
        assert!(h.build(None).is_err());
    }
}
