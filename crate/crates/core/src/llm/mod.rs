//! Every model call goes through [`Gateway`]: prompt construction, structured
//! output parsing with a single repair retry, and the live/scripted backends.

mod live;
mod parse;
mod prompts;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use live::LiveBackend;
pub use parse::{parse_structured, OutputKind, RawClarification, RawDetection, RawOption, Structured};
pub use prompts::{
    build_clarification_prompt, build_detection_prompt, build_detection_prompt_with_context,
    build_generation_prompt, build_merge_prompt, build_refinement_prompt, REPAIR_INSTRUCTION,
};

static NETWORK_CALLS: AtomicU64 = AtomicU64::new(0);

/// Number of outbound HTTP requests made by this process so far.
pub fn network_calls() -> u64 {
    NETWORK_CALLS.load(Ordering::SeqCst)
}

pub(crate) fn count_network_call() {
    NETWORK_CALLS.fetch_add(1, Ordering::SeqCst);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Detect,
    Clarify,
    Refine,
    Merge,
    Generate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Detect => "detect",
            Stage::Clarify => "clarify",
            Stage::Refine => "refine",
            Stage::Merge => "merge",
            Stage::Generate => "generate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f32,
    pub max_output_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub stage: Stage,
    pub system_text: String,
    pub user_text: String,
    pub decode: DecodeParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub backend_id: String,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("model backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no script entry for stage `{stage}` matches the request")]
    NoScriptMatch { stage: Stage, excerpt: String },
    #[error("could not parse model output as {expected}: {message}")]
    ParseFailure { expected: OutputKind, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    Live,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub mode: BackendMode,
    pub base_url: Option<String>,
    pub model_name: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_ref: Option<String>,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub script_path: Option<PathBuf>,
    /// First retry delay; doubles on each further attempt.
    pub backoff_ms: u64,
    /// Requests per second; `None` disables the limiter.
    pub rate_limit_per_sec: Option<f64>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            mode: BackendMode::Scripted,
            base_url: None,
            model_name: None,
            api_key_ref: None,
            timeout_ms: 60_000,
            max_retries: 2,
            script_path: None,
            backoff_ms: 500,
            rate_limit_per_sec: None,
        }
    }
}

pub const ENV_MODE: &str = "AMBI_LLM_MODE";
pub const ENV_BASE_URL: &str = "AMBI_LLM_BASE_URL";
pub const ENV_MODEL: &str = "AMBI_LLM_MODEL";
pub const ENV_API_KEY: &str = "AMBI_LLM_API_KEY";
pub const ENV_TIMEOUT_MS: &str = "AMBI_LLM_TIMEOUT_MS";
pub const ENV_SCRIPT_PATH: &str = "AMBI_SCRIPT_PATH";

impl BackendConfig {
    pub fn scripted(path: impl Into<PathBuf>) -> Self {
        BackendConfig {
            mode: BackendMode::Scripted,
            script_path: Some(path.into()),
            ..Default::default()
        }
    }

    pub fn from_env() -> Result<Self, GatewayError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Reads the `AMBI_*` variables through `lookup`. Without an explicit
    /// mode, a script path selects scripted mode and a base URL live mode.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, GatewayError> {
        let get = |k: &str| lookup(k).filter(|v| !v.trim().is_empty());
        let mode = match get(ENV_MODE).map(|m| m.to_ascii_lowercase()) {
            Some(m) if m == "live" => BackendMode::Live,
            Some(m) if m == "scripted" => BackendMode::Scripted,
            Some(other) => {
                return Err(GatewayError::Config(format!(
                    "{ENV_MODE} must be `live` or `scripted`, got `{other}`"
                )))
            }
            None if get(ENV_SCRIPT_PATH).is_some() => BackendMode::Scripted,
            None if get(ENV_BASE_URL).is_some() => BackendMode::Live,
            None => {
                return Err(GatewayError::Config(format!(
                    "set {ENV_MODE}, {ENV_SCRIPT_PATH} or {ENV_BASE_URL}"
                )))
            }
        };
        let mut config = BackendConfig {
            mode,
            base_url: get(ENV_BASE_URL),
            model_name: get(ENV_MODEL),
            api_key_ref: Some(ENV_API_KEY.to_string()),
            script_path: get(ENV_SCRIPT_PATH).map(PathBuf::from),
            ..Default::default()
        };
        if let Some(t) = get(ENV_TIMEOUT_MS) {
            config.timeout_ms = t
                .parse()
                .map_err(|_| GatewayError::Config(format!("{ENV_TIMEOUT_MS}: `{t}` is not an integer")))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.timeout_ms == 0 {
            return Err(GatewayError::Config("timeout_ms must be positive".into()));
        }
        match self.mode {
            BackendMode::Live => {
                let missing: Vec<_> = [
                    ("base_url", self.base_url.is_none()),
                    ("model_name", self.model_name.is_none()),
                    ("api_key_ref", self.api_key_ref.is_none()),
                ]
                .into_iter()
                .filter_map(|(name, absent)| absent.then_some(name))
                .collect();
                if !missing.is_empty() {
                    return Err(GatewayError::Config(format!(
                        "live mode requires {}",
                        missing.join(", ")
                    )));
                }
            }
            BackendMode::Scripted => {
                if self.script_path.is_none() {
                    return Err(GatewayError::Config("scripted mode requires script_path".into()));
                }
            }
        }
        if let Some(r) = self.rate_limit_per_sec {
            if r.is_nan() || r <= 0.0 {
                return Err(GatewayError::Config("rate_limit_per_sec must be positive".into()));
            }
        }
        Ok(())
    }
}

pub trait LlmBackend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &PromptRequest) -> Result<Completion, GatewayError>;
}

/// One canned response of the scripted backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub stage: Stage,
    pub match_substring: String,
    pub response: String,
    #[serde(default)]
    pub consume_once: bool,
}

/// Deterministic backend: the first unconsumed entry whose stage matches and
/// whose `match_substring` occurs in the user text wins.
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    consumed: Mutex<Vec<bool>>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self, GatewayError> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert((e.stage, e.match_substring.as_str())) {
                return Err(GatewayError::Config(format!(
                    "duplicate script entry for stage `{}` and substring {:?}",
                    e.stage, e.match_substring
                )));
            }
        }
        let consumed = Mutex::new(vec![false; entries.len()]);
        Ok(ScriptedBackend { entries, consumed })
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("script {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let entries: Vec<ScriptEntry> = serde_path_to_error::deserialize(de).map_err(|e| {
            GatewayError::Config(format!("script {} at `{}`: {}", path.display(), e.path(), e.inner()))
        })?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }
}

impl LlmBackend for ScriptedBackend {
    fn id(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &PromptRequest) -> Result<Completion, GatewayError> {
        let mut consumed = self.consumed.lock();
        let hit = self.entries.iter().enumerate().find(|(i, e)| {
            !consumed[*i] && e.stage == request.stage && request.user_text.contains(&e.match_substring)
        });
        match hit {
            Some((i, entry)) => {
                if entry.consume_once {
                    consumed[i] = true;
                }
                Ok(Completion {
                    text: entry.response.clone(),
                    backend_id: self.id().to_string(),
                    latency_ms: 0,
                })
            }
            None => Err(GatewayError::NoScriptMatch {
                stage: request.stage,
                excerpt: request.user_text.chars().take(120).collect(),
            }),
        }
    }
}

/// Token bucket shared by all callers of one gateway.
#[derive(Debug)]
pub struct RateLimiter {
    per_sec: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(per_sec: f64) -> Self {
        let capacity = per_sec.max(1.0);
        RateLimiter {
            per_sec,
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock();
                let now = Instant::now();
                let (tokens, last) = *state;
                let tokens = (tokens + now.duration_since(last).as_secs_f64() * self.per_sec)
                    .min(self.capacity);
                if tokens >= 1.0 {
                    *state = (tokens - 1.0, now);
                    return;
                }
                *state = (tokens, now);
                Duration::from_secs_f64((1.0 - tokens) / self.per_sec)
            };
            std::thread::sleep(wait);
        }
    }
}

pub struct Gateway {
    backend: Box<dyn LlmBackend>,
    limiter: Option<RateLimiter>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.id())
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: Box<dyn LlmBackend>) -> Self {
        Gateway {
            backend,
            limiter: None,
        }
    }

    pub fn from_config(config: &BackendConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let backend: Box<dyn LlmBackend> = match config.mode {
            BackendMode::Live => Box::new(LiveBackend::new(config)?),
            BackendMode::Scripted => Box::new(ScriptedBackend::load(
                config.script_path.as_deref().expect("validated"),
            )?),
        };
        let mut gateway = Gateway::new(backend);
        gateway.limiter = config.rate_limit_per_sec.map(RateLimiter::new);
        Ok(gateway)
    }

    pub fn scripted(entries: Vec<ScriptEntry>) -> Result<Self, GatewayError> {
        Ok(Gateway::new(Box::new(ScriptedBackend::new(entries)?)))
    }

    pub fn with_rate_limit(mut self, per_sec: f64) -> Self {
        self.limiter = Some(RateLimiter::new(per_sec));
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn complete(&self, request: &PromptRequest) -> Result<Completion, GatewayError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let started = Instant::now();
        let mut completion = self.backend.complete(request)?;
        if completion.latency_ms == 0 && completion.backend_id != "scripted" {
            completion.latency_ms = started.elapsed().as_millis() as u64;
        }
        tracing::debug!(stage = %request.stage, backend = %completion.backend_id, "completion");
        Ok(completion)
    }

    /// Completes and parses. A malformed reply earns one repeat of the request
    /// with [`REPAIR_INSTRUCTION`] appended; a second failure is final.
    pub fn complete_structured(
        &self,
        request: &PromptRequest,
        kind: OutputKind,
    ) -> Result<Structured, GatewayError> {
        self.complete_validated(request, kind, Ok)
    }

    /// Like [`Gateway::complete_structured`], but a reply that parses and is
    /// then rejected by `validate` also earns the repair retry.
    pub fn complete_validated<T>(
        &self,
        request: &PromptRequest,
        kind: OutputKind,
        validate: impl Fn(Structured) -> Result<T, String>,
    ) -> Result<T, GatewayError> {
        let attempt = |req: &PromptRequest| -> Result<T, GatewayError> {
            let completion = self.complete(req)?;
            let parsed = parse_structured(&completion, kind)?;
            validate(parsed).map_err(|message| GatewayError::ParseFailure {
                expected: kind,
                message,
            })
        };
        match attempt(request) {
            Err(err @ GatewayError::ParseFailure { .. }) => {
                tracing::warn!(stage = %request.stage, error = %err, "malformed output, retrying once");
                let mut repair = request.clone();
                repair.user_text.push_str(REPAIR_INSTRUCTION);
                attempt(&repair)
            }
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(stage: Stage, m: &str, r: &str, once: bool) -> ScriptEntry {
        ScriptEntry {
            stage,
            match_substring: m.into(),
            response: r.into(),
            consume_once: once,
        }
    }

    fn request(stage: Stage, user: &str) -> PromptRequest {
        PromptRequest {
            stage,
            system_text: String::new(),
            user_text: user.into(),
            decode: DecodeParams {
                temperature: 0.0,
                max_output_tokens: 100,
            },
        }
    }

    #[test]
    fn scripted_matches_stage_and_substring() {
        let gw = Gateway::scripted(vec![
            entry(Stage::Clarify, "ranked 2", "wrong stage", false),
            entry(Stage::Detect, "ranked 2", "[canned]", false),
        ])
        .unwrap();
        let c = gw
            .complete(&request(Stage::Detect, "QUESTION: ... have been ranked 2?"))
            .unwrap();
        assert_eq!(c.text, "[canned]");
        assert_eq!(c.backend_id, "scripted");
        assert!(matches!(
            gw.complete(&request(Stage::Detect, "nothing relevant")),
            Err(GatewayError::NoScriptMatch { stage: Stage::Detect, .. })
        ));
    }

    #[test]
    fn consume_once_entries_fire_once() {
        let gw = Gateway::scripted(vec![
            entry(Stage::Refine, "q", "first", true),
            entry(Stage::Refine, "", "fallback", false),
        ])
        .unwrap();
        assert_eq!(gw.complete(&request(Stage::Refine, "q")).unwrap().text, "first");
        assert_eq!(gw.complete(&request(Stage::Refine, "q")).unwrap().text, "fallback");
    }

    #[test]
    fn duplicate_script_entries_rejected() {
        let err = ScriptedBackend::new(vec![
            entry(Stage::Detect, "a", "1", false),
            entry(Stage::Detect, "a", "2", false),
        ]);
        assert!(matches!(err, Err(GatewayError::Config(_))));
        assert!(ScriptedBackend::new(vec![
            entry(Stage::Detect, "a", "1", false),
            entry(Stage::Clarify, "a", "2", false),
        ])
        .is_ok());
    }

    #[test]
    fn repair_retry_then_failure() {
        let gw = Gateway::scripted(vec![
            entry(Stage::Detect, "x", "no json here", true),
            entry(Stage::Detect, "REPAIR", "```json\n[]\n```", false),
        ])
        .unwrap();
        let parsed = gw
            .complete_structured(&request(Stage::Detect, "x"), OutputKind::DetectionList)
            .unwrap();
        assert_eq!(parsed, Structured::Detections(vec![]));

        let gw = Gateway::scripted(vec![entry(Stage::Detect, "x", "still prose", false)]).unwrap();
        assert!(matches!(
            gw.complete_structured(&request(Stage::Detect, "x"), OutputKind::DetectionList),
            Err(GatewayError::ParseFailure { .. })
        ));
    }

    #[test]
    fn config_from_lookup() {
        let vars = |pairs: &'static [(&'static str, &'static str)]| {
            move |k: &str| pairs.iter().find(|(n, _)| *n == k).map(|(_, v)| v.to_string())
        };
        let c = BackendConfig::from_lookup(vars(&[(ENV_SCRIPT_PATH, "s.json")])).unwrap();
        assert_eq!(c.mode, BackendMode::Scripted);
        let c = BackendConfig::from_lookup(vars(&[
            (ENV_MODE, "live"),
            (ENV_BASE_URL, "http://x"),
            (ENV_MODEL, "m"),
            (ENV_TIMEOUT_MS, "1500"),
        ]))
        .unwrap();
        assert_eq!(c.mode, BackendMode::Live);
        assert_eq!(c.timeout_ms, 1500);
        assert_eq!(c.api_key_ref.as_deref(), Some(ENV_API_KEY));
        assert!(BackendConfig::from_lookup(vars(&[(ENV_MODE, "live")])).is_err());
        assert!(BackendConfig::from_lookup(vars(&[(ENV_MODE, "scripted")])).is_err());
        assert!(BackendConfig::from_lookup(vars(&[(ENV_MODE, "magic")])).is_err());
        assert!(BackendConfig::from_lookup(vars(&[])).is_err());
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let limiter = RateLimiter::new(20.0);
        let start = Instant::now();
        for _ in 0..25 {
            limiter.acquire();
        }
        // 20 tokens up front, the other 5 at 50 ms each
        assert!(start.elapsed() >= Duration::from_millis(200));
    }
}
