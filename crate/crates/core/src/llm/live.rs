use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{count_network_call, BackendConfig, Completion, GatewayError, LlmBackend, PromptRequest};

/// OpenAI-compatible chat-completion client.
pub struct LiveBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key_ref: Option<String>,
    max_retries: u32,
    backoff: Duration,
    id: String,
}

impl LiveBackend {
    pub fn new(config: &BackendConfig) -> Result<Self, GatewayError> {
        let base = config
            .base_url
            .as_deref()
            .ok_or_else(|| GatewayError::Config("live mode requires base_url".into()))?;
        let model = config
            .model_name
            .clone()
            .ok_or_else(|| GatewayError::Config("live mode requires model_name".into()))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let base = base.trim_end_matches('/');
        let endpoint = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        Ok(LiveBackend {
            agent,
            id: format!("live:{model}"),
            endpoint,
            model,
            api_key_ref: config.api_key_ref.clone(),
            max_retries: config.max_retries,
            backoff: Duration::from_millis(config.backoff_ms),
        })
    }

    fn attempt(&self, body: &Value) -> Result<String, Attempt> {
        count_network_call();
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = self
            .api_key_ref
            .as_deref()
            .and_then(|name| std::env::var(name).ok())
        {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Attempt::Retryable(format!("transport: {e}")))?;
        let status = resp.status().as_u16();
        if status >= 500 {
            return Err(Attempt::Retryable(format!("HTTP {status}")));
        }
        if status >= 400 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Attempt::Fatal(format!("HTTP {status}: {text}")));
        }
        let payload: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(format!("invalid response body: {e}")))?;
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal("response has no choices[0].message.content".into()))
    }
}

enum Attempt {
    Retryable(String),
    Fatal(String),
}

impl LlmBackend for LiveBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &PromptRequest) -> Result<Completion, GatewayError> {
        let body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.decode.temperature,
            "max_tokens": request.decode.max_output_tokens,
        });
        let started = Instant::now();
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.attempt(&body) {
                Ok(text) => {
                    return Ok(Completion {
                        text,
                        backend_id: self.id.clone(),
                        latency_ms: started.elapsed().as_millis() as u64,
                    })
                }
                Err(Attempt::Fatal(msg)) => return Err(GatewayError::BackendUnavailable(msg)),
                Err(Attempt::Retryable(msg)) => {
                    tracing::warn!(attempt, error = %msg, "chat completion failed");
                    last = msg;
                }
            }
        }
        Err(GatewayError::BackendUnavailable(format!(
            "{} attempt(s) failed, last error: {last}",
            self.max_retries + 1
        )))
    }
}
