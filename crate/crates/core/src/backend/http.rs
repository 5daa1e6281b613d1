//! Chat-completion client over HTTP (`POST {model, messages[{role, content}]}`).

use std::time::{Duration, Instant};

use log::debug;
use serde_json::{json, Value};

use super::{redact_all, AnalysisBackend, BackendError, Completion, CostMeter, Prompt};
use crate::config::HttpConfig;

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    meter: CostMeter,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.config.endpoint)
            .field("model", &self.config.model)
            .finish_non_exhaustive()
    }
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        if config.endpoint.trim().is_empty() {
            return Err(BackendError::Config("endpoint is required".into()));
        }
        if !(config.timeout_secs.is_finite() && config.timeout_secs > 0.0) {
            return Err(BackendError::Config("timeout must be positive".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(HttpBackend {
            config,
            agent,
            api_key,
            meter: CostMeter::default(),
        })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn request_body(&self, prompt: &Prompt) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &prompt.system {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": prompt.text}));
        json!({"model": self.config.model, "messages": messages})
    }

    fn attempt(&self, body: &str) -> Result<(u16, String), BackendError> {
        let mut request = self
            .agent
            .post(&self.config.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request.send(body).map_err(map_ureq_error)?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(map_ureq_error)?;
        Ok((status, text))
    }
}

fn map_ureq_error(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => BackendError::Timeout,
        other => BackendError::Transport(other.to_string()),
    }
}

fn parse_completion(text: &str) -> Result<Completion, BackendError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| BackendError::InvalidBody(e.to_string()))?;
    let content = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::InvalidBody("missing choices[0].message.content".into()))?;
    let tokens = |field: &str| {
        value
            .pointer(&format!("/usage/{field}"))
            .and_then(Value::as_u64)
            .unwrap_or(0)
    };
    Ok(Completion {
        text: content.to_string(),
        prompt_tokens: tokens("prompt_tokens"),
        completion_tokens: tokens("completion_tokens"),
    })
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..=599).contains(&status)
}

impl AnalysisBackend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn model(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, prompt: &Prompt) -> Result<Completion, BackendError> {
        let body = self.request_body(prompt).to_string();
        debug!(
            "POST {} model={} prompt={}",
            self.config.endpoint,
            self.config.model,
            prompt.redacted()
        );
        let attempts = self.config.retries + 1;
        let mut last = BackendError::Transport("no attempt made".into());
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            self.meter.record_request();
            let started = Instant::now();
            let outcome = self.attempt(&body);
            self.meter.record_wall(started.elapsed());
            let (status, text) = outcome?;
            if retryable(status) {
                debug!("status {status} on attempt {}/{attempts}", attempt + 1);
                last = BackendError::Status {
                    status,
                    body: redact_all(&text, &prompt.sensitive),
                };
                continue;
            }
            if !(200..300).contains(&status) {
                return Err(BackendError::Status {
                    status,
                    body: redact_all(&text, &prompt.sensitive),
                });
            }
            let completion = parse_completion(&text)?;
            self.meter
                .record_tokens(completion.prompt_tokens, completion.completion_tokens);
            debug!(
                "reply tokens={}/{} text={}",
                completion.prompt_tokens,
                completion.completion_tokens,
                redact_all(&completion.text, &prompt.sensitive)
            );
            return Ok(completion);
        }
        Err(BackendError::RetriesExhausted {
            attempts,
            last: Box::new(last),
        })
    }

    fn meter(&self) -> &CostMeter {
        &self.meter
    }
}
