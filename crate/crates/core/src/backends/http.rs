//! Client for JSON completion servers (OpenAI-style `/v1/completions`).
//!
//! Each call asks for a handful of greedy tokens and stops at the first
//! space, the WAIT literal or end-of-sequence, so the response holds at most
//! one word.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::{BackendError, TranslatorBackend, Unit, UnitRequest};
use crate::error::{Error, Result};
use crate::prompt::DEFAULT_WAIT_LITERAL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpBackendConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    pub top_p: f64,
    pub max_unit_tokens: u32,
    pub wait_literal: String,
    pub eos_literal: String,
    pub timeout_ms: u64,
    /// Re-attempts after the first failed request.
    pub retries: u32,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        HttpBackendConfig {
            endpoint_url: "http://127.0.0.1:8000/v1/completions".into(),
            model_name: "simt".into(),
            api_key_env: None,
            top_p: 0.7,
            max_unit_tokens: 12,
            wait_literal: DEFAULT_WAIT_LITERAL.into(),
            eos_literal: "</s>".into(),
            timeout_ms: 30_000,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub max_tokens: u32,
    pub top_p: f64,
    pub temperature: f64,
    pub stop: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CompletionChoice {
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub finish_reason: Option<String>,
    /// Matched stop sequence, when the server reports it (vLLM does).
    #[serde(default)]
    pub stop_reason: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

/// Turns one completion choice into exactly one unit.
pub fn assemble_unit(
    choice: &CompletionChoice,
    wait_literal: &str,
    eos_literal: &str,
) -> Result<Unit, BackendError> {
    let malformed = |message: String| BackendError::MalformedResponse { message };
    let text = choice.text.trim_start();

    if choice.text.is_empty() {
        let stop = choice.stop_reason.as_ref().and_then(|v| v.as_str());
        if stop == Some(wait_literal) {
            return Ok(Unit::Wait);
        }
        return match (choice.finish_reason.as_deref(), stop) {
            (_, Some(s)) if s == eos_literal => Ok(Unit::Eos),
            (Some("stop" | "eos"), None) => Ok(Unit::Eos),
            (finish, stop) => Err(malformed(format!(
                "empty completion (finish_reason {finish:?}, stop_reason {stop:?})"
            ))),
        };
    }
    if text.is_empty() {
        return Err(malformed(format!(
            "whitespace-only completion {:?}",
            choice.text
        )));
    }
    if text.starts_with(wait_literal) {
        return Ok(Unit::Wait);
    }
    if text.starts_with(eos_literal) {
        return Ok(Unit::Eos);
    }
    let mut word = text.split_whitespace().next().unwrap_or_default();
    for lit in [wait_literal, eos_literal] {
        if let Some(pos) = word.find(lit) {
            word = &word[..pos];
        }
    }
    Ok(Unit::Word(word.to_string()))
}

#[derive(Clone)]
pub struct HttpBackend {
    cfg: HttpBackendConfig,
    agent: ureq::Agent,
    token: Option<String>,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("cfg", &self.cfg)
            .finish_non_exhaustive()
    }
}

impl HttpBackend {
    pub fn new(cfg: HttpBackendConfig) -> Result<Self> {
        if cfg.timeout_ms == 0 {
            return Err(Error::InvalidArgument("timeout_ms must be positive".into()));
        }
        if cfg.wait_literal.is_empty() || cfg.eos_literal.is_empty() {
            return Err(Error::InvalidArgument(
                "WAIT and EOS literals must be non-empty".into(),
            ));
        }
        let token = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::InvalidArgument(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .build()
            .into();
        Ok(HttpBackend { cfg, agent, token })
    }

    pub fn config(&self) -> &HttpBackendConfig {
        &self.cfg
    }

    pub fn request_body(&self, prompt: &str, partial_target_empty: bool) -> CompletionRequest {
        // With a non-empty target the next word starts with a space, which
        // would hit the space stop sequence at once. Putting the space in the
        // prompt lets the model emit the word itself.
        let prompt = if partial_target_empty {
            prompt.to_string()
        } else {
            format!("{prompt} ")
        };
        CompletionRequest {
            model: self.cfg.model_name.clone(),
            prompt,
            max_tokens: self.cfg.max_unit_tokens,
            top_p: self.cfg.top_p,
            temperature: 0.0,
            stop: vec![
                " ".into(),
                self.cfg.wait_literal.clone(),
                self.cfg.eos_literal.clone(),
            ],
        }
    }

    fn post(&self, body: &CompletionRequest) -> Result<String, String> {
        let mut req = self.agent.post(&self.cfg.endpoint_url);
        if let Some(token) = &self.token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
        resp.body_mut().read_to_string().map_err(|e| e.to_string())
    }

    /// One completion call with retries.
    pub fn complete(&self, body: &CompletionRequest) -> Result<CompletionChoice, BackendError> {
        let attempts = self.cfg.retries + 1;
        let mut last = String::new();
        for _ in 0..attempts {
            match self.post(body) {
                Ok(text) => {
                    let parsed: CompletionResponse = serde_json::from_str(&text).map_err(|e| {
                        BackendError::MalformedResponse {
                            message: format!("invalid completion JSON: {e}"),
                        }
                    })?;
                    return parsed.choices.into_iter().next().ok_or_else(|| {
                        BackendError::MalformedResponse {
                            message: "no choices in completion".into(),
                        }
                    });
                }
                Err(e) => last = e,
            }
        }
        Err(BackendError::BackendUnavailable {
            attempts,
            message: last,
        })
    }
}

impl TranslatorBackend for HttpBackend {
    fn next_unit(&mut self, req: &UnitRequest<'_>) -> Result<Unit, BackendError> {
        let body = self.request_body(req.prompt, req.partial_target.is_empty());
        let choice = self.complete(&body)?;
        assemble_unit(&choice, &self.cfg.wait_literal, &self.cfg.eos_literal)
    }
}
