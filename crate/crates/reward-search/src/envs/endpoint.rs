//! HTTP adapter for real policy and reward servers.
//!
//! Completions POST to the policy URL with the configured stop sequence and
//! sampling parameters; scoring POSTs the rendered state to the reward URL
//! and expects `{"score": x}` with `x` in `[0, 1]`. Transport failures retry
//! up to `retry_count` times; scores are cached per rendered state for the
//! lifetime of the adapter.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::core::{ReasoningStep, SearchNode, STEP_DELIMITER};
use crate::search::{EnvError, Environment};

/// Environment variables that override the configured URLs and supply the
/// bearer token.
pub const POLICY_URL_VAR: &str = "RS_POLICY_URL";
pub const REWARD_URL_VAR: &str = "RS_REWARD_URL";
pub const API_KEY_VAR: &str = "RS_API_KEY";

/// Request body dialect for the policy server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WireFormat {
    /// `{prompt, stop, temperature, top_p, repetition_penalty, max_tokens,
    /// seed}` -> `{text, tokens?}`.
    #[default]
    Simple,
    /// OpenAI-style completions: `{model?, prompt, stop: [..], ...}` ->
    /// `{choices: [{text}], usage: {completion_tokens}}`.
    Openai,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub policy_url: String,
    pub reward_url: String,
    #[serde(default = "default_stop_sequence")]
    pub stop_sequence: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default = "default_repetition_penalty")]
    pub repetition_penalty: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens_per_step: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retry_count: u32,
    #[serde(default)]
    pub wire_format: WireFormat,
    #[serde(default)]
    pub model: Option<String>,
}

fn default_stop_sequence() -> String {
    STEP_DELIMITER.to_string()
}
fn default_temperature() -> f64 {
    0.7
}
fn default_top_p() -> f64 {
    0.8
}
fn default_repetition_penalty() -> f64 {
    1.05
}
fn default_max_tokens() -> u32 {
    512
}
fn default_timeout() -> u64 {
    120
}
fn default_retries() -> u32 {
    2
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.temperature <= 0.0 {
            return Err(EnvError::InvalidSpec(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if self.policy_url.is_empty() || self.reward_url.is_empty() {
            return Err(EnvError::InvalidSpec(
                "policy_url and reward_url must be set".into(),
            ));
        }
        Ok(())
    }

    /// Applies `RS_POLICY_URL` / `RS_REWARD_URL` overrides.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(url) = std::env::var(POLICY_URL_VAR) {
            self.policy_url = url;
        }
        if let Ok(url) = std::env::var(REWARD_URL_VAR) {
            self.reward_url = url;
        }
        self
    }
}

pub struct EndpointEnv {
    cfg: EndpointConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    score_cache: Mutex<HashMap<String, f64>>,
}

impl EndpointEnv {
    pub fn new(cfg: EndpointConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build();
        Ok(Self {
            cfg,
            agent,
            api_key: std::env::var(API_KEY_VAR).ok(),
            score_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    fn post(&self, url: &str, body: &serde_json::Value) -> Result<serde_json::Value, EnvError> {
        let attempts = self.cfg.retry_count + 1;
        let mut last_err = String::new();
        for _ in 0..attempts {
            let mut req = self.agent.post(url);
            if let Some(key) = &self.api_key {
                req = req.set("Authorization", &format!("Bearer {key}"));
            }
            match req.send_json(body.clone()) {
                Ok(resp) => {
                    return resp.into_json().map_err(|e| {
                        EnvError::Protocol(format!("response is not JSON: {e}"))
                    });
                }
                Err(ureq::Error::Status(code, resp)) if code >= 500 => {
                    last_err = format!("HTTP {code} {}", resp.status_text());
                }
                Err(ureq::Error::Status(code, resp)) => {
                    return Err(EnvError::Protocol(format!(
                        "HTTP {code} {}",
                        resp.status_text()
                    )));
                }
                Err(ureq::Error::Transport(t)) => {
                    last_err = t.to_string();
                }
            }
        }
        Err(EnvError::Transport {
            attempts,
            detail: last_err,
        })
    }

    fn completion_request(&self, prompt: &str, seed: u64) -> serde_json::Value {
        match self.cfg.wire_format {
            WireFormat::Simple => json!({
                "prompt": prompt,
                "stop": self.cfg.stop_sequence,
                "temperature": self.cfg.temperature,
                "top_p": self.cfg.top_p,
                "repetition_penalty": self.cfg.repetition_penalty,
                "max_tokens": self.cfg.max_tokens_per_step,
                "seed": seed,
            }),
            WireFormat::Openai => {
                let mut body = json!({
                    "prompt": prompt,
                    "stop": [self.cfg.stop_sequence],
                    "temperature": self.cfg.temperature,
                    "top_p": self.cfg.top_p,
                    "repetition_penalty": self.cfg.repetition_penalty,
                    "max_tokens": self.cfg.max_tokens_per_step,
                    "seed": seed,
                });
                if let Some(model) = &self.cfg.model {
                    body["model"] = json!(model);
                }
                body
            }
        }
    }

    /// Extracts `(text, token_count)` from a completion response. Token
    /// counts fall back to a whitespace count when the server omits them.
    fn parse_completion(&self, body: &serde_json::Value) -> Result<(String, u64), EnvError> {
        let (text, tokens) = match self.cfg.wire_format {
            WireFormat::Simple => {
                let text = body
                    .get("text")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| EnvError::Protocol("missing `text` field".into()))?;
                (text.to_string(), body.get("tokens").and_then(|v| v.as_u64()))
            }
            WireFormat::Openai => {
                let text = body
                    .pointer("/choices/0/text")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| EnvError::Protocol("missing `choices[0].text`".into()))?;
                (
                    text.to_string(),
                    body.pointer("/usage/completion_tokens").and_then(|v| v.as_u64()),
                )
            }
        };
        // Keep everything before the stop sequence; servers differ on
        // whether they include it.
        let text = match text.find(&self.cfg.stop_sequence) {
            Some(pos) => text[..pos].to_string(),
            None => text,
        };
        let tokens = tokens.unwrap_or_else(|| text.split_whitespace().count() as u64);
        Ok((text, tokens))
    }
}

impl Environment for EndpointEnv {
    /// Issues `k` completion requests with derived seeds, strips the stop
    /// sequence, and records real token counts. An empty completion becomes
    /// an end-of-text sentinel step, which forces the child terminal and
    /// prevents resampling loops.
    fn sample_actions(
        &self,
        state: &SearchNode,
        k: usize,
        seed: u64,
    ) -> Result<Vec<ReasoningStep>, EnvError> {
        let prompt = state.rendered();
        let mut steps = Vec::with_capacity(k);
        for i in 0..k {
            let body = self.completion_request(&prompt, seed.wrapping_add(i as u64));
            let resp = self.post(&self.cfg.policy_url, &body)?;
            let (text, tokens) = self.parse_completion(&resp)?;
            let step = if text.is_empty() {
                ReasoningStep::end_of_text()
            } else {
                ReasoningStep::new(text, tokens.max(1))
                    .map_err(|e| EnvError::Protocol(e.to_string()))?
            };
            steps.push(step);
        }
        Ok(steps)
    }

    fn score(&self, state: &SearchNode) -> Result<f64, EnvError> {
        let rendered = state.rendered();
        if let Some(&score) = self
            .score_cache
            .lock()
            .expect("score cache lock")
            .get(&rendered)
        {
            return Ok(score);
        }
        let resp = self.post(&self.cfg.reward_url, &json!({ "text": rendered }))?;
        let score = resp
            .get("score")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| EnvError::Protocol("missing `score` field".into()))?;
        if !(0.0..=1.0).contains(&score) || score.is_nan() {
            return Err(EnvError::ScoreOutOfRange(score));
        }
        self.score_cache
            .lock()
            .expect("score cache lock")
            .insert(rendered, score);
        Ok(score)
    }
}
