//! Blocking HTTP client for a text-generation server that accepts a grammar
//! parameter.
//!
//! Request body:
//! `{"inputs": <prompt>, "parameters": {"max_new_tokens": <n>, "grammar": {"type": "regex"|"json", "value": <grammar>}}}`.
//! The response is an object carrying `generated_text`, or a one-element
//! array of such objects. The returned text is untrusted and must be
//! validated by the caller.

use std::fmt;
use std::io;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use crate::regex::{render_regex, schema_to_regex};
use crate::schema::{apply_index_prefix, SchemaError, ToolSpec};

/// A string that never appears in debug output.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GrammarKind {
    #[default]
    Regex,
    JsonSchema,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grammar {
    Regex(String),
    JsonSchema(Value),
}

impl Grammar {
    /// The grammar for `spec` in the requested form. JSON-schema grammars
    /// always carry index-prefixed keys so that servers which sort keys keep
    /// the declared order.
    pub fn for_spec(kind: GrammarKind, spec: &ToolSpec) -> Result<Self, SchemaError> {
        Ok(match kind {
            GrammarKind::Regex => Grammar::Regex(render_regex(&schema_to_regex(spec.parameters()))),
            GrammarKind::JsonSchema => {
                let prefixed = apply_index_prefix(spec)?;
                let value = serde_json::to_value(prefixed.parameters())
                    .expect("schema serialization is infallible");
                Grammar::JsonSchema(value)
            }
        })
    }

    fn to_json(&self) -> Value {
        match self {
            Grammar::Regex(r) => json!({"type": "regex", "value": r}),
            Grammar::JsonSchema(v) => json!({"type": "json", "value": v}),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteBackendConfig {
    pub endpoint_url: String,
    pub timeout: Duration,
    pub max_new_tokens: usize,
    pub grammar_kind: GrammarKind,
    pub auth_token: Option<Secret>,
    /// Requests a single client keeps in flight at once.
    pub max_in_flight: usize,
}

impl RemoteBackendConfig {
    pub fn new(endpoint_url: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            timeout: Duration::from_secs(60),
            max_new_tokens: 512,
            grammar_kind: GrammarKind::Regex,
            auth_token: None,
            max_in_flight: 4,
        }
    }

    pub fn validate(&self) -> Result<(), RemoteError> {
        let url = self.endpoint_url.as_str();
        let absolute = ["http://", "https://"]
            .iter()
            .any(|scheme| url.len() > scheme.len() && url[..scheme.len()].eq_ignore_ascii_case(scheme));
        if !absolute {
            return Err(RemoteError::InvalidConfig(format!(
                "endpoint must be an absolute http(s) URL, got {url:?}"
            )));
        }
        if self.timeout.is_zero() {
            return Err(RemoteError::InvalidConfig("timeout must be positive".into()));
        }
        if self.max_new_tokens == 0 || self.max_in_flight == 0 {
            return Err(RemoteError::InvalidConfig(
                "max_new_tokens and max_in_flight must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RemoteError {
    #[error("request timed out")]
    Timeout,
    #[error("server answered with HTTP {status}: {body}")]
    HttpError { status: u16, body: String },
    #[error("unexpected response: {0}")]
    ProtocolError(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("invalid remote config: {0}")]
    InvalidConfig(String),
}

fn is_timeout(err: &ureq::Transport) -> bool {
    if err.kind() != ureq::ErrorKind::Io {
        return false;
    }
    let mut source = std::error::Error::source(err);
    while let Some(e) = source {
        if let Some(io) = e.downcast_ref::<io::Error>() {
            return matches!(io.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock);
        }
        source = e.source();
    }
    err.to_string().contains("timed out")
}

fn extract_generated_text(body: &str) -> Result<String, RemoteError> {
    let value: Value = serde_json::from_str(body)
        .map_err(|e| RemoteError::ProtocolError(format!("body is not JSON: {e}")))?;
    let object = match &value {
        Value::Array(items) if items.len() == 1 => &items[0],
        other => other,
    };
    match object.get("generated_text") {
        Some(Value::String(text)) => Ok(text.clone()),
        Some(_) => Err(RemoteError::ProtocolError("generated_text is not a string".into())),
        None => Err(RemoteError::ProtocolError("missing generated_text".into())),
    }
}

/// One request, no concurrency limit.
pub fn remote_generate(
    config: &RemoteBackendConfig,
    prompt: &str,
    grammar: &Grammar,
) -> Result<String, RemoteError> {
    config.validate()?;
    let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
    send(&agent, config, prompt, grammar)
}

fn send(
    agent: &ureq::Agent,
    config: &RemoteBackendConfig,
    prompt: &str,
    grammar: &Grammar,
) -> Result<String, RemoteError> {
    let body = json!({
        "inputs": prompt,
        "parameters": {
            "max_new_tokens": config.max_new_tokens,
            "grammar": grammar.to_json(),
        }
    });
    let mut request = agent
        .post(&config.endpoint_url)
        .set("Content-Type", "application/json");
    if let Some(token) = &config.auth_token {
        request = request.set("Authorization", &format!("Bearer {}", token.expose()));
    }
    let response = match request.send_string(&body.to_string()) {
        Ok(r) => r,
        Err(ureq::Error::Status(status, r)) => {
            let body = r.into_string().unwrap_or_default();
            return Err(RemoteError::HttpError { status, body });
        }
        Err(ureq::Error::Transport(t)) if is_timeout(&t) => return Err(RemoteError::Timeout),
        Err(ureq::Error::Transport(t)) => return Err(RemoteError::Transport(t.to_string())),
    };
    let text = response.into_string().map_err(|e| {
        if matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) {
            RemoteError::Timeout
        } else {
            RemoteError::ProtocolError(format!("reading body: {e}"))
        }
    })?;
    extract_generated_text(&text)
}

/// Shared client that caps concurrent requests at `max_in_flight`.
#[derive(Debug)]
pub struct RemoteClient {
    config: RemoteBackendConfig,
    agent: ureq::Agent,
    in_flight: Mutex<usize>,
    released: Condvar,
}

impl RemoteClient {
    pub fn new(config: RemoteBackendConfig) -> Result<Self, RemoteError> {
        config.validate()?;
        let agent = ureq::AgentBuilder::new()
            .timeout(config.timeout)
            .max_idle_connections_per_host(config.max_in_flight)
            .build();
        Ok(Self {
            config,
            agent,
            in_flight: Mutex::new(0),
            released: Condvar::new(),
        })
    }

    pub fn config(&self) -> &RemoteBackendConfig {
        &self.config
    }

    pub fn generate(&self, prompt: &str, grammar: &Grammar) -> Result<String, RemoteError> {
        {
            let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
            while *n >= self.config.max_in_flight {
                n = self.released.wait(n).unwrap_or_else(|e| e.into_inner());
            }
            *n += 1;
        }
        let result = send(&self.agent, &self.config, prompt, grammar);
        *self.in_flight.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.released.notify_one();
        result
    }

    pub fn generate_for(&self, prompt: &str, spec: &ToolSpec) -> Result<String, RemoteError> {
        let grammar = Grammar::for_spec(self.config.grammar_kind, spec)
            .map_err(|e| RemoteError::InvalidConfig(e.to_string()))?;
        self.generate(prompt, &grammar)
    }
}
