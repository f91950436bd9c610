use std::io::ErrorKind;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendError, CompletionCall};

/// Overrides the configured backend base URL.
pub const BACKEND_URL_ENV: &str = "ISOFORGE_BACKEND_URL";

pub const DEFAULT_BASE_URL: &str = "http://localhost:11434";

/// Request/response JSON shape spoken by the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WireFormat {
    /// `POST /api/generate`, answer in `response`.
    #[default]
    Ollama,
    /// `POST /v1/completions`, answer in `choices[0].text`.
    OpenaiCompletions,
}

impl WireFormat {
    fn path(self) -> &'static str {
        match self {
            WireFormat::Ollama => "/api/generate",
            WireFormat::OpenaiCompletions => "/v1/completions",
        }
    }

    fn body(self, call: &CompletionCall<'_>) -> Value {
        let p = call.params;
        match self {
            WireFormat::Ollama => json!({
                "model": call.model,
                "prompt": call.prompt,
                "options": {
                    "top_k": p.top_k,
                    "temperature": p.temperature,
                    "num_predict": p.max_tokens,
                },
                "stream": false,
            }),
            WireFormat::OpenaiCompletions => json!({
                "model": call.model,
                "prompt": call.prompt,
                "top_k": p.top_k,
                "temperature": p.temperature,
                "max_tokens": p.max_tokens,
            }),
        }
    }

    fn extract(self, body: &Value) -> Option<String> {
        let v = match self {
            WireFormat::Ollama => body.get("response"),
            WireFormat::OpenaiCompletions => body.pointer("/choices/0/text"),
        };
        v.and_then(Value::as_str).map(str::to_owned)
    }
}

pub struct HttpBackend {
    id: String,
    base_url: String,
    wire: WireFormat,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(id: impl Into<String>, base_url: impl Into<String>, wire: WireFormat, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            id: id.into(),
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            wire,
            agent,
        }
    }

    /// Base URL from the environment, else `configured`, else the local default.
    pub fn resolve_url(configured: Option<&str>) -> String {
        std::env::var(BACKEND_URL_ENV)
            .ok()
            .filter(|v| !v.is_empty())
            .or_else(|| configured.map(str::to_owned))
            .unwrap_or_else(|| DEFAULT_BASE_URL.to_owned())
    }

    pub fn endpoint(&self) -> String {
        format!("{}{}", self.base_url, self.wire.path())
    }
}

fn map_transport(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        ureq::Error::Io(io) if matches!(io.kind(), ErrorKind::TimedOut | ErrorKind::WouldBlock) => {
            BackendError::Timeout
        }
        other => BackendError::Unreachable(other.to_string()),
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, call: &CompletionCall<'_>) -> Result<String, BackendError> {
        let body = self.wire.body(call).to_string();
        let mut resp = self
            .agent
            .post(&self.endpoint())
            .header("content-type", "application/json")
            .send(body)
            .map_err(map_transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(map_transport)?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Status { status, body: text });
        }
        let json: Value = serde_json::from_str(&text).map_err(|e| BackendError::Protocol(e.to_string()))?;
        self.wire
            .extract(&json)
            .ok_or_else(|| BackendError::Protocol(format!("no completion text in {text}")))
    }
}
