//! Completion backends behind a content-addressed cache.

mod cache;
mod http;
mod mock;
mod retry;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::postprocess::{truncate_output, Truncation};
use crate::prompt::PromptSpec;

pub use cache::GenerationCache;
pub use http::{HttpBackend, WireFormat, BACKEND_URL_ENV};
pub use mock::{MockBackend, MockConfig, MockMode, MockRule};
pub use retry::RetryPolicy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("backend unreachable after {attempts} attempts: {last}")]
    BackendUnreachable { attempts: u32, last: String },
    #[error("backend returned HTTP {status}: {body}")]
    BackendError { status: u16, body: String },
    #[error("backend timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("no cached completion for key {0}")]
    CacheMiss(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("invalid sampling parameters: {0}")]
    InvalidParams(String),
}

impl GatewayError {
    /// Errors meaning the backend could not serve requests at all.
    pub fn is_exhaustion(&self) -> bool {
        matches!(
            self,
            GatewayError::BackendUnreachable { .. } | GatewayError::Timeout { .. } | GatewayError::BackendError { .. }
        )
    }
}

/// Failure of a single backend call, before retry handling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("connection failed: {0}")]
    Unreachable(String),
    #[error("timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("{0}")]
    Protocol(String),
    #[error("backend is offline")]
    Offline,
}

impl BackendError {
    fn is_retryable(&self) -> bool {
        match self {
            BackendError::Unreachable(_) | BackendError::Timeout => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            BackendError::Protocol(_) | BackendError::Offline => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub top_k: u32,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop_on_eot: bool,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            top_k: 40,
            temperature: 0.8,
            max_tokens: 512,
            stop_on_eot: true,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(GatewayError::InvalidParams(format!("temperature {}", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidParams("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub backend_id: String,
    pub model: String,
    pub prompt: PromptSpec,
    pub params: SamplingParams,
    pub run_index: usize,
    pub sentence_id: usize,
}

impl GenerationRequest {
    /// Hex SHA-256 over (backend, model, prompt text, params, run index).
    pub fn cache_key(&self) -> String {
        let canonical = serde_json::json!([
            self.backend_id,
            self.model,
            self.prompt.text,
            self.params,
            self.run_index
        ]);
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub key: String,
    pub request: GenerationRequest,
    /// Completion exactly as the backend returned it.
    pub raw_output: String,
    pub truncated_output: String,
    pub overgenerated: bool,
    pub latency_ms: u64,
    #[serde(skip)]
    pub from_cache: bool,
}

impl GenerationRecord {
    fn new(request: GenerationRequest, raw_output: String, latency_ms: u64, mode: Truncation) -> Self {
        let t = truncate_output(&raw_output, mode);
        Self {
            key: request.cache_key(),
            request,
            raw_output,
            truncated_output: t.clean,
            overgenerated: t.overgenerated,
            latency_ms,
            from_cache: false,
        }
    }

    fn retruncate(&mut self, mode: Truncation) {
        let t = truncate_output(&self.raw_output, mode);
        self.truncated_output = t.clean;
        self.overgenerated = t.overgenerated;
    }
}

/// Arguments of one completion call.
#[derive(Debug, Clone, Copy)]
pub struct CompletionCall<'a> {
    pub model: &'a str,
    pub prompt: &'a str,
    pub params: &'a SamplingParams,
    pub run_index: usize,
    pub sentence_id: usize,
}

pub trait Backend: Send + Sync {
    /// Name used in cache keys and paths.
    fn id(&self) -> &str;
    fn complete(&self, call: &CompletionCall<'_>) -> Result<String, BackendError>;
}

/// Refuses every call. Pairs with a warm cache to replay a finished run.
pub struct OfflineBackend {
    id: String,
}

impl OfflineBackend {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into() }
    }
}

impl Backend for OfflineBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, _call: &CompletionCall<'_>) -> Result<String, BackendError> {
        Err(BackendError::Offline)
    }
}

pub struct Gateway {
    backend: Arc<dyn Backend>,
    cache: GenerationCache,
    retry: RetryPolicy,
    truncation: Truncation,
    params: SamplingParams,
    calls: AtomicUsize,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, cache: GenerationCache) -> Self {
        Self {
            backend,
            cache,
            retry: RetryPolicy::default(),
            truncation: Truncation::default(),
            params: SamplingParams::default(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_truncation(mut self, truncation: Truncation) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn with_params(mut self, params: SamplingParams) -> Self {
        self.params = params;
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn cache(&self) -> &GenerationCache {
        &self.cache
    }

    /// Backend calls issued so far, counting retries.
    pub fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    /// A request against this gateway's backend with its default parameters.
    pub fn request(&self, model: &str, prompt: PromptSpec, run_index: usize, sentence_id: usize) -> GenerationRequest {
        GenerationRequest {
            backend_id: self.backend.id().to_owned(),
            model: model.to_owned(),
            prompt,
            params: self.params,
            run_index,
            sentence_id,
        }
    }

    /// Returns the cached record for `request`, or calls the backend and caches the result.
    pub fn generate(&self, request: &GenerationRequest) -> Result<GenerationRecord, GatewayError> {
        request.params.validate()?;
        let key = request.cache_key();
        if let Some(mut hit) = self.cache.get(&request.backend_id, &request.model, &key)? {
            hit.retruncate(self.truncation);
            hit.from_cache = true;
            return Ok(hit);
        }
        let call = CompletionCall {
            model: &request.model,
            prompt: &request.prompt.text,
            params: &request.params,
            run_index: request.run_index,
            sentence_id: request.sentence_id,
        };
        let start = Instant::now();
        let raw = self.call_with_retry(&call)?;
        let latency_ms = start.elapsed().as_millis() as u64;
        let record = GenerationRecord::new(request.clone(), raw, latency_ms, self.truncation);
        let mut stored = self.cache.insert(record)?;
        stored.retruncate(self.truncation);
        Ok(stored)
    }

    fn call_with_retry(&self, call: &CompletionCall<'_>) -> Result<String, GatewayError> {
        let mut delays = self.retry.delays();
        let mut attempts = 0;
        loop {
            attempts += 1;
            self.calls.fetch_add(1, Ordering::Relaxed);
            let err = match self.backend.complete(call) {
                Ok(text) => return Ok(text),
                Err(e) => e,
            };
            let delay = if err.is_retryable() { delays.next() } else { None };
            match delay {
                Some(d) => {
                    warn!("{} attempt {attempts} failed ({err}); retrying in {d:?}", self.backend.id());
                    thread::sleep(d);
                }
                None => {
                    return Err(match err {
                        BackendError::Unreachable(last) => GatewayError::BackendUnreachable { attempts, last },
                        BackendError::Timeout => GatewayError::Timeout { attempts },
                        BackendError::Status { status, body } => GatewayError::BackendError { status, body },
                        BackendError::Protocol(m) => GatewayError::Protocol(m),
                        BackendError::Offline => GatewayError::CacheMiss(call_key_hint(call)),
                    })
                }
            }
        }
    }

    /// Runs `requests` with at most `max_in_flight` concurrent calls.
    /// Results are in request order; one failure does not cancel the rest.
    pub fn generate_batch(
        &self,
        requests: &[GenerationRequest],
        max_in_flight: usize,
    ) -> Vec<Result<GenerationRecord, GatewayError>> {
        let workers = max_in_flight.max(1).min(requests.len());
        if workers <= 1 {
            return requests.iter().map(|r| self.generate(r)).collect();
        }
        let slots: Vec<Mutex<Option<Result<GenerationRecord, GatewayError>>>> =
            requests.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= requests.len() {
                        break;
                    }
                    let out = self.generate(&requests[i]);
                    *slots[i].lock().expect("slot lock") = Some(out);
                });
            }
        });
        debug!("batch of {} done, {} backend calls so far", requests.len(), self.backend_calls());
        slots
            .into_iter()
            .map(|m| m.into_inner().expect("slot lock").expect("every slot filled"))
            .collect()
    }
}

fn call_key_hint(call: &CompletionCall<'_>) -> String {
    format!("model={} sentence={} run={}", call.model, call.sentence_id, call.run_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{render_zero_shot, PromptConfig, PromptType};

    fn spec(s: &str) -> PromptSpec {
        render_zero_shot(&PromptConfig::new("English", "German", PromptType::Random), s).unwrap()
    }

    #[test]
    fn key_depends_on_every_field() {
        let g = Gateway::new(Arc::new(MockBackend::echo("mock", 1)), GenerationCache::in_memory());
        let base = g.request("m", spec("Hello."), 0, 0);
        let k = base.cache_key();
        let mut r = base.clone();
        r.run_index = 1;
        assert_ne!(r.cache_key(), k);
        let mut r = base.clone();
        r.model = "n".into();
        assert_ne!(r.cache_key(), k);
        let mut r = base.clone();
        r.params.temperature = 0.7;
        assert_ne!(r.cache_key(), k);
        assert_eq!(base.clone().cache_key(), k);
    }

    #[test]
    fn second_call_is_served_from_cache() {
        let mock = Arc::new(MockBackend::echo("mock", 1));
        let g = Gateway::new(mock.clone(), GenerationCache::in_memory());
        let req = g.request("m", spec("Guten Morgen."), 0, 3);
        let a = g.generate(&req).unwrap();
        let b = g.generate(&req).unwrap();
        assert_eq!(a.raw_output, "Guten Morgen.");
        assert!(!a.from_cache && b.from_cache);
        assert_eq!(mock.calls(), 1);
    }

    #[test]
    fn offline_backend_reports_cache_miss() {
        let g = Gateway::new(Arc::new(OfflineBackend::new("mock")), GenerationCache::in_memory());
        let err = g.generate(&g.request("m", spec("x"), 0, 0)).unwrap_err();
        assert!(matches!(err, GatewayError::CacheMiss(_)));
        assert_eq!(g.backend_calls(), 1);
    }

    #[test]
    fn invalid_params_rejected() {
        let g = Gateway::new(Arc::new(MockBackend::echo("mock", 1)), GenerationCache::in_memory());
        let mut req = g.request("m", spec("x"), 0, 0);
        req.params.temperature = -1.0;
        assert!(matches!(g.generate(&req), Err(GatewayError::InvalidParams(_))));
    }
}
