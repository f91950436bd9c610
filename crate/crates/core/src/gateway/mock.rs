//! Deterministic offline backend.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionCall};
use crate::corpus::char_count;
use crate::prompt::query_source;
use crate::rng;

const FILLER: [&str; 16] = [
    "die", "und", "wir", "haben", "eine", "neue", "Idee", "sehr", "Welt", "heute", "mehr", "Zeit", "kann", "gut",
    "alle", "Menschen",
];

const OVERGENERATION_TAIL: &str = "\nNote: the translation above keeps the original meaning.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum MockMode {
    /// Returns the source sentence of the final query.
    Echo,
    /// `outputs[sentence_id]`.
    Fixed { outputs: Vec<String> },
    /// Filler text of `round(r * source chars)` characters, `r ~ N(ratio, noise)` clipped at 0.
    Ratio {
        ratio: f64,
        #[serde(default)]
        noise: f64,
    },
    /// Ratio 1.0 with probability `p`, else `fail_ratio`.
    Bernoulli {
        p: f64,
        #[serde(default = "default_fail_ratio")]
        fail_ratio: f64,
    },
}

fn default_fail_ratio() -> f64 {
    1.3
}

/// Overrides the default mode when every given condition holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub contains: Option<String>,
    pub behaviour: MockMode,
}

impl MockRule {
    fn matches(&self, call: &CompletionCall<'_>) -> bool {
        self.model.as_deref().is_none_or(|m| m == call.model)
            && self.contains.as_deref().is_none_or(|c| call.prompt.contains(c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockConfig {
    pub seed: u64,
    pub default: MockMode,
    pub rules: Vec<MockRule>,
    /// Probability of appending a second line.
    pub overgeneration: f64,
    /// Uniform per-call sleep range in milliseconds.
    pub latency_ms: Option<(u64, u64)>,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            default: MockMode::Echo,
            rules: Vec::new(),
            overgeneration: 0.0,
            latency_ms: None,
        }
    }
}

pub struct MockBackend {
    id: String,
    config: MockConfig,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    failures: Mutex<Vec<BackendError>>,
}

impl MockBackend {
    pub fn new(id: impl Into<String>, config: MockConfig) -> Self {
        Self {
            id: id.into(),
            config,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
            failures: Mutex::new(Vec::new()),
        }
    }

    pub fn echo(id: impl Into<String>, seed: u64) -> Self {
        Self::new(id, MockConfig { seed, ..MockConfig::default() })
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }

    /// The next calls fail with these errors, in order, before normal behaviour resumes.
    pub fn fail_next(&self, errors: impl IntoIterator<Item = BackendError>) {
        let mut f = self.failures.lock().expect("mock lock");
        let mut errors: Vec<BackendError> = errors.into_iter().collect();
        errors.reverse();
        errors.append(&mut f);
        *f = errors;
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    fn mode_for(&self, call: &CompletionCall<'_>) -> &MockMode {
        self.config
            .rules
            .iter()
            .find(|r| r.matches(call))
            .map_or(&self.config.default, |r| &r.behaviour)
    }

    fn produce(&self, call: &CompletionCall<'_>) -> Result<String, BackendError> {
        let mut rng = rng::stream(
            self.config.seed,
            &[rng::hash_str(call.model), rng::hash_str(call.prompt), call.run_index as u64],
        );
        let source = query_source(call.prompt).unwrap_or(call.prompt).trim();
        let src_chars = char_count(source);
        let mut text = match self.mode_for(call) {
            MockMode::Echo => source.to_owned(),
            MockMode::Fixed { outputs } => outputs
                .get(call.sentence_id)
                .cloned()
                .ok_or_else(|| BackendError::Protocol(format!("no fixed output for sentence {}", call.sentence_id)))?,
            MockMode::Ratio { ratio, noise } => {
                let z: f64 = StandardNormal.sample(&mut rng);
                filler(&mut rng, target_len(ratio + noise * z, src_chars))
            }
            MockMode::Bernoulli { p, fail_ratio } => {
                let r = if rng.random_bool(p.clamp(0.0, 1.0)) { 1.0 } else { *fail_ratio };
                filler(&mut rng, target_len(r, src_chars))
            }
        };
        if self.config.overgeneration > 0.0 && rng.random_bool(self.config.overgeneration.clamp(0.0, 1.0)) {
            text.push_str(OVERGENERATION_TAIL);
        }
        if let Some((lo, hi)) = self.config.latency_ms {
            let ms = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            thread::sleep(Duration::from_millis(ms));
        }
        Ok(text)
    }
}

fn target_len(ratio: f64, src_chars: usize) -> usize {
    (ratio.max(0.0) * src_chars as f64).round() as usize
}

/// ASCII filler of exactly `len` characters with no leading or trailing space.
fn filler(rng: &mut impl RngCore, len: usize) -> String {
    let mut out = String::with_capacity(len + 12);
    while out.len() < len {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(FILLER[rng.random_range(0..FILLER.len())]);
    }
    out.truncate(len);
    if out.ends_with(' ') {
        out.pop();
        out.push('s');
    }
    out
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

impl Backend for MockBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, call: &CompletionCall<'_>) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        let _guard = InFlight(&self.in_flight);
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        if let Some(err) = self.failures.lock().expect("mock lock").pop() {
            return Err(err);
        }
        self.produce(call)
    }
}
