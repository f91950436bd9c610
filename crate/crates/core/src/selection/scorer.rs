//! Quality scorers: a native length heuristic and the NDJSON scorer protocol
//! over a child process or HTTP.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::SelectionError;
use crate::corpus::char_count;

pub const PROTOCOL: &str = "isoforge-scorer/1";
pub const DUMMY_METRIC: &str = "dummy-length";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: u64,
    pub source: String,
    pub hypothesis: String,
    pub reference: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub id: u64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol: String,
    pub metric: String,
}

pub trait QualityScorer: Send + Sync {
    fn metric(&self) -> &str;
    /// One score per request, in request order.
    fn score(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>, SelectionError>;
}

/// `-|ratio - 1|`: prefers outputs whose length is closest to the source.
pub fn dummy_length_score(source: &str, hypothesis: &str) -> f64 {
    let src = char_count(source).max(1);
    -(char_count(hypothesis) as f64 / src as f64 - 1.0).abs()
}

#[derive(Debug, Default, Clone, Copy)]
pub struct DummyLengthScorer;

impl QualityScorer for DummyLengthScorer {
    fn metric(&self) -> &str {
        DUMMY_METRIC
    }

    fn score(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>, SelectionError> {
        Ok(requests
            .iter()
            .map(|r| dummy_length_score(&r.source, &r.hypothesis))
            .collect())
    }
}

/// Orders `responses` like `requests`. Every id must be answered exactly once.
pub fn match_responses(requests: &[ScoreRequest], responses: &[ScoreResponse]) -> Result<Vec<f64>, SelectionError> {
    let mut by_id: HashMap<u64, f64> = HashMap::with_capacity(responses.len());
    for r in responses {
        if by_id.insert(r.id, r.score).is_some() {
            return Err(SelectionError::ScorerProtocolViolation(format!("duplicate response for id {}", r.id)));
        }
        if !r.score.is_finite() {
            return Err(SelectionError::ScorerProtocolViolation(format!("non-finite score for id {}", r.id)));
        }
    }
    let scores = requests
        .iter()
        .map(|q| {
            by_id
                .remove(&q.id)
                .ok_or_else(|| SelectionError::ScorerProtocolViolation(format!("no response for id {}", q.id)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(extra) = by_id.keys().next() {
        return Err(SelectionError::ScorerProtocolViolation(format!("response for unknown id {extra}")));
    }
    Ok(scores)
}

/// Answers protocol requests from `input` with `scorer`, one line each, after
/// announcing the handshake. Returns when `input` is exhausted.
pub fn serve_ndjson(
    scorer: &dyn QualityScorer,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<usize, SelectionError> {
    let io = |e: std::io::Error| SelectionError::ScorerUnavailable(e.to_string());
    let hello = Handshake {
        protocol: PROTOCOL.into(),
        metric: scorer.metric().into(),
    };
    writeln!(output, "{}", serde_json::to_string(&hello).expect("serializable")).map_err(io)?;
    output.flush().map_err(io)?;
    let mut served = 0;
    for line in input.lines() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let req: ScoreRequest = serde_json::from_str(&line)
            .map_err(|e| SelectionError::ScorerProtocolViolation(format!("bad request {line:?}: {e}")))?;
        let score = scorer.score(std::slice::from_ref(&req))?[0];
        let resp = ScoreResponse { id: req.id, score };
        writeln!(output, "{}", serde_json::to_string(&resp).expect("serializable")).map_err(io)?;
        output.flush().map_err(io)?;
        served += 1;
    }
    Ok(served)
}

struct Pipes {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Scorer running as a child process speaking NDJSON on stdin/stdout.
pub struct SubprocessScorer {
    metric: String,
    batch_size: usize,
    pipes: Mutex<Pipes>,
}

impl SubprocessScorer {
    pub fn spawn(program: &str, args: &[String], batch_size: usize) -> Result<Self, SelectionError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| SelectionError::ScorerUnavailable(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped");
        let mut stdout = BufReader::new(child.stdout.take().expect("piped"));
        let mut line = String::new();
        let n = stdout
            .read_line(&mut line)
            .map_err(|e| SelectionError::ScorerUnavailable(e.to_string()))?;
        if n == 0 {
            let _ = child.kill();
            return Err(SelectionError::ScorerUnavailable(format!("{program} exited before handshake")));
        }
        let hello: Handshake = serde_json::from_str(line.trim())
            .map_err(|e| SelectionError::ScorerProtocolViolation(format!("bad handshake {line:?}: {e}")))?;
        if hello.protocol != PROTOCOL {
            let _ = child.kill();
            return Err(SelectionError::ScorerProtocolViolation(format!(
                "unsupported protocol {:?}",
                hello.protocol
            )));
        }
        Ok(Self {
            metric: hello.metric,
            batch_size: batch_size.max(1),
            pipes: Mutex::new(Pipes { child, stdin, stdout }),
        })
    }

    fn exchange(pipes: &mut Pipes, batch: &[ScoreRequest]) -> Result<Vec<ScoreResponse>, SelectionError> {
        let gone = |e: std::io::Error| SelectionError::ScorerUnavailable(e.to_string());
        let mut payload = String::new();
        for r in batch {
            payload.push_str(&serde_json::to_string(r).expect("serializable"));
            payload.push('\n');
        }
        pipes.stdin.write_all(payload.as_bytes()).map_err(gone)?;
        pipes.stdin.flush().map_err(gone)?;
        let mut out = Vec::with_capacity(batch.len());
        let mut line = String::new();
        while out.len() < batch.len() {
            line.clear();
            if pipes.stdout.read_line(&mut line).map_err(gone)? == 0 {
                return Err(SelectionError::ScorerUnavailable(format!(
                    "scorer closed its output after {} of {} responses",
                    out.len(),
                    batch.len()
                )));
            }
            if line.trim().is_empty() {
                continue;
            }
            out.push(
                serde_json::from_str(line.trim())
                    .map_err(|e| SelectionError::ScorerProtocolViolation(format!("bad response {line:?}: {e}")))?,
            );
        }
        Ok(out)
    }
}

impl QualityScorer for SubprocessScorer {
    fn metric(&self) -> &str {
        &self.metric
    }

    fn score(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>, SelectionError> {
        let mut pipes = self.pipes.lock().expect("scorer lock");
        let mut scores = Vec::with_capacity(requests.len());
        for batch in requests.chunks(self.batch_size) {
            let responses = Self::exchange(&mut pipes, batch)?;
            scores.extend(match_responses(batch, &responses)?);
        }
        Ok(scores)
    }
}

impl Drop for SubprocessScorer {
    fn drop(&mut self) {
        if let Ok(p) = self.pipes.get_mut() {
            let _ = p.child.kill();
            let _ = p.child.wait();
        }
    }
}

/// Scorer behind `POST <base>/score`.
pub struct HttpScorer {
    metric: String,
    url: String,
    batch_size: usize,
    agent: ureq::Agent,
}

impl HttpScorer {
    pub fn new(base_url: &str, metric: impl Into<String>, batch_size: usize, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            metric: metric.into(),
            url: format!("{}/score", base_url.trim_end_matches('/')),
            batch_size: batch_size.max(1),
            agent,
        }
    }
}

impl QualityScorer for HttpScorer {
    fn metric(&self) -> &str {
        &self.metric
    }

    fn score(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>, SelectionError> {
        let mut scores = Vec::with_capacity(requests.len());
        for batch in requests.chunks(self.batch_size) {
            let body = serde_json::to_string(batch).expect("serializable");
            let mut resp = self
                .agent
                .post(&self.url)
                .header("content-type", "application/json")
                .send(body)
                .map_err(|e| SelectionError::ScorerUnavailable(e.to_string()))?;
            let status = resp.status().as_u16();
            let text = resp
                .body_mut()
                .read_to_string()
                .map_err(|e| SelectionError::ScorerUnavailable(e.to_string()))?;
            if !(200..300).contains(&status) {
                return Err(SelectionError::ScorerUnavailable(format!("HTTP {status}: {text}")));
            }
            let responses: Vec<ScoreResponse> = serde_json::from_str(&text)
                .map_err(|e| SelectionError::ScorerProtocolViolation(format!("bad response body: {e}")))?;
            scores.extend(match_responses(batch, &responses)?);
        }
        Ok(scores)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    /// In-process `dummy-length`.
    #[default]
    Native,
    Subprocess,
    Http,
}

/// How to reach a scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    pub transport: Transport,
    /// Command line for `subprocess`, base URL for `http`.
    pub endpoint: String,
    pub args: Vec<String>,
    pub metric: String,
    pub batch_size: usize,
    pub timeout_secs: u64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self {
            transport: Transport::Native,
            endpoint: String::new(),
            args: Vec::new(),
            metric: DUMMY_METRIC.into(),
            batch_size: 64,
            timeout_secs: 120,
        }
    }
}

impl ScorerConfig {
    pub fn connect(&self) -> Result<Box<dyn QualityScorer>, SelectionError> {
        match self.transport {
            Transport::Native => Ok(Box::new(DummyLengthScorer)),
            Transport::Subprocess => {
                if self.endpoint.is_empty() {
                    return Err(SelectionError::ScorerUnavailable("no scorer command configured".into()));
                }
                Ok(Box::new(SubprocessScorer::spawn(&self.endpoint, &self.args, self.batch_size)?))
            }
            Transport::Http => {
                if self.endpoint.is_empty() {
                    return Err(SelectionError::ScorerUnavailable("no scorer URL configured".into()));
                }
                Ok(Box::new(HttpScorer::new(
                    &self.endpoint,
                    self.metric.clone(),
                    self.batch_size,
                    Duration::from_secs(self.timeout_secs),
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(id: u64) -> ScoreRequest {
        ScoreRequest {
            id,
            source: "abcd".into(),
            hypothesis: "abc".into(),
            reference: None,
        }
    }

    #[test]
    fn responses_matched_by_id() {
        let reqs = [req(1), req(2), req(3)];
        let resp = [
            ScoreResponse { id: 3, score: 0.3 },
            ScoreResponse { id: 1, score: 0.1 },
            ScoreResponse { id: 2, score: 0.2 },
        ];
        assert_eq!(match_responses(&reqs, &resp).unwrap(), [0.1, 0.2, 0.3]);
    }

    #[test]
    fn missing_duplicate_unknown_ids() {
        let reqs = [req(1), req(2)];
        let dup = [ScoreResponse { id: 1, score: 0.0 }, ScoreResponse { id: 1, score: 0.0 }];
        let missing = [ScoreResponse { id: 1, score: 0.0 }];
        let unknown = [
            ScoreResponse { id: 1, score: 0.0 },
            ScoreResponse { id: 2, score: 0.0 },
            ScoreResponse { id: 9, score: 0.0 },
        ];
        for bad in [&dup[..], &missing[..], &unknown[..]] {
            assert!(matches!(
                match_responses(&reqs, bad),
                Err(SelectionError::ScorerProtocolViolation(_))
            ));
        }
    }

    #[test]
    fn dummy_score() {
        assert_eq!(dummy_length_score("abcd", "abcd"), 0.0);
        assert_eq!(dummy_length_score("abcd", "ab"), -0.5);
        assert_eq!(DummyLengthScorer.score(&[req(0)]).unwrap(), [-0.25]);
    }

    #[test]
    fn serve_roundtrip() {
        let input = format!(
            "{}\n\n{}\n",
            serde_json::to_string(&req(7)).unwrap(),
            serde_json::to_string(&req(8)).unwrap()
        );
        let mut out = Vec::new();
        assert_eq!(serve_ndjson(&DummyLengthScorer, input.as_bytes(), &mut out).unwrap(), 2);
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"{"protocol":"isoforge-scorer/1","metric":"dummy-length"}"#);
        assert_eq!(lines[1], r#"{"id":7,"score":-0.25}"#);
        assert_eq!(lines.len(), 3);
    }
}
