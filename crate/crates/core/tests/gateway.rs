mod common;

use std::fs;
use std::io::Write;
use std::sync::Arc;
use std::time::Duration;

use common::TestServer;
use isoforge::gateway::{
    BackendError, Gateway, GatewayError, GenerationCache, HttpBackend, MockBackend, MockConfig, MockMode, RetryPolicy,
    WireFormat,
};
use isoforge::prompt::{render_zero_shot, PromptConfig, PromptSpec, PromptType};
use serde_json::Value;

fn spec(s: &str) -> PromptSpec {
    render_zero_shot(&PromptConfig::new("English", "German", PromptType::Random), s).unwrap()
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        max_retries: 3,
        initial: Duration::from_millis(1),
        multiplier: 4,
    }
}

fn http(url: &str) -> Arc<HttpBackend> {
    Arc::new(HttpBackend::new("ollama", url, WireFormat::Ollama, Duration::from_secs(5)))
}

#[test]
fn ollama_request_shape_and_response() {
    let server = TestServer::start(|_, path, body| {
        assert_eq!(path, "/api/generate");
        let v: Value = serde_json::from_str(body).unwrap();
        assert_eq!(v["model"], "llama3");
        assert_eq!(v["stream"], false);
        assert_eq!(v["options"]["top_k"], 40);
        assert_eq!(v["options"]["temperature"], 0.8);
        assert_eq!(v["options"]["num_predict"], 512);
        (200, r#"{"response":"Hallo Welt.\nExtra line"}"#.into())
    });
    let g = Gateway::new(http(&server.url), GenerationCache::in_memory());
    let rec = g.generate(&g.request("llama3", spec("Hello world."), 0, 0)).unwrap();
    assert_eq!(rec.raw_output, "Hallo Welt.\nExtra line");
    assert_eq!(rec.truncated_output, "Hallo Welt.");
    assert!(rec.overgenerated);
}

#[test]
fn server_errors_are_retried() {
    let server = TestServer::start(|n, _, _| {
        if n < 2 {
            (503, "busy".into())
        } else {
            (200, r#"{"response":"ok"}"#.into())
        }
    });
    let g = Gateway::new(http(&server.url), GenerationCache::in_memory()).with_retry(fast_retry());
    let rec = g.generate(&g.request("m", spec("x"), 0, 0)).unwrap();
    assert_eq!(rec.raw_output, "ok");
    assert_eq!(server.hits(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = TestServer::start(|_, _, _| (404, "model not found".into()));
    let g = Gateway::new(http(&server.url), GenerationCache::in_memory()).with_retry(fast_retry());
    let err = g.generate(&g.request("m", spec("x"), 0, 0)).unwrap_err();
    assert_eq!(
        err,
        GatewayError::BackendError {
            status: 404,
            body: "model not found".into()
        }
    );
    assert_eq!(server.hits(), 1);
}

#[test]
fn persistent_failure_exhausts_retries() {
    let server = TestServer::start(|_, _, _| (500, "down".into()));
    let g = Gateway::new(http(&server.url), GenerationCache::in_memory()).with_retry(fast_retry());
    let err = g.generate(&g.request("m", spec("x"), 0, 0)).unwrap_err();
    assert!(matches!(err, GatewayError::BackendError { status: 500, .. }));
    assert!(err.is_exhaustion());
    assert_eq!(server.hits(), 4);
}

#[test]
fn unreachable_backend() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let g = Gateway::new(http(&url), GenerationCache::in_memory()).with_retry(fast_retry());
    let err = g.generate(&g.request("m", spec("x"), 0, 0)).unwrap_err();
    assert!(matches!(err, GatewayError::BackendUnreachable { attempts: 4, .. }), "{err:?}");
}

#[test]
fn malformed_response_is_protocol_error() {
    let server = TestServer::start(|_, _, _| (200, r#"{"text":"nope"}"#.into()));
    let g = Gateway::new(http(&server.url), GenerationCache::in_memory()).with_retry(fast_retry());
    let err = g.generate(&g.request("m", spec("x"), 0, 0)).unwrap_err();
    assert!(matches!(err, GatewayError::Protocol(_)));
    assert_eq!(server.hits(), 1);
}

#[test]
fn openai_wire_format() {
    let server = TestServer::start(|_, path, body| {
        assert_eq!(path, "/v1/completions");
        let v: Value = serde_json::from_str(body).unwrap();
        assert_eq!(v["max_tokens"], 512);
        (200, r#"{"choices":[{"text":" Hallo"}]}"#.into())
    });
    let b = Arc::new(HttpBackend::new("vllm", &server.url, WireFormat::OpenaiCompletions, Duration::from_secs(5)));
    let g = Gateway::new(b, GenerationCache::in_memory());
    assert_eq!(g.generate(&g.request("m", spec("x"), 0, 0)).unwrap().truncated_output, "Hallo");
}

#[test]
fn timeout_then_recovery_with_mock() {
    let mock = Arc::new(MockBackend::echo("mock", 0));
    mock.fail_next([BackendError::Timeout, BackendError::Timeout]);
    let g = Gateway::new(mock.clone(), GenerationCache::in_memory()).with_retry(fast_retry());
    let rec = g.generate(&g.request("m", spec("Hi."), 0, 0)).unwrap();
    assert_eq!(rec.raw_output, "Hi.");
    assert_eq!(mock.calls(), 3);

    mock.fail_next(std::iter::repeat_n(BackendError::Timeout, 4));
    let err = g.generate(&g.request("m", spec("Hi."), 1, 0)).unwrap_err();
    assert_eq!(err, GatewayError::Timeout { attempts: 4 });
}

#[test]
fn cache_persists_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let mock = Arc::new(MockBackend::new(
        "mock",
        MockConfig {
            default: MockMode::Ratio { ratio: 1.0, noise: 0.3 },
            overgeneration: 0.5,
            ..MockConfig::default()
        },
    ));
    let first: Vec<_> = {
        let g = Gateway::new(mock.clone(), GenerationCache::persistent(dir.path()));
        (0..20)
            .map(|i| g.generate(&g.request("tiny-model", spec(&format!("Sentence number {i}.")), i % 3, i)).unwrap())
            .collect()
    };
    assert_eq!(mock.calls(), 20);
    let path = dir.path().join("mock").join("tiny-model.jsonl");
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 20);

    let g = Gateway::new(mock.clone(), GenerationCache::persistent(dir.path()));
    for (i, before) in first.iter().enumerate() {
        let again = g.generate(&g.request("tiny-model", spec(&format!("Sentence number {i}.")), i % 3, i)).unwrap();
        assert!(again.from_cache);
        let mut b = before.clone();
        b.from_cache = true;
        assert_eq!(again, b);
    }
    assert_eq!(mock.calls(), 20);
}

#[test]
fn truncated_trailing_line_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let mock = Arc::new(MockBackend::echo("mock", 0));
    {
        let g = Gateway::new(mock.clone(), GenerationCache::persistent(dir.path()));
        g.generate(&g.request("m", spec("One."), 0, 0)).unwrap();
        g.generate(&g.request("m", spec("Two."), 0, 1)).unwrap();
    }
    let path = dir.path().join("mock").join("m.jsonl");
    let mut f = fs::OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(br#"{"key":"abc","request":{"backend_id"#).unwrap();
    drop(f);
    let g = Gateway::new(mock.clone(), GenerationCache::persistent(dir.path()));
    assert_eq!(g.cache().len("mock", "m").unwrap(), 2);
    assert!(g.generate(&g.request("m", spec("Two."), 0, 1)).unwrap().from_cache);
    assert_eq!(mock.calls(), 2);
}

#[test]
fn model_names_with_slashes_stay_in_one_directory() {
    let dir = tempfile::tempdir().unwrap();
    let g = Gateway::new(Arc::new(MockBackend::echo("mock", 0)), GenerationCache::persistent(dir.path()));
    g.generate(&g.request("org/model:7b", spec("x"), 0, 0)).unwrap();
    assert!(dir.path().join("mock").join("org_model:7b.jsonl").exists());
}

#[test]
fn batch_preserves_order_and_bounds_concurrency() {
    let mock = Arc::new(MockBackend::new(
        "mock",
        MockConfig {
            latency_ms: Some((2, 6)),
            ..MockConfig::default()
        },
    ));
    let g = Gateway::new(mock.clone(), GenerationCache::in_memory());
    let reqs: Vec<_> = (0..40).map(|i| g.request("m", spec(&format!("Satz {i}.")), 0, i)).collect();
    let out = g.generate_batch(&reqs, 4);
    for (i, r) in out.iter().enumerate() {
        assert_eq!(r.as_ref().unwrap().raw_output, format!("Satz {i}."));
    }
    assert!(mock.peak_in_flight() <= 4);
    assert!(mock.peak_in_flight() >= 2);
}

#[test]
fn batch_reports_errors_per_request() {
    let mock = Arc::new(MockBackend::new(
        "mock",
        MockConfig {
            default: MockMode::Fixed {
                outputs: vec!["a".into(), "b".into()],
            },
            ..MockConfig::default()
        },
    ));
    let g = Gateway::new(mock, GenerationCache::in_memory()).with_retry(RetryPolicy::none());
    let reqs: Vec<_> = (0..3).map(|i| g.request("m", spec(&format!("s{i}")), 0, i)).collect();
    let out = g.generate_batch(&reqs, 3);
    assert_eq!(out[0].as_ref().unwrap().raw_output, "a");
    assert_eq!(out[1].as_ref().unwrap().raw_output, "b");
    assert!(matches!(out[2], Err(GatewayError::Protocol(_))));
}

#[test]
fn concurrent_writers_share_one_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = Gateway::new(Arc::new(MockBackend::echo("mock", 0)), GenerationCache::persistent(dir.path()));
    let reqs: Vec<_> = (0..200).map(|i| g.request("m", spec(&format!("line {i}")), i % 2, i)).collect();
    assert!(g.generate_batch(&reqs, 16).iter().all(Result::is_ok));
    let text = fs::read_to_string(dir.path().join("mock").join("m.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 200);
    for line in text.lines() {
        serde_json::from_str::<Value>(line).unwrap();
    }
}
