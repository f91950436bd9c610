mod common;

use std::sync::Arc;
use std::time::Duration;

use common::TestServer;
use isoforge::corpus::ParallelSample;
use isoforge::gateway::{BackendError, Gateway, GenerationCache, MockBackend, MockConfig, MockMode, RetryPolicy};
use isoforge::pools::{build_pool, PoolType};
use isoforge::prompt::{PromptConfig, PromptType};
use isoforge::selection::scorer::{ScoreResponse, PROTOCOL};
use isoforge::selection::{
    escalating_policy, generate_until_compliant, select_best, CandidateSet, DummyLengthScorer, GenerationSetup,
    HttpScorer, QualityScorer, ScoreRequest, ScorerConfig, SelectionError, SubprocessScorer, Transport,
};
use serde_json::Value;

fn requests(n: u64) -> Vec<ScoreRequest> {
    (0..n)
        .map(|id| ScoreRequest {
            id,
            source: "x".repeat(10),
            hypothesis: "y".repeat(id as usize % 20),
            reference: None,
        })
        .collect()
}

// Answers each request line with score = id / 100, in reverse order per batch of 2.
const SH_SCORER: &str = r#"
echo '{"protocol":"isoforge-scorer/1","metric":"sh"}'
while read a; do
  read b || { id=$(echo "$a" | sed 's/.*"id":\([0-9]*\).*/\1/'); echo "{\"id\":$id,\"score\":$id.5}"; continue; }
  ia=$(echo "$a" | sed 's/.*"id":\([0-9]*\).*/\1/')
  ib=$(echo "$b" | sed 's/.*"id":\([0-9]*\).*/\1/')
  echo "{\"id\":$ib,\"score\":$ib.5}"
  echo "{\"id\":$ia,\"score\":$ia.5}"
done
"#;

#[test]
fn subprocess_scorer_matches_by_id() {
    let s = SubprocessScorer::spawn("sh", &["-c".into(), SH_SCORER.into()], 2).unwrap();
    assert_eq!(s.metric(), "sh");
    let scores = s.score(&requests(6)).unwrap();
    assert_eq!(scores, [0.5, 1.5, 2.5, 3.5, 4.5, 5.5]);
    // a second call reuses the same process
    assert_eq!(s.score(&requests(2)).unwrap(), [0.5, 1.5]);
}

#[test]
fn subprocess_duplicate_id_is_violation() {
    let script = r#"echo '{"protocol":"isoforge-scorer/1","metric":"dup"}'; while read a; do echo '{"id":0,"score":1.0}'; done"#;
    let s = SubprocessScorer::spawn("sh", &["-c".into(), script.into()], 2).unwrap();
    let err = s.score(&requests(2)).unwrap_err();
    assert!(matches!(err, SelectionError::ScorerProtocolViolation(_)), "{err:?}");
}

#[test]
fn subprocess_that_dies_is_unavailable() {
    let script = r#"echo '{"protocol":"isoforge-scorer/1","metric":"quit"}'; read a; exit 0"#;
    let s = SubprocessScorer::spawn("sh", &["-c".into(), script.into()], 4).unwrap();
    assert!(matches!(s.score(&requests(3)), Err(SelectionError::ScorerUnavailable(_))));
}

#[test]
fn subprocess_handshake_checked() {
    let wrong = r#"echo '{"protocol":"other/9","metric":"x"}'; cat"#;
    assert!(matches!(
        SubprocessScorer::spawn("sh", &["-c".into(), wrong.into()], 1),
        Err(SelectionError::ScorerProtocolViolation(_))
    ));
    assert!(matches!(
        SubprocessScorer::spawn("sh", &["-c".into(), "exit 1".into()], 1),
        Err(SelectionError::ScorerUnavailable(_))
    ));
    assert!(matches!(
        SubprocessScorer::spawn("/nonexistent/scorer", &[], 1),
        Err(SelectionError::ScorerUnavailable(_))
    ));
}

#[test]
fn http_scorer_batches_and_matches() {
    let server = TestServer::start(|_, path, body| {
        assert_eq!(path, "/score");
        let reqs: Vec<ScoreRequest> = serde_json::from_str(body).unwrap();
        assert!(reqs.len() <= 3);
        let mut out: Vec<ScoreResponse> = reqs
            .iter()
            .map(|r| ScoreResponse {
                id: r.id,
                score: r.id as f64 * 2.0,
            })
            .collect();
        out.reverse();
        (200, serde_json::to_string(&out).unwrap())
    });
    let s = HttpScorer::new(&server.url, "remote", 3, Duration::from_secs(5));
    assert_eq!(s.score(&requests(7)).unwrap(), [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0]);
    assert_eq!(server.hits(), 3);
}

#[test]
fn http_scorer_errors() {
    let server = TestServer::start(|_, _, body| {
        let reqs: Vec<Value> = serde_json::from_str(body).unwrap();
        if reqs.len() == 1 {
            (500, "boom".into())
        } else {
            (200, r#"[{"id":0,"score":1.0}]"#.into())
        }
    });
    let s = HttpScorer::new(&server.url, "remote", 8, Duration::from_secs(5));
    assert!(matches!(s.score(&requests(1)), Err(SelectionError::ScorerUnavailable(_))));
    assert!(matches!(s.score(&requests(2)), Err(SelectionError::ScorerProtocolViolation(_))));
}

#[test]
fn select_best_through_transports_agrees_with_native() {
    let sets: Vec<CandidateSet> = (0..20)
        .map(|i| {
            CandidateSet::new(
                i,
                "a".repeat(20),
                (0..5).map(|r| (r, "b".repeat(10 + (i * 7 + r * 3) % 20))),
            )
            .unwrap()
        })
        .collect();
    let server = TestServer::start(|_, _, body| {
        let reqs: Vec<ScoreRequest> = serde_json::from_str(body).unwrap();
        let out: Vec<ScoreResponse> = reqs
            .iter()
            .map(|r| ScoreResponse {
                id: r.id,
                score: isoforge::selection::scorer::dummy_length_score(&r.source, &r.hypothesis),
            })
            .collect();
        (200, serde_json::to_string(&out).unwrap())
    });
    let http = ScorerConfig {
        transport: Transport::Http,
        endpoint: server.url.clone(),
        ..ScorerConfig::default()
    }
    .connect()
    .unwrap();
    for set in &sets {
        assert_eq!(select_best(set, &DummyLengthScorer).unwrap(), select_best(set, http.as_ref()).unwrap());
    }
    assert_eq!(PROTOCOL, "isoforge-scorer/1");
}

fn demos() -> Vec<ParallelSample> {
    (0..60)
        .map(|i| ParallelSample::new(i, format!("source sentence {i:03}"), "t".repeat(8 + i % 15)).unwrap())
        .collect()
}

fn mock(default: MockMode, tiny: MockMode) -> Arc<MockBackend> {
    Arc::new(MockBackend::new(
        "mock",
        MockConfig {
            seed: 11,
            default,
            rules: vec![isoforge::gateway::MockRule {
                model: None,
                contains: Some("shorter than the source".into()),
                behaviour: tiny,
            }],
            ..MockConfig::default()
        },
    ))
}

#[test]
fn until_compliant_budget_and_escalation() {
    let demos = demos();
    let random = build_pool(&demos, PoolType::Random, 50).unwrap();
    let tiny = build_pool(&demos, PoolType::Tiny, 50).unwrap();
    let default_prompt = PromptConfig::new("English", "German", PromptType::Random).with_shots(3);
    let tiny_prompt = PromptConfig::new("English", "German", PromptType::ShortTiny).with_shots(3);
    let backend = mock(MockMode::Ratio { ratio: 1.3, noise: 0.0 }, MockMode::Ratio { ratio: 0.95, noise: 0.0 });
    let g = Gateway::new(backend.clone(), GenerationCache::in_memory());
    let d = GenerationSetup {
        gateway: &g,
        model: "m",
        demos: &demos,
        pool: &random,
        prompt: &default_prompt,
        seed: 1,
    };
    let t = GenerationSetup {
        pool: &tiny,
        prompt: &tiny_prompt,
        ..d
    };
    let src = "This is a test sentence of moderate length.";

    let a = generate_until_compliant(&d, 0, src, 3).unwrap();
    assert_eq!((a.records.len(), a.success), (3, false));
    let runs: Vec<usize> = a.records.iter().map(|r| r.request.run_index).collect();
    assert_eq!(runs, [0, 1, 2]);
    assert_ne!(a.records[0].request.prompt.demo_ids, a.records[1].request.prompt.demo_ids);

    let e = escalating_policy(&d, &t, 0, src, 3, 4).unwrap();
    assert_eq!((e.records.len(), e.success, e.escalated), (4, true, true));

    let ok = generate_until_compliant(&t, 0, src, 5).unwrap();
    assert_eq!((ok.records.len(), ok.success), (1, true));
    let e = escalating_policy(&t, &d, 0, src, 2, 2).unwrap();
    assert_eq!((e.records.len(), e.escalated), (1, false));

    assert!(generate_until_compliant(&d, 0, src, 0).is_err());
}

#[test]
fn backend_error_keeps_partial_records() {
    let demos = demos();
    let random = build_pool(&demos, PoolType::Random, 50).unwrap();
    let prompt = PromptConfig::new("English", "German", PromptType::Random);
    let backend = mock(MockMode::Ratio { ratio: 1.5, noise: 0.0 }, MockMode::Echo);
    let g = Gateway::new(backend.clone(), GenerationCache::in_memory()).with_retry(RetryPolicy::none());
    let d = GenerationSetup {
        gateway: &g,
        model: "m",
        demos: &demos,
        pool: &random,
        prompt: &prompt,
        seed: 1,
    };
    generate_until_compliant(&d, 0, "Short one here.", 1).unwrap();
    backend.fail_next([BackendError::Status {
        status: 503,
        body: "x".into(),
    }]);
    let f = generate_until_compliant(&d, 0, "Short one here.", 3).unwrap_err();
    // run 0 is cached, run 1 fails
    assert_eq!(f.records.len(), 1);
    assert!(matches!(f.error, SelectionError::Gateway(_)));
}
