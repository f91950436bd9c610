//! Declarative run matrices: models x pools x shot counts x runs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::ReportRow;
use crate::corpus::{load_parallel, CorpusError, ParallelSample};
use crate::gateway::{
    Backend, Gateway, GatewayError, GenerationCache, GenerationRecord, GenerationRequest, HttpBackend, MockBackend,
    MockConfig, OfflineBackend, RetryPolicy, SamplingParams, WireFormat,
};
use crate::metrics::{corpus_bleu, length_metrics, BleuConfig, CellReport, MetricsError};
use crate::pools::{build_pool, sample_by_id, sample_shots, DemonstrationPool, PoolError, PoolType, DEFAULT_POOL_CAP};
use crate::postprocess::Truncation;
use crate::prompt::{language_name, render, PromptConfig, PromptError, PromptType};
use crate::selection::{
    oracle_bleu_select, select_best, CandidateSet, QualityScorer, ScoreRequest, ScorerConfig, Selection, SelectionError,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration:\n  {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n  "))]
    Config(Vec<ConfigIssue>),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
}

impl ExperimentError {
    fn config(field: &str, message: impl Into<String>) -> Self {
        ExperimentError::Config(vec![ConfigIssue {
            field: field.into(),
            message: message.into(),
        }])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Cache namespace; defaults to `ollama` or `mock`.
    pub id: Option<String>,
    pub url: Option<String>,
    pub wire: WireFormat,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub mock: MockConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Http,
            id: None,
            url: None,
            wire: WireFormat::Ollama,
            timeout_secs: 300,
            max_in_flight: 4,
            retry: RetryPolicy::default(),
            mock: MockConfig::default(),
        }
    }
}

impl BackendConfig {
    pub fn id(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            match self.kind {
                BackendKind::Http => "ollama",
                BackendKind::Mock => "mock",
            }
            .to_owned()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// `src-tgt` language codes, e.g. `en-de`.
    pub language_pair: String,
    pub demo_src: PathBuf,
    pub demo_tgt: PathBuf,
    pub test_src: PathBuf,
    pub test_ref: PathBuf,
    pub models: Vec<String>,
    pub pool_types: Vec<PoolType>,
    pub shots: Vec<usize>,
    pub runs: usize,
    pub matched: bool,
    pub restricted: bool,
    pub seed: u64,
    pub pool_cap: usize,
    pub strict_truncation: bool,
    pub cache_dir: PathBuf,
    pub reports_dir: PathBuf,
    pub backend: BackendConfig,
    pub sampling: SamplingParams,
    pub scorer: ScorerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            language_pair: "en-de".into(),
            demo_src: PathBuf::new(),
            demo_tgt: PathBuf::new(),
            test_src: PathBuf::new(),
            test_ref: PathBuf::new(),
            models: Vec::new(),
            pool_types: PoolType::ALL.to_vec(),
            shots: vec![0, 5],
            runs: 10,
            matched: true,
            restricted: true,
            seed: 42,
            pool_cap: DEFAULT_POOL_CAP,
            strict_truncation: false,
            cache_dir: "cache".into(),
            reports_dir: "reports".into(),
            backend: BackendConfig::default(),
            sampling: SamplingParams::default(),
            scorer: ScorerConfig::default(),
        }
    }
}

/// One (model, pool, shots) combination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellSpec {
    pub model: String,
    pub pool: PoolType,
    pub shots: usize,
}

impl fmt::Display for CellSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {} / {}-shot", self.model, self.pool, self.shots)
    }
}

impl ExperimentConfig {
    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ExperimentError> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ExperimentError::config("config", e.to_string().trim_end()))?;
        for p in [
            &mut cfg.demo_src,
            &mut cfg.demo_tgt,
            &mut cfg.test_src,
            &mut cfg.test_ref,
            &mut cfg.cache_dir,
            &mut cfg.reports_dir,
        ] {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::config("config", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Source and target language display names.
    pub fn languages(&self) -> Result<(&'static str, &'static str), ExperimentError> {
        let (s, t) = self
            .language_pair
            .split_once('-')
            .ok_or_else(|| ExperimentError::config("language_pair", "expected `src-tgt`, e.g. en-de"))?;
        let name = |c: &str| {
            language_name(c)
                .ok_or_else(|| ExperimentError::config("language_pair", format!("unknown language code {c:?}")))
        };
        Ok((name(s)?, name(t)?))
    }

    /// Every problem found, so all can be fixed at once.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let mut issues = match self.languages() {
            Err(ExperimentError::Config(found)) => found,
            _ => Vec::new(),
        };
        let mut issue = |field: &str, message: &str| {
            issues.push(ConfigIssue {
                field: field.into(),
                message: message.into(),
            })
        };
        for (field, p) in [
            ("demo_src", &self.demo_src),
            ("demo_tgt", &self.demo_tgt),
            ("test_src", &self.test_src),
            ("test_ref", &self.test_ref),
        ] {
            if p.as_os_str().is_empty() {
                issue(field, "missing");
            }
        }
        if self.models.is_empty() {
            issue("models", "at least one model is required");
        }
        if self.models.iter().any(|m| m.trim().is_empty()) {
            issue("models", "model names must be non-empty");
        }
        if self.pool_types.is_empty() {
            issue("pool_types", "at least one pool type is required");
        }
        if self.shots.is_empty() {
            issue("shots", "at least one shot count is required");
        }
        if self.runs == 0 {
            issue("runs", "must be at least 1");
        }
        if self.pool_cap == 0 {
            issue("pool_cap", "must be at least 1");
        }
        if self.backend.max_in_flight == 0 {
            issue("backend.max_in_flight", "must be at least 1");
        }
        if let Err(e) = self.sampling.validate() {
            issue("sampling", &e.to_string());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Config(issues))
        }
    }

    pub fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::with_capacity(self.models.len() * self.pool_types.len() * self.shots.len());
        for model in &self.models {
            for pool in &self.pool_types {
                for shots in &self.shots {
                    out.push(CellSpec {
                        model: model.clone(),
                        pool: *pool,
                        shots: *shots,
                    });
                }
            }
        }
        out
    }

    pub fn truncation(&self) -> Truncation {
        if self.strict_truncation {
            Truncation::Strict
        } else {
            Truncation::Lenient
        }
    }

    /// Prompt configuration for a pool and shot count; the instruction follows the pool.
    pub fn prompt_config(&self, pool: PoolType, shots: usize) -> Result<PromptConfig, ExperimentError> {
        let (src, tgt) = self.languages()?;
        Ok(PromptConfig::new(src, tgt, PromptType::matching(pool))
            .with_shots(shots)
            .restricted(self.restricted)
            .matched(self.matched))
    }

    pub fn backend(&self) -> Arc<dyn Backend> {
        let id = self.backend.id();
        match self.backend.kind {
            BackendKind::Http => Arc::new(HttpBackend::new(
                id,
                HttpBackend::resolve_url(self.backend.url.as_deref()),
                self.backend.wire,
                Duration::from_secs(self.backend.timeout_secs),
            )),
            BackendKind::Mock => Arc::new(MockBackend::new(id, self.backend.mock.clone())),
        }
    }

    /// Gateway over `backend` using this config's cache, retry, truncation and sampling.
    pub fn gateway_with(&self, backend: Arc<dyn Backend>) -> Gateway {
        Gateway::new(backend, GenerationCache::persistent(&self.cache_dir))
            .with_retry(self.backend.retry)
            .with_truncation(self.truncation())
            .with_params(self.sampling)
    }

    pub fn gateway(&self) -> Gateway {
        self.gateway_with(self.backend())
    }

    /// Cache-only gateway: every miss is an error, nothing is sent anywhere.
    pub fn replay_gateway(&self) -> Gateway {
        self.gateway_with(Arc::new(OfflineBackend::new(self.backend.id())))
    }
}

/// Demonstration corpus, test set and the pools the matrix needs.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub demos: Vec<ParallelSample>,
    pub test: Vec<ParallelSample>,
    pub pools: BTreeMap<PoolType, DemonstrationPool>,
}

impl ExperimentData {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let demos = load_parallel(&cfg.demo_src, &cfg.demo_tgt)?;
        let test = load_parallel(&cfg.test_src, &cfg.test_ref)?;
        Self::new(cfg, demos, test)
    }

    pub fn new(cfg: &ExperimentConfig, demos: Vec<ParallelSample>, test: Vec<ParallelSample>) -> Result<Self, ExperimentError> {
        let mut pools = BTreeMap::new();
        for p in &cfg.pool_types {
            pools.insert(*p, build_pool(&demos, *p, cfg.pool_cap)?);
        }
        Ok(Self { demos, test, pools })
    }

    pub fn sources(&self) -> Vec<&str> {
        self.test.iter().map(|s| s.source.as_str()).collect()
    }

    pub fn references(&self) -> Vec<&str> {
        self.test.iter().map(|s| s.target.as_str()).collect()
    }
}

/// Requests for one cell, run-major: index `run * n + sentence`.
/// Prompt text depends on the cell's pool, shots and run only, never on the model.
pub fn cell_requests(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    gateway: &Gateway,
    cell: &CellSpec,
) -> Result<Vec<GenerationRequest>, ExperimentError> {
    let pool = &data.pools[&cell.pool];
    let prompt = cfg.prompt_config(cell.pool, cell.shots)?;
    let mut out = Vec::with_capacity(cfg.runs * data.test.len());
    for run in 0..cfg.runs {
        let ids = sample_shots(pool, cell.shots, run, cfg.seed)?;
        let demos: Vec<&ParallelSample> = ids.iter().map(|id| sample_by_id(&data.demos, *id)).collect();
        for s in &data.test {
            let spec = render(&prompt, demos.iter().copied(), &s.source)?;
            out.push(gateway.request(&cell.model, spec, run, s.id));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CellFailure {
    pub sentence_id: usize,
    pub run_index: usize,
    pub error: GatewayError,
}

#[derive(Debug, Clone)]
pub struct CellRun {
    pub spec: CellSpec,
    /// Run-major; `None` where generation failed.
    pub records: Vec<Option<GenerationRecord>>,
    pub failures: Vec<CellFailure>,
    /// Present only when every record exists.
    pub report: Option<CellReport>,
}

impl CellRun {
    /// Cleaned outputs, `[run][sentence]`, if complete.
    pub fn outputs_by_run(&self, n: usize) -> Option<Vec<Vec<String>>> {
        self.records
            .chunks(n)
            .map(|run| run.iter().map(|r| r.as_ref().map(|r| r.truncated_output.clone())).collect())
            .collect()
    }

    pub fn present(&self) -> impl Iterator<Item = &GenerationRecord> {
        self.records.iter().flatten()
    }
}

#[derive(Debug, Clone)]
pub struct MatrixRun {
    pub cells: Vec<CellRun>,
}

impl MatrixRun {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.cells
            .iter()
            .map(|c| ReportRow {
                model: c.spec.model.clone(),
                pool_type: c.spec.pool,
                shots: c.spec.shots,
                cell: c.report,
            })
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = (&CellSpec, &CellFailure)> {
        self.cells.iter().flat_map(|c| c.failures.iter().map(move |f| (&c.spec, f)))
    }

    /// True if any failure means the backend could not serve requests.
    pub fn backend_exhausted(&self) -> bool {
        self.failures().any(|(_, f)| f.error.is_exhaustion())
    }

    pub fn cell(&self, model: &str, pool: PoolType, shots: usize) -> Option<&CellRun> {
        self.cells
            .iter()
            .find(|c| c.spec.model == model && c.spec.pool == pool && c.spec.shots == shots)
    }
}

/// Generates every cell in turn (each cell's requests concurrently) and scores it.
pub fn run_matrix(cfg: &ExperimentConfig, data: &ExperimentData, gateway: &Gateway) -> Result<MatrixRun, ExperimentError> {
    let bleu = BleuConfig::default();
    let sources = data.sources();
    let refs = data.references();
    let n = data.test.len();
    let mut cells = Vec::new();
    for spec in cfg.cells() {
        let requests = cell_requests(cfg, data, gateway, &spec)?;
        let results = gateway.generate_batch(&requests, cfg.backend.max_in_flight);
        let mut records = Vec::with_capacity(results.len());
        let mut failures = Vec::new();
        for (req, res) in requests.iter().zip(results) {
            match res {
                Ok(r) => records.push(Some(r)),
                Err(error) => {
                    failures.push(CellFailure {
                        sentence_id: req.sentence_id,
                        run_index: req.run_index,
                        error,
                    });
                    records.push(None);
                }
            }
        }
        let mut cell = CellRun {
            spec,
            records,
            failures,
            report: None,
        };
        match cell.outputs_by_run(n) {
            Some(outputs) => cell.report = Some(CellReport::compute(&sources, &refs, &outputs, &bleu)?),
            None => warn!("{}: {} generations failed, cell left empty", cell.spec, cell.failures.len()),
        }
        info!("{} done", cell.spec);
        cells.push(cell);
    }
    Ok(MatrixRun { cells })
}

/// Mean QE score over every present record of each complete cell.
pub fn attach_qe(run: &mut MatrixRun, data: &ExperimentData, scorer: &dyn QualityScorer) -> Result<(), SelectionError> {
    for cell in &mut run.cells {
        let Some(report) = cell.report.as_mut() else { continue };
        let requests: Vec<ScoreRequest> = cell
            .records
            .iter()
            .flatten()
            .enumerate()
            .map(|(i, r)| ScoreRequest {
                id: i as u64,
                source: data.test[r.request.sentence_id].source.clone(),
                hypothesis: r.truncated_output.clone(),
                reference: None,
            })
            .collect();
        let scores = scorer.score(&requests)?;
        report.qe_score = Some(scores.iter().sum::<f64>() / scores.len() as f64);
    }
    Ok(())
}

/// How to pick among a sentence's candidates.
#[derive(Clone, Copy)]
pub enum Chooser<'a> {
    Qe(&'a dyn QualityScorer),
    OracleBleu,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionSummary {
    pub k: usize,
    pub n: usize,
    pub lr: f64,
    pub lc: f64,
    pub bleu: f64,
    /// Mean score of the chosen candidates.
    pub mean_score: f64,
    /// Sentences where no candidate was compliant.
    pub fallbacks: usize,
}

/// Best-of-k over the first `k` runs of a cell (nested prefixes of one run set).
pub fn select_from_cell(
    cell: &CellRun,
    data: &ExperimentData,
    k: usize,
    chooser: Chooser<'_>,
) -> Result<(Vec<Selection>, SelectionSummary), ExperimentError> {
    let n = data.test.len();
    let runs = cell.records.len() / n.max(1);
    if k == 0 || k > runs {
        return Err(ExperimentError::config("k", format!("must be in 1..={runs}")));
    }
    let bleu = BleuConfig::default();
    let mut chosen = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    for s in &data.test {
        let candidates = (0..k).filter_map(|run| {
            cell.records[run * n + s.id]
                .as_ref()
                .map(|r| (run, r.truncated_output.clone()))
        });
        let set = CandidateSet::new(s.id, s.source.clone(), candidates)?;
        let sel = match chooser {
            Chooser::Qe(scorer) => select_best(&set, scorer)?,
            Chooser::OracleBleu => oracle_bleu_select(&set, &s.target, &bleu)?,
        };
        outputs.push(set.candidates[sel.index].text.clone());
        chosen.push(sel);
    }
    let pairs: Vec<(&str, &str)> = data.test.iter().map(|s| s.source.as_str()).zip(outputs.iter().map(String::as_str)).collect();
    let len = length_metrics(&pairs)?;
    let summary = SelectionSummary {
        k,
        n,
        lr: len.lr,
        lc: len.lc,
        bleu: corpus_bleu(&outputs, &data.references(), &bleu)?.score,
        mean_score: chosen.iter().map(|c| c.score).sum::<f64>() / n as f64,
        fallbacks: chosen.iter().filter(|c| c.fallback).count(),
    };
    Ok((chosen, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_paths() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            language_pair = "en-fr"
            demo_src = "d.en"
            demo_tgt = "/abs/d.fr"
            test_src = "t.en"
            test_ref = "t.fr"
            models = ["a"]
            shots = [0, 5]
            [backend]
            kind = "mock"
            "#,
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.demo_src, Path::new("/base/d.en"));
        assert_eq!(cfg.demo_tgt, Path::new("/abs/d.fr"));
        assert_eq!(cfg.runs, 10);
        assert_eq!(cfg.backend.id(), "mock");
        assert_eq!(cfg.languages().unwrap(), ("English", "French"));
        assert_eq!(cfg.cells().len(), 10);
        cfg.validate().unwrap();
    }

    #[test]
    fn validation_lists_every_issue() {
        let cfg = ExperimentConfig {
            language_pair: "en-xx".into(),
            runs: 0,
            ..ExperimentConfig::default()
        };
        let Err(ExperimentError::Config(issues)) = cfg.validate() else { panic!() };
        let fields: Vec<&str> = issues.iter().map(|i| i.field.as_str()).collect();
        for f in ["language_pair", "demo_src", "models", "runs"] {
            assert!(fields.contains(&f), "{fields:?}");
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("modles = [\"a\"]", Path::new(".")),
            Err(ExperimentError::Config(_))
        ));
    }
}
