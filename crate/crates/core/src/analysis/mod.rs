//! Match-vs-mismatch significance, compliance among default failures, report tables.

pub mod report;
pub mod significance;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{char_count, is_compliant, length_ratio};
use crate::gateway::GenerationRecord;
use crate::metrics::{average_over_runs, MetricsError, SentenceRuns};
use crate::par::Execution;
use crate::pools::PoolType;

pub use report::{emit_match_table, emit_report, write_report, ReportFormat, ReportRow};
pub use significance::{paired_t_test, permutation_test, PairedTest, TestKind, TestResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("nothing to analyse")]
    EmptyInput,
    #[error("conditions cover different sentences: {0}")]
    SentenceSetMismatch(String),
    #[error("every sentence has a compliant default output")]
    EmptyFailureSet,
    #[error("unknown test {0:?} (expected permutation or t)")]
    UnknownTest(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// All outputs of one (model, pool) condition, grouped by sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRuns {
    pub model: String,
    pub pool: PoolType,
    /// Size of the test set the condition was run on.
    pub n_sentences: usize,
    /// Sentence id to its outputs in run order. Sentences without records are absent.
    pub sentences: BTreeMap<usize, SentenceRuns>,
}

impl ConditionRuns {
    pub fn from_records<S: AsRef<str>>(
        model: impl Into<String>,
        pool: PoolType,
        sources: &[S],
        records: &[GenerationRecord],
    ) -> Self {
        let mut grouped: BTreeMap<usize, Vec<(usize, &str)>> = BTreeMap::new();
        for r in records {
            grouped
                .entry(r.request.sentence_id)
                .or_default()
                .push((r.request.run_index, r.truncated_output.as_str()));
        }
        let sentences = grouped
            .into_iter()
            .map(|(id, mut runs)| {
                runs.sort_by_key(|(run, _)| *run);
                let runs = SentenceRuns {
                    src_chars: char_count(sources[id].as_ref()),
                    outputs: runs.into_iter().map(|(_, o)| o.to_owned()).collect(),
                };
                (id, runs)
            })
            .collect();
        Self {
            model: model.into(),
            pool,
            n_sentences: sources.len(),
            sentences,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRow {
    pub model: String,
    pub pool: PoolType,
    pub match_lr: f64,
    pub mismatch_lr: f64,
    pub p_value: f64,
    pub significant: bool,
    /// Sentences present in both conditions.
    pub n: usize,
    /// Sentences missing from either condition.
    pub dropped: usize,
}

/// Per-sentence run-averaged ratios, match vs mismatch, with a paired test per (model, pool).
pub fn match_mismatch_table(
    matched: &[ConditionRuns],
    mismatched: &[ConditionRuns],
    alpha: f64,
    test: &PairedTest,
    exec: Execution,
) -> Result<Vec<MatchRow>, AnalysisError> {
    if matched.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    matched
        .iter()
        .map(|m| {
            let mm = mismatched
                .iter()
                .find(|x| x.model == m.model && x.pool == m.pool)
                .ok_or_else(|| {
                    AnalysisError::SentenceSetMismatch(format!("no mismatched runs for {} / {}", m.model, m.pool))
                })?;
            if m.n_sentences != mm.n_sentences {
                return Err(AnalysisError::SentenceSetMismatch(format!(
                    "{} / {}: {} vs {} sentences",
                    m.model, m.pool, m.n_sentences, mm.n_sentences
                )));
            }
            let common: Vec<usize> = m.sentences.keys().filter(|id| mm.sentences.contains_key(id)).copied().collect();
            if common.is_empty() {
                return Err(AnalysisError::EmptyInput);
            }
            let collect = |c: &ConditionRuns| -> Vec<SentenceRuns> { common.iter().map(|id| c.sentences[id].clone()).collect() };
            let a = average_over_runs(&collect(m), 0)?;
            let b = average_over_runs(&collect(mm), 0)?;
            let t = test.run(exec, &a.per_sentence, &b.per_sentence)?;
            Ok(MatchRow {
                model: m.model.clone(),
                pool: m.pool,
                match_lr: a.value,
                mismatch_lr: b.value,
                p_value: t.p_value,
                significant: t.p_value < alpha,
                n: common.len(),
                dropped: m.n_sentences - common.len(),
            })
        })
        .collect()
}

/// Ratios of each sentence's outputs, in run order.
pub fn ratios_by_sentence<S: AsRef<str>>(sources: &[S], records: &[GenerationRecord]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); sources.len()];
    for r in records {
        let id = r.request.sentence_id;
        out[id].push((r.request.run_index, length_ratio(sources[id].as_ref(), &r.truncated_output)));
    }
    out.into_iter()
        .map(|mut v| {
            v.sort_by_key(|(run, _)| *run);
            v.into_iter().map(|(_, r)| r).collect()
        })
        .collect()
}

/// Sentences with no compliant output in any default run.
pub fn failure_set(default: &[Vec<f64>]) -> Vec<usize> {
    (0..default.len())
        .filter(|i| !default[*i].iter().any(|r| is_compliant(*r)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplianceProportion {
    pub percent: f64,
    pub failures: usize,
    pub hits: usize,
}

/// Among default failures, the percent with a compliant output in the first
/// `attempts` alternative runs.
pub fn compliance_proportion(
    default: &[Vec<f64>],
    alternative: &[Vec<f64>],
    attempts: usize,
) -> Result<ComplianceProportion, AnalysisError> {
    if default.len() != alternative.len() {
        return Err(AnalysisError::SentenceSetMismatch(format!(
            "{} default vs {} alternative sentences",
            default.len(),
            alternative.len()
        )));
    }
    let failures = failure_set(default);
    if failures.is_empty() {
        return Err(AnalysisError::EmptyFailureSet);
    }
    let hits = failures
        .iter()
        .filter(|i| alternative[**i].iter().take(attempts).any(|r| is_compliant(*r)))
        .count();
    Ok(ComplianceProportion {
        percent: 100.0 * hits as f64 / failures.len() as f64,
        failures: failures.len(),
        hits,
    })
}
