//! Length ratio, length compliance and BLEU.

pub mod bleu;
pub mod tokenize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{char_count, is_compliant, mean_and_population_std};

pub use bleu::{corpus_bleu, corpus_bleu_with, sentence_bleu, BleuConfig, BleuScore, Smoothing};
pub use tokenize::tokenize_13a;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty input")]
    EmptySet,
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("source {index} has no characters")]
    EmptySource { index: usize },
    #[error("sentence {index} has no records")]
    NoRecords { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthMetrics {
    pub n: usize,
    pub lr: f64,
    pub lr_std: f64,
    pub lc: f64,
}

/// Per-pair ratios `char_count(output) / char_count(source)`. Empty outputs give 0.0.
pub fn pair_ratios<S, O>(pairs: &[(S, O)]) -> Result<Vec<f64>, MetricsError>
where
    S: AsRef<str>,
    O: AsRef<str>,
{
    pairs
        .iter()
        .enumerate()
        .map(|(i, (s, o))| {
            let src = char_count(s.as_ref());
            if src == 0 {
                return Err(MetricsError::EmptySource { index: i });
            }
            Ok(char_count(o.as_ref()) as f64 / src as f64)
        })
        .collect()
}

pub fn length_metrics_from_ratios(ratios: &[f64]) -> Result<LengthMetrics, MetricsError> {
    let (lr, lr_std) = mean_and_population_std(ratios).ok_or(MetricsError::EmptySet)?;
    let compliant = ratios.iter().filter(|r| is_compliant(**r)).count();
    Ok(LengthMetrics {
        n: ratios.len(),
        lr,
        lr_std,
        lc: 100.0 * compliant as f64 / ratios.len() as f64,
    })
}

pub fn length_metrics<S, O>(pairs: &[(S, O)]) -> Result<LengthMetrics, MetricsError>
where
    S: AsRef<str>,
    O: AsRef<str>,
{
    length_metrics_from_ratios(&pair_ratios(pairs)?)
}

/// All runs collected for one source sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRuns {
    pub src_chars: usize,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunAverage {
    /// Mean output length over runs divided by source length, per sentence.
    pub per_sentence: Vec<f64>,
    /// Mean of `per_sentence`.
    pub value: f64,
    /// `expected_runs * n` minus the records actually present.
    pub missing_runs: usize,
}

/// Averages output lengths over runs per sentence first, then ratios over sentences.
pub fn average_over_runs(sentences: &[SentenceRuns], expected_runs: usize) -> Result<RunAverage, MetricsError> {
    if sentences.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let mut per_sentence = Vec::with_capacity(sentences.len());
    let mut present = 0;
    for (i, s) in sentences.iter().enumerate() {
        if s.outputs.is_empty() {
            return Err(MetricsError::NoRecords { index: i });
        }
        if s.src_chars == 0 {
            return Err(MetricsError::EmptySource { index: i });
        }
        present += s.outputs.len();
        let mean_len = s.outputs.iter().map(|o| char_count(o) as f64).sum::<f64>() / s.outputs.len() as f64;
        per_sentence.push(mean_len / s.src_chars as f64);
    }
    let value = per_sentence.iter().sum::<f64>() / per_sentence.len() as f64;
    Ok(RunAverage {
        per_sentence,
        value,
        missing_runs: (expected_runs * sentences.len()).saturating_sub(present),
    })
}

/// Aggregate metrics for one cell of a run matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub lr: f64,
    pub lr_std: f64,
    pub lc: f64,
    /// Mean over runs of per-run corpus BLEU.
    pub bleu: f64,
    pub n: usize,
    pub runs: usize,
    pub qe_score: Option<f64>,
}

impl CellReport {
    /// `outputs_by_run[r][i]` is the cleaned output of run `r` for sentence `i`.
    /// Length statistics pool every (sentence, run) pair.
    pub fn compute<S, R>(
        sources: &[S],
        references: &[R],
        outputs_by_run: &[Vec<String>],
        bleu: &BleuConfig,
    ) -> Result<Self, MetricsError>
    where
        S: AsRef<str> + Sync,
        R: AsRef<str> + Sync,
    {
        if outputs_by_run.is_empty() {
            return Err(MetricsError::EmptySet);
        }
        let mut ratios = Vec::with_capacity(sources.len() * outputs_by_run.len());
        let mut bleu_sum = 0.0;
        for outputs in outputs_by_run {
            if outputs.len() != sources.len() {
                return Err(MetricsError::LengthMismatch {
                    hypotheses: outputs.len(),
                    references: sources.len(),
                });
            }
            let pairs: Vec<(&str, &str)> = sources.iter().map(AsRef::as_ref).zip(outputs.iter().map(String::as_str)).collect();
            ratios.extend(pair_ratios(&pairs)?);
            bleu_sum += corpus_bleu(outputs, references, bleu)?.score;
        }
        let len = length_metrics_from_ratios(&ratios)?;
        Ok(Self {
            lr: len.lr,
            lr_std: len.lr_std,
            lc: len.lc,
            bleu: bleu_sum / outputs_by_run.len() as f64,
            n: sources.len(),
            runs: outputs_by_run.len(),
            qe_score: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_outputs() {
        let pairs = [("Hello there.", "Hello there."), ("abc", "abc")];
        let m = length_metrics(&pairs).unwrap();
        assert_eq!((m.lr, m.lc), (1.0, 100.0));
    }

    #[test]
    fn three_ratios() {
        let pairs = [("aa", "a"), ("aa", "bb"), ("aa", "ccc")];
        let m = length_metrics(&pairs).unwrap();
        assert_eq!(m.lr, 1.0);
        assert!((m.lc - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_output_is_noncompliant_zero() {
        let m = length_metrics(&[("abc", "  ")]).unwrap();
        assert_eq!((m.lr, m.lc), (0.0, 0.0));
        assert_eq!(length_metrics(&[("", "x")]).unwrap_err(), MetricsError::EmptySource { index: 0 });
        assert_eq!(length_metrics::<&str, &str>(&[]).unwrap_err(), MetricsError::EmptySet);
    }

    #[test]
    fn run_averages() {
        let one = SentenceRuns { src_chars: 10, outputs: vec!["x".repeat(8), "y".repeat(12)] };
        let avg = average_over_runs(&[one], 2).unwrap();
        assert_eq!(avg.per_sentence, [1.0]);
        let a = SentenceRuns { src_chars: 10, outputs: vec!["x".repeat(9)] };
        let b = SentenceRuns { src_chars: 10, outputs: vec!["x".repeat(11)] };
        let avg = average_over_runs(&[a, b], 10).unwrap();
        assert!((avg.value - 1.0).abs() < 1e-15);
        assert_eq!(avg.missing_runs, 18);
        let empty = SentenceRuns { src_chars: 3, outputs: vec![] };
        assert_eq!(average_over_runs(&[empty], 1).unwrap_err(), MetricsError::NoRecords { index: 0 });
    }

    #[test]
    fn cell_report_pools_runs() {
        let src = ["aaaaaaaaaa", "bbbbbbbbbb"];
        let refs = ["x y z w", "p q r s"];
        let runs = vec![
            vec!["x y z w".to_string(), "p q r".to_string()],
            vec!["x y z".to_string(), "p q r s".to_string()],
        ];
        let c = CellReport::compute(&src, &refs, &runs, &BleuConfig::default()).unwrap();
        assert_eq!((c.n, c.runs), (2, 2));
        assert!((c.lr - (0.7 + 0.5 + 0.5 + 0.7) / 4.0).abs() < 1e-12);
        assert_eq!(c.lc, 0.0);
    }
}
