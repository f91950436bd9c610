//! Corpus and sentence BLEU over `13a` tokens, single reference.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tokenize::{is_split_space, tokenize_13a};
use super::MetricsError;
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    None,
    /// Zero-match orders get precision `1 / (2^k * total)`, k counting zero orders so far.
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_order: usize,
    pub smoothing: Smoothing,
    pub effective_order: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_order: 4,
            smoothing: Smoothing::Exp,
            effective_order: false,
        }
    }
}

impl BleuConfig {
    pub fn with_smoothing(mut self, smoothing: Smoothing) -> Self {
        self.smoothing = smoothing;
        self
    }

    pub fn with_effective_order(mut self, on: bool) -> Self {
        self.effective_order = on;
        self
    }

    /// Provenance string in the familiar `key:value|...` form.
    pub fn signature(&self) -> String {
        let mut sig = format!(
            "nrefs:1|case:mixed|eff:{}|tok:13a|smooth:{}",
            if self.effective_order { "yes" } else { "no" },
            match self.smoothing {
                Smoothing::None => "none",
                Smoothing::Exp => "exp",
            }
        );
        if self.max_order != 4 {
            sig.push_str(&format!("|order:{}", self.max_order));
        }
        sig
    }
}

/// Sufficient statistics for one or more segments.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub sys_len: usize,
    pub ref_len: usize,
    pub correct: Vec<usize>,
    pub total: Vec<usize>,
}

impl BleuStats {
    fn zeros(max_order: usize) -> Self {
        Self {
            sys_len: 0,
            ref_len: 0,
            correct: vec![0; max_order],
            total: vec![0; max_order],
        }
    }

    fn add(&mut self, other: &BleuStats) {
        self.sys_len += other.sys_len;
        self.ref_len += other.ref_len;
        for (a, b) in self.correct.iter_mut().zip(&other.correct) {
            *a += b;
        }
        for (a, b) in self.total.iter_mut().zip(&other.total) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    pub score: f64,
    pub precisions: Vec<f64>,
    pub bp: f64,
    pub stats: BleuStats,
}

fn ngram_counts<'a>(tokens: &'a [&'a str], max_order: usize) -> HashMap<&'a [&'a str], usize> {
    let mut counts = HashMap::new();
    for n in 1..=max_order {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn preprocess(segment: &str) -> Vec<String> {
    tokenize_13a(segment.trim_end_matches(is_split_space))
}

/// Segment statistics from already tokenized text.
pub fn segment_stats_tokens(hyp: &[&str], reference: &[&str], max_order: usize) -> BleuStats {
    let ref_counts = ngram_counts(reference, max_order);
    let hyp_counts = ngram_counts(hyp, max_order);
    let mut stats = BleuStats::zeros(max_order);
    stats.sys_len = hyp.len();
    stats.ref_len = reference.len();
    for (gram, count) in hyp_counts {
        let n = gram.len() - 1;
        stats.total[n] += count;
        if let Some(r) = ref_counts.get(gram) {
            stats.correct[n] += count.min(*r);
        }
    }
    stats
}

pub fn segment_stats(hypothesis: &str, reference: &str, max_order: usize) -> BleuStats {
    let h = preprocess(hypothesis);
    let r = preprocess(reference);
    let h: Vec<&str> = h.iter().map(String::as_str).collect();
    let r: Vec<&str> = r.iter().map(String::as_str).collect();
    segment_stats_tokens(&h, &r, max_order)
}

/// Score from aggregated statistics.
pub fn score_from_stats(stats: &BleuStats, config: &BleuConfig) -> BleuScore {
    let max_order = config.max_order;
    let bp = if stats.sys_len < stats.ref_len {
        if stats.sys_len > 0 {
            (1.0 - stats.ref_len as f64 / stats.sys_len as f64).exp()
        } else {
            0.0
        }
    } else {
        1.0
    };
    let mut precisions = vec![0.0; max_order];
    let zero = BleuScore {
        score: 0.0,
        precisions: precisions.clone(),
        bp,
        stats: stats.clone(),
    };
    if stats.correct.iter().all(|c| *c == 0) {
        return zero;
    }

    let mut smooth = 1.0;
    let mut eff_order = max_order;
    for n in 0..max_order {
        if stats.total[n] == 0 {
            break;
        }
        if config.effective_order {
            eff_order = n + 1;
        }
        precisions[n] = if stats.correct[n] == 0 {
            match config.smoothing {
                Smoothing::Exp => {
                    smooth *= 2.0;
                    1.0 / (smooth * stats.total[n] as f64)
                }
                Smoothing::None => 0.0,
            }
        } else {
            stats.correct[n] as f64 / stats.total[n] as f64
        };
    }

    let used = &precisions[..eff_order];
    let score = if used.iter().any(|p| *p == 0.0) {
        0.0
    } else {
        // Fractional precisions keep an exact match at exactly 100.
        100.0 * bp * (used.iter().map(|p| p.ln()).sum::<f64>() / eff_order as f64).exp()
    };
    BleuScore {
        score,
        precisions: precisions.iter().map(|p| 100.0 * p).collect(),
        bp,
        stats: stats.clone(),
    }
}

pub fn corpus_bleu_with<H, R>(
    exec: Execution,
    hypotheses: &[H],
    references: &[R],
    config: &BleuConfig,
) -> Result<BleuScore, MetricsError>
where
    H: AsRef<str> + Sync,
    R: AsRef<str> + Sync,
{
    if hypotheses.len() != references.len() {
        return Err(MetricsError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let per_segment = par::map_range(exec, hypotheses.len(), |i| {
        segment_stats(hypotheses[i].as_ref(), references[i].as_ref(), config.max_order)
    });
    let mut total = BleuStats::zeros(config.max_order);
    for s in &per_segment {
        total.add(s);
    }
    Ok(score_from_stats(&total, config))
}

pub fn corpus_bleu<H, R>(hypotheses: &[H], references: &[R], config: &BleuConfig) -> Result<BleuScore, MetricsError>
where
    H: AsRef<str> + Sync,
    R: AsRef<str> + Sync,
{
    corpus_bleu_with(Execution::default(), hypotheses, references, config)
}

pub fn sentence_bleu(hypothesis: &str, reference: &str, config: &BleuConfig) -> f64 {
    score_from_stats(&segment_stats(hypothesis, reference, config.max_order), config).score
}
