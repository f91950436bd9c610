//! Best-of-k selection, the sentence-BLEU oracle and regenerate-until-compliant policies.

mod policy;
pub mod scorer;

use thiserror::Error;

use crate::corpus::{is_compliant, length_ratio};
use crate::gateway::GatewayError;
use crate::metrics::{sentence_bleu, BleuConfig};
use crate::pools::PoolError;
use crate::prompt::PromptError;

pub use policy::{escalating_policy, generate_until_compliant, Attempts, EscalationOutcome, GenerationSetup, PolicyFailure};
pub use scorer::{
    DummyLengthScorer, HttpScorer, QualityScorer, ScoreRequest, ScoreResponse, ScorerConfig, SubprocessScorer,
    Transport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("scorer unavailable: {0}")]
    ScorerUnavailable(String),
    #[error("scorer protocol violation: {0}")]
    ScorerProtocolViolation(String),
    #[error("budget must be at least 1")]
    InvalidBudget,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

impl SelectionError {
    pub fn is_scorer_failure(&self) -> bool {
        matches!(
            self,
            SelectionError::ScorerUnavailable(_) | SelectionError::ScorerProtocolViolation(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub run_index: usize,
    pub text: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub sentence_id: usize,
    pub source: String,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    /// Ratios are computed here from `source` and each output.
    pub fn new<I, T>(sentence_id: usize, source: impl Into<String>, outputs: I) -> Result<Self, SelectionError>
    where
        I: IntoIterator<Item = (usize, T)>,
        T: Into<String>,
    {
        let source = source.into();
        let candidates: Vec<Candidate> = outputs
            .into_iter()
            .map(|(run_index, text)| {
                let text = text.into();
                Candidate {
                    run_index,
                    ratio: length_ratio(&source, &text),
                    text,
                }
            })
            .collect();
        if candidates.is_empty() {
            return Err(SelectionError::EmptyCandidateSet);
        }
        Ok(Self {
            sentence_id,
            source,
            candidates,
        })
    }

    /// Indices surviving the length filter, or all indices when none comply.
    pub fn survivors(&self) -> (Vec<usize>, bool) {
        let compliant: Vec<usize> = (0..self.candidates.len())
            .filter(|i| is_compliant(self.candidates[*i].ratio))
            .collect();
        if compliant.is_empty() {
            ((0..self.candidates.len()).collect(), true)
        } else {
            (compliant, false)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Position in `CandidateSet::candidates`.
    pub index: usize,
    pub run_index: usize,
    pub score: f64,
    /// No candidate was compliant, so the unfiltered set was used.
    pub fallback: bool,
}

/// Argmax over `indices` with `scores[j]` for `indices[j]`; ties go to the lowest run index.
fn argmax(set: &CandidateSet, indices: &[usize], scores: &[f64], fallback: bool) -> Selection {
    let mut best = 0;
    for j in 1..indices.len() {
        let (c, b) = (&set.candidates[indices[j]], &set.candidates[indices[best]]);
        if scores[j] > scores[best] || (scores[j] == scores[best] && c.run_index < b.run_index) {
            best = j;
        }
    }
    let index = indices[best];
    Selection {
        index,
        run_index: set.candidates[index].run_index,
        score: scores[best],
        fallback,
    }
}

/// Filter, fall back, score survivors with `score`, take the argmax.
pub fn select_with(
    set: &CandidateSet,
    score: impl FnOnce(&[usize]) -> Result<Vec<f64>, SelectionError>,
) -> Result<Selection, SelectionError> {
    if set.candidates.is_empty() {
        return Err(SelectionError::EmptyCandidateSet);
    }
    let (survivors, fallback) = set.survivors();
    let scores = score(&survivors)?;
    if scores.len() != survivors.len() {
        return Err(SelectionError::ScorerProtocolViolation(format!(
            "{} scores for {} candidates",
            scores.len(),
            survivors.len()
        )));
    }
    Ok(argmax(set, &survivors, &scores, fallback))
}

/// Best-of-k with the quality scorer, scoring only length-compliant candidates.
pub fn select_best(set: &CandidateSet, scorer: &dyn QualityScorer) -> Result<Selection, SelectionError> {
    select_with(set, |idx| {
        let requests: Vec<ScoreRequest> = idx
            .iter()
            .map(|i| ScoreRequest {
                id: *i as u64,
                source: set.source.clone(),
                hypothesis: set.candidates[*i].text.clone(),
                reference: None,
            })
            .collect();
        scorer.score(&requests)
    })
}

/// Upper bound: the same selection using sentence BLEU against the reference.
pub fn oracle_bleu_select(set: &CandidateSet, reference: &str, bleu: &BleuConfig) -> Result<Selection, SelectionError> {
    select_with(set, |idx| {
        Ok(idx
            .iter()
            .map(|i| sentence_bleu(&set.candidates[*i].text, reference, bleu))
            .collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(outputs: &[(usize, &str)]) -> CandidateSet {
        CandidateSet::new(0, "abcdefghij", outputs.iter().map(|(r, t)| (*r, t.to_string()))).unwrap()
    }

    fn fixed(scores: Vec<f64>) -> impl FnOnce(&[usize]) -> Result<Vec<f64>, SelectionError> {
        move |idx: &[usize]| Ok(idx.iter().map(|i| scores[*i]).collect())
    }

    #[test]
    fn filter_precedes_scoring() {
        let s = set(&[(0, "0123456789"), (1, "012345678901234")]);
        let sel = select_with(&s, fixed(vec![0.2, 0.9])).unwrap();
        assert_eq!((sel.run_index, sel.fallback), (0, false));
    }

    #[test]
    fn fallback_to_unfiltered() {
        let s = set(&[(0, "01234"), (1, "012345678901234")]);
        let sel = select_with(&s, fixed(vec![0.2, 0.9])).unwrap();
        assert_eq!((sel.run_index, sel.fallback), (1, true));
    }

    #[test]
    fn ties_go_to_lowest_run() {
        let s = set(&[(4, "0123456789"), (2, "0123456789"), (7, "0123456789")]);
        assert_eq!(select_with(&s, fixed(vec![1.0, 1.0, 1.0])).unwrap().run_index, 2);
    }

    #[test]
    fn oracle_picks_reference_copy() {
        let s = CandidateSet::new(0, "the cat sat on the mat", [(0, "a dog stood on a rug"), (1, "the cat sat on the mat")])
            .unwrap();
        let sel = oracle_bleu_select(&s, "the cat sat on the mat", &BleuConfig::default()).unwrap();
        assert_eq!((sel.run_index, sel.score), (1, 100.0));
    }

    #[test]
    fn empty_set_rejected() {
        assert_eq!(
            CandidateSet::new(0, "x", Vec::<(usize, String)>::new()).unwrap_err(),
            SelectionError::EmptyCandidateSet
        );
    }
}
