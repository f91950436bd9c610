use crate::corpus::{is_compliant, length_ratio, ParallelSample};
use crate::gateway::{Gateway, GenerationRecord};
use crate::pools::{sample_by_id, sample_shots, DemonstrationPool};
use crate::prompt::{render, PromptConfig};

use super::SelectionError;

/// Everything needed to issue one attempt for a sentence.
#[derive(Clone, Copy)]
pub struct GenerationSetup<'a> {
    pub gateway: &'a Gateway,
    pub model: &'a str,
    pub demos: &'a [ParallelSample],
    pub pool: &'a DemonstrationPool,
    pub prompt: &'a PromptConfig,
    pub seed: u64,
}

impl GenerationSetup<'_> {
    /// Samples shots for `run_index`, renders and generates.
    pub fn attempt(&self, sentence_id: usize, source: &str, run_index: usize) -> Result<GenerationRecord, SelectionError> {
        let ids = sample_shots(self.pool, self.prompt.shots, run_index, self.seed)?;
        let shots = ids.iter().map(|id| sample_by_id(self.demos, *id));
        let spec = render(self.prompt, shots, source)?;
        let req = self.gateway.request(self.model, spec, run_index, sentence_id);
        Ok(self.gateway.generate(&req)?)
    }
}

#[derive(Debug, Clone)]
pub struct Attempts {
    pub records: Vec<GenerationRecord>,
    pub success: bool,
}

/// An error that stopped a policy, with the records produced before it.
#[derive(Debug, Clone)]
pub struct PolicyFailure {
    pub error: SelectionError,
    pub records: Vec<GenerationRecord>,
}

impl From<SelectionError> for PolicyFailure {
    fn from(error: SelectionError) -> Self {
        Self {
            error,
            records: Vec::new(),
        }
    }
}

/// Generates one attempt at a time until an output is compliant or `budget` runs out.
pub fn generate_until_compliant(
    setup: &GenerationSetup<'_>,
    sentence_id: usize,
    source: &str,
    budget: usize,
) -> Result<Attempts, PolicyFailure> {
    if budget == 0 {
        return Err(SelectionError::InvalidBudget.into());
    }
    let mut records = Vec::new();
    for run_index in 0..budget {
        match setup.attempt(sentence_id, source, run_index) {
            Ok(rec) => {
                let ok = is_compliant(length_ratio(source, &rec.truncated_output));
                records.push(rec);
                if ok {
                    return Ok(Attempts { records, success: true });
                }
            }
            Err(error) => return Err(PolicyFailure { error, records }),
        }
    }
    Ok(Attempts { records, success: false })
}

#[derive(Debug, Clone)]
pub struct EscalationOutcome {
    pub records: Vec<GenerationRecord>,
    pub success: bool,
    /// Whether the fallback configuration was used.
    pub escalated: bool,
}

/// Default configuration first; after `budget_default` failures, switch to `fallback`.
pub fn escalating_policy(
    default: &GenerationSetup<'_>,
    fallback: &GenerationSetup<'_>,
    sentence_id: usize,
    source: &str,
    budget_default: usize,
    budget_fallback: usize,
) -> Result<EscalationOutcome, PolicyFailure> {
    if budget_default == 0 || budget_fallback == 0 {
        return Err(SelectionError::InvalidBudget.into());
    }
    let first = generate_until_compliant(default, sentence_id, source, budget_default)?;
    if first.success {
        return Ok(EscalationOutcome {
            records: first.records,
            success: true,
            escalated: false,
        });
    }
    let mut records = first.records;
    match generate_until_compliant(fallback, sentence_id, source, budget_fallback) {
        Ok(second) => {
            records.extend(second.records);
            Ok(EscalationOutcome {
                records,
                success: second.success,
                escalated: true,
            })
        }
        Err(mut f) => {
            records.append(&mut f.records);
            Err(PolicyFailure {
                error: f.error,
                records,
            })
        }
    }
}
