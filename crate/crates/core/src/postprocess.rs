//! Overgeneration handling: keep the first line of a completion.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PostprocessError {
    #[error("no records to evaluate")]
    EmptySet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    /// A blank leading line is skipped in favour of the first non-blank line.
    #[default]
    Lenient,
    /// Everything after the first newline is discarded, even if the first line is blank.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncated {
    pub clean: String,
    pub overgenerated: bool,
}

/// `true` iff some newline in `raw` is followed by non-whitespace content.
pub fn is_overgenerated(raw: &str) -> bool {
    match raw.find('\n') {
        Some(i) => raw[i + 1..].chars().any(|c| !c.is_whitespace()),
        None => false,
    }
}

pub fn truncate_output(raw: &str, mode: Truncation) -> Truncated {
    let first = raw.split('\n').next().unwrap_or("").trim();
    let clean = match mode {
        Truncation::Lenient if first.is_empty() => raw
            .split('\n')
            .map(str::trim)
            .find(|l| !l.is_empty())
            .unwrap_or(""),
        _ => first,
    };
    Truncated {
        clean: clean.to_owned(),
        overgenerated: is_overgenerated(raw),
    }
}

/// Percent of outputs that continue past their first line.
pub fn overgeneration_rate<'a, I>(raw_outputs: I) -> Result<f64, PostprocessError>
where
    I: IntoIterator<Item = &'a str>,
{
    let (n, over) = raw_outputs
        .into_iter()
        .fold((0usize, 0usize), |(n, o), r| (n + 1, o + is_overgenerated(r) as usize));
    if n == 0 {
        return Err(PostprocessError::EmptySet);
    }
    Ok(100.0 * over as f64 / n as f64)
}
