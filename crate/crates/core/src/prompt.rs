//! Zero-shot and few-shot completion prompts built from fixed template parts.
//!
//! Parts are joined with a single space, with two exceptions: the bare `.`
//! that closes the uncontrolled zero-shot instruction attaches directly, and a
//! part that ends in a newline is followed directly by the next part. A part
//! that consists of just a newline also attaches directly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ParallelSample;
use crate::pools::PoolType;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("config asks for {expected} shots but {got} demonstrations were given")]
    ShotCountMismatch { expected: usize, got: usize },
    #[error("unknown prompt type {0:?}")]
    UnknownPromptType(String),
}

/// Length instruction wording. `Short` and `Tiny` pools share one wording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptType {
    Random,
    Isometric,
    Same,
    ShortTiny,
}

impl PromptType {
    pub const ALL: [PromptType; 4] = [
        PromptType::Random,
        PromptType::Isometric,
        PromptType::Same,
        PromptType::ShortTiny,
    ];

    /// The instruction that matches a pool's length property.
    pub fn matching(pool: PoolType) -> Self {
        match pool {
            PoolType::Random => PromptType::Random,
            PoolType::Isometric => PromptType::Isometric,
            PoolType::Same => PromptType::Same,
            PoolType::Short | PoolType::Tiny => PromptType::ShortTiny,
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            PromptType::Random => "random",
            PromptType::Isometric => "isometric",
            PromptType::Same => "same",
            PromptType::ShortTiny => "short-tiny",
        }
    }

    fn zero_shot_instruction(self) -> &'static str {
        match self {
            PromptType::Random => ".",
            PromptType::Isometric => {
                "ensuring that it is within ±10% of the character count of the source."
            }
            PromptType::Same => "ensuring that it has the same length as the source.",
            PromptType::ShortTiny => "ensuring that it is shorter than the source.",
        }
    }

    fn few_shot_instruction(self) -> &'static str {
        match self {
            PromptType::Random => "of the source in [src lang]:\n",
            PromptType::Isometric => {
                "that are within ±10% of the character count of the source in [src lang]:\n"
            }
            PromptType::Same => "that have the same length as the source in [src lang]:\n",
            PromptType::ShortTiny => "that are shorter than the source in [src lang]:\n",
        }
    }
}

impl fmt::Display for PromptType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for PromptType {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase();
        match s.as_str() {
            "random" => Ok(PromptType::Random),
            "isometric" => Ok(PromptType::Isometric),
            "same" => Ok(PromptType::Same),
            "short" | "tiny" | "short-tiny" | "shorttiny" | "short/tiny" => Ok(PromptType::ShortTiny),
            _ => Err(PromptError::UnknownPromptType(s)),
        }
    }
}

/// English display name for an ISO 639-1 code, if known.
pub fn language_name(code: &str) -> Option<&'static str> {
    Some(match code.to_ascii_lowercase().as_str() {
        "en" => "English",
        "de" => "German",
        "fr" => "French",
        "es" => "Spanish",
        "it" => "Italian",
        "pt" => "Portuguese",
        "nl" => "Dutch",
        "cs" => "Czech",
        "hi" => "Hindi",
        "ru" => "Russian",
        "zh" => "Chinese",
        "ja" => "Japanese",
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptConfig {
    pub src_lang: String,
    pub tgt_lang: String,
    pub prompt_type: PromptType,
    /// Zero selects the zero-shot template.
    pub shots: usize,
    /// Appends "Output only the translation."
    pub restricted: bool,
    /// When false the instruction is forced to the uncontrolled wording.
    pub matched: bool,
}

impl PromptConfig {
    pub fn new(src_lang: impl Into<String>, tgt_lang: impl Into<String>, prompt_type: PromptType) -> Self {
        Self {
            src_lang: src_lang.into(),
            tgt_lang: tgt_lang.into(),
            prompt_type,
            shots: 0,
            restricted: true,
            matched: true,
        }
    }

    pub fn with_shots(mut self, shots: usize) -> Self {
        self.shots = shots;
        self
    }

    pub fn restricted(mut self, restricted: bool) -> Self {
        self.restricted = restricted;
        self
    }

    pub fn matched(mut self, matched: bool) -> Self {
        self.matched = matched;
        self
    }

    /// The wording actually rendered.
    pub fn instruction(&self) -> PromptType {
        if self.matched {
            self.prompt_type
        } else {
            PromptType::Random
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptSpec {
    pub config: PromptConfig,
    pub demo_ids: Vec<usize>,
    pub text: String,
}

const RESTRICT: &str = "Output only the translation.\n";
const QUERY: &str = "[src lang]: [src sentence]\n[tgt lang]:";

/// Single-pass placeholder substitution; substituted values are never rescanned.
fn fill(template: &str, config: &PromptConfig, src_sentence: &str, tgt_sentence: &str) -> String {
    const KEYS: [&str; 4] = ["[src lang]", "[tgt lang]", "[src sentence]", "[tgt sentence]"];
    let values = [
        config.src_lang.as_str(),
        config.tgt_lang.as_str(),
        src_sentence,
        tgt_sentence,
    ];
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('[') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        match KEYS.iter().position(|k| tail.starts_with(k)) {
            Some(i) => {
                out.push_str(values[i]);
                rest = &tail[KEYS[i].len()..];
            }
            None => {
                out.push('[');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn join(parts: &[String]) -> String {
    let mut out = String::new();
    for part in parts {
        let attach = out.is_empty() || out.ends_with('\n') || part == "." || part.starts_with('\n');
        if !attach {
            out.push(' ');
        }
        out.push_str(part);
    }
    out
}

fn restriction_part(restricted: bool) -> &'static str {
    if restricted {
        RESTRICT
    } else {
        "\n"
    }
}

pub fn render_zero_shot(config: &PromptConfig, source_sentence: &str) -> Result<PromptSpec, PromptError> {
    if config.shots != 0 {
        return Err(PromptError::ShotCountMismatch {
            expected: config.shots,
            got: 0,
        });
    }
    let src = source_sentence.trim();
    let parts = [
        "Translate the following text from [src lang] into [tgt lang]",
        config.instruction().zero_shot_instruction(),
        restriction_part(config.restricted),
        QUERY,
    ]
    .map(|p| fill(p, config, src, ""));
    Ok(PromptSpec {
        config: config.clone(),
        demo_ids: Vec::new(),
        text: join(&parts),
    })
}

pub fn render_few_shot<'a, I>(
    config: &PromptConfig,
    demos: I,
    source_sentence: &str,
) -> Result<PromptSpec, PromptError>
where
    I: IntoIterator<Item = &'a ParallelSample>,
{
    let demos: Vec<&ParallelSample> = demos.into_iter().collect();
    if config.shots == 0 || config.shots != demos.len() {
        return Err(PromptError::ShotCountMismatch {
            expected: config.shots,
            got: demos.len(),
        });
    }
    let src = source_sentence.trim();
    let mut parts = vec![
        fill("Here are examples of translations in [tgt lang]", config, src, ""),
        fill(config.instruction().few_shot_instruction(), config, src, ""),
    ];
    let block = "[src lang]: [src sentence]\n[tgt lang]: [tgt sentence]\n";
    parts.push(
        demos
            .iter()
            .map(|d| fill(block, config, d.source.trim(), d.target.trim()))
            .collect(),
    );
    parts.push("Provide translation for the following sentence given the examples above.".into());
    parts.push(restriction_part(config.restricted).into());
    parts.push(fill(QUERY, config, src, ""));
    Ok(PromptSpec {
        config: config.clone(),
        demo_ids: demos.iter().map(|d| d.id).collect(),
        text: join(&parts),
    })
}

/// Dispatches on `config.shots`.
pub fn render<'a, I>(config: &PromptConfig, demos: I, source_sentence: &str) -> Result<PromptSpec, PromptError>
where
    I: IntoIterator<Item = &'a ParallelSample>,
{
    if config.shots == 0 {
        let extra = demos.into_iter().count();
        if extra != 0 {
            return Err(PromptError::ShotCountMismatch { expected: 0, got: extra });
        }
        render_zero_shot(config, source_sentence)
    } else {
        render_few_shot(config, demos, source_sentence)
    }
}

/// The source sentence of the final query in a rendered prompt, if the prompt
/// has the standard `[src lang]: ...\n[tgt lang]:` ending.
pub fn query_source(prompt: &str) -> Option<&str> {
    let body = prompt.strip_suffix(':')?;
    let cue_start = body.rfind('\n')?;
    let before = &body[..cue_start];
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let line = &before[line_start..];
    line.split_once(": ").map(|(_, s)| s)
}
