//! Toolkit for length-controlled translation with prompted language models.
//!
//! The pipeline: load a demonstration corpus ([`corpus`]), filter it into
//! length pools ([`pools`]), render prompts ([`prompt`]), generate through a
//! cached backend ([`gateway`]), clean completions ([`postprocess`]), score
//! them ([`metrics`]), pick among candidates ([`selection`]) and analyse
//! whole run matrices ([`analysis`], [`experiment`]).

pub mod analysis;
pub mod corpus;
pub mod experiment;
pub mod gateway;
pub mod metrics;
pub mod par;
pub mod pools;
pub mod postprocess;
pub mod prompt;
pub mod rng;
pub mod selection;
