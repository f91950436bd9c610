//! Demonstration pools filtered by length ratio, and per-run k-shot sampling.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{is_compliant, mean_and_population_std, ParallelSample};
use crate::rng;

/// Default member cap for the `Same` and `Tiny` pools.
pub const DEFAULT_POOL_CAP: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoolError {
    #[error("{0} pool admits no samples")]
    EmptyPool(PoolType),
    #[error("requested {k} shots from a pool of {size}")]
    PoolTooSmall { k: usize, size: usize },
    #[error("unknown pool type {0:?}")]
    UnknownPoolType(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PoolType {
    Random,
    Isometric,
    Same,
    Short,
    Tiny,
}

impl PoolType {
    pub const ALL: [PoolType; 5] = [
        PoolType::Random,
        PoolType::Isometric,
        PoolType::Same,
        PoolType::Short,
        PoolType::Tiny,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PoolType::Random => "Random",
            PoolType::Isometric => "Isometric",
            PoolType::Same => "Same",
            PoolType::Short => "Short",
            PoolType::Tiny => "Tiny",
        }
    }

    fn stream_id(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for PoolType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PoolType {
    type Err = PoolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PoolType::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| PoolError::UnknownPoolType(s.to_owned()))
    }
}

/// Ratio statistics over pool members, mirroring the columns of a pool summary table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolStats {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub lc: f64,
}

impl PoolStats {
    fn from_ratios(ratios: &[f64]) -> Option<Self> {
        let (mean, std) = mean_and_population_std(ratios)?;
        Some(Self {
            n: ratios.len(),
            min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
            max: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std,
            lc: 100.0 * ratios.iter().filter(|r| is_compliant(**r)).count() as f64
                / ratios.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemonstrationPool {
    pub pool_type: PoolType,
    /// Sample ids. Corpus order for filter pools, selection-key order for capped pools.
    pub members: Vec<usize>,
    pub stats: PoolStats,
}

/// On-disk form written by `build-pools`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub pool_type: PoolType,
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub member_ids: Vec<usize>,
}

impl DemonstrationPool {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn summary(&self) -> PoolSummary {
        PoolSummary {
            pool_type: self.pool_type,
            n: self.stats.n,
            min: self.stats.min,
            max: self.stats.max,
            mean: self.stats.mean,
            std: self.stats.std,
            member_ids: self.members.clone(),
        }
    }
}

/// Builds one pool. `n_cap` only applies to `Same` and `Tiny`.
///
/// Selection keys for `Same` and `Tiny` are compared exactly on the character
/// counts; equal keys are ordered by ascending sample id.
pub fn build_pool(
    samples: &[ParallelSample],
    pool_type: PoolType,
    n_cap: usize,
) -> Result<DemonstrationPool, PoolError> {
    let members: Vec<usize> = match pool_type {
        PoolType::Random => samples.iter().map(|s| s.id).collect(),
        PoolType::Isometric => samples.iter().filter(|s| s.is_compliant()).map(|s| s.id).collect(),
        PoolType::Short => samples
            .iter()
            .filter(|s| (0.0..=1.0).contains(&s.ratio))
            .map(|s| s.id)
            .collect(),
        PoolType::Same => top_by_key(samples, n_cap, |a, b| {
            // |ta/sa - 1| vs |tb/sb - 1| without rounding
            let da = a.tgt_chars.abs_diff(a.src_chars) as u128 * b.src_chars as u128;
            let db = b.tgt_chars.abs_diff(b.src_chars) as u128 * a.src_chars as u128;
            da.cmp(&db)
        }),
        PoolType::Tiny => top_by_key(samples, n_cap, |a, b| {
            (a.tgt_chars as u128 * b.src_chars as u128).cmp(&(b.tgt_chars as u128 * a.src_chars as u128))
        }),
    };
    if members.is_empty() {
        return Err(PoolError::EmptyPool(pool_type));
    }
    let ratios: Vec<f64> = members.iter().map(|id| sample_by_id(samples, *id).ratio).collect();
    let stats = PoolStats::from_ratios(&ratios).expect("non-empty");
    Ok(DemonstrationPool {
        pool_type,
        members,
        stats,
    })
}

/// Builds all five pools in canonical order.
pub fn build_all_pools(
    samples: &[ParallelSample],
    n_cap: usize,
) -> Result<Vec<DemonstrationPool>, PoolError> {
    PoolType::ALL
        .into_iter()
        .map(|p| build_pool(samples, p, n_cap))
        .collect()
}

/// The `cap` smallest samples under `cmp`, ties by ascending id.
fn top_by_key(
    samples: &[ParallelSample],
    cap: usize,
    cmp: impl Fn(&ParallelSample, &ParallelSample) -> Ordering,
) -> Vec<usize> {
    let mut sorted: Vec<&ParallelSample> = samples.iter().collect();
    sorted.sort_by(|a, b| cmp(a, b).then(a.id.cmp(&b.id)));
    sorted.into_iter().take(cap).map(|s| s.id).collect()
}

/// Looks up a sample by id. Corpora loaded from disk have `id == index`.
pub fn sample_by_id(samples: &[ParallelSample], id: usize) -> &ParallelSample {
    match samples.get(id) {
        Some(s) if s.id == id => s,
        _ => samples
            .iter()
            .find(|s| s.id == id)
            .unwrap_or_else(|| panic!("sample id {id} not in corpus")),
    }
}

/// Draws `k` member ids uniformly without replacement, in draw order.
///
/// The stream is keyed by `(seed, pool type, k, run_index)`.
pub fn sample_shots(
    pool: &DemonstrationPool,
    k: usize,
    run_index: usize,
    seed: u64,
) -> Result<Vec<usize>, PoolError> {
    if k > pool.len() {
        return Err(PoolError::PoolTooSmall { k, size: pool.len() });
    }
    let mut rng = rng::stream(seed, &[pool.pool_type.stream_id(), k as u64, run_index as u64]);
    Ok(index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool.members[i])
        .collect())
}
