//! Paired two-sided tests on per-sentence values.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::par::{self, Execution};
use crate::rng;

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 0x15_0F_0A_6E;

/// Resamples per independently seeded block.
const BLOCK: usize = 500;
/// Permuted statistics within this distance of the observed one count as ties.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    #[default]
    Permutation,
    T,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::Permutation => "permutation",
            TestKind::T => "t",
        })
    }
}

impl FromStr for TestKind {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "permutation" | "perm" => Ok(TestKind::Permutation),
            "t" | "t-test" | "ttest" => Ok(TestKind::T),
            _ => Err(AnalysisError::UnknownTest(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub kind: TestKind,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for PairedTest {
    fn default() -> Self {
        Self {
            kind: TestKind::Permutation,
            resamples: DEFAULT_RESAMPLES,
            seed: DEFAULT_SEED,
        }
    }
}

impl PairedTest {
    pub fn run(&self, exec: Execution, a: &[f64], b: &[f64]) -> Result<TestResult, AnalysisError> {
        match self.kind {
            TestKind::Permutation => permutation_test(exec, a, b, self.resamples, self.seed),
            TestKind::T => paired_t_test(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Mean of `a[i] - b[i]`.
    pub mean_diff: f64,
    pub p_value: f64,
    pub n: usize,
    /// All sign patterns were enumerated.
    pub exact: bool,
}

fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::SentenceSetMismatch(format!("{} vs {} values", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

/// Sign-flip test of mean difference zero.
///
/// Enumerates all `2^n` sign patterns when that is at most `resamples`
/// (p = hits / 2^n); otherwise draws `resamples` random patterns and returns
/// `(hits + 1) / (resamples + 1)`. Blocks of draws have their own derived
/// seeds, so the result does not depend on `exec`.
pub fn permutation_test(
    exec: Execution,
    a: &[f64],
    b: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<TestResult, AnalysisError> {
    let d = differences(a, b)?;
    let n = d.len();
    let observed = d.iter().sum::<f64>() / n as f64;
    let threshold = observed.abs() - TIE_EPS;
    let flipped_mean = |signs: &mut dyn FnMut(usize) -> bool| {
        let s: f64 = d.iter().enumerate().map(|(i, x)| if signs(i) { -x } else { *x }).sum();
        (s / n as f64).abs()
    };

    if n < 63 && (1u64 << n) <= resamples as u64 {
        let total = 1u64 << n;
        let blocks = total.div_ceil(BLOCK as u64) as usize;
        let hits: u64 = par::map_range(exec, blocks, |blk| {
            let start = blk as u64 * BLOCK as u64;
            let end = (start + BLOCK as u64).min(total);
            (start..end)
                .filter(|mask| flipped_mean(&mut |i| mask >> i & 1 == 1) >= threshold)
                .count() as u64
        })
        .into_iter()
        .sum();
        return Ok(TestResult {
            mean_diff: observed,
            p_value: hits as f64 / total as f64,
            n,
            exact: true,
        });
    }

    let blocks = resamples.div_ceil(BLOCK);
    let hits: usize = par::map_range(exec, blocks, |blk| {
        let mut r = rng::stream(seed, &[blk as u64]);
        let count = BLOCK.min(resamples - blk * BLOCK);
        let mut signs = vec![false; n];
        (0..count)
            .filter(|_| {
                signs.iter_mut().for_each(|s| *s = r.random());
                flipped_mean(&mut |i| signs[i]) >= threshold
            })
            .count()
    })
    .into_iter()
    .sum();
    Ok(TestResult {
        mean_diff: observed,
        p_value: (hits + 1) as f64 / (resamples + 1) as f64,
        n,
        exact: false,
    })
}

/// Two-sided paired t-test.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TestResult, AnalysisError> {
    let d = differences(a, b)?;
    let n = d.len();
    let mean = d.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Err(AnalysisError::EmptyInput);
    }
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let p_value = if var == 0.0 {
        if mean == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        let t = mean / (var / n as f64).sqrt();
        let df = (n - 1) as f64;
        incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    };
    Ok(TestResult {
        mean_diff: mean,
        p_value,
        n,
        exact: true,
    })
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let s = C[1..].iter().enumerate().fold(C[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        for aa in [m * (b - m) * x / ((qam + m2) * (a + m2)), -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))] {
            d = 1.0 + aa * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + aa / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
        }
        if (d * c - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_inputs_give_p_one() {
        let a: Vec<f64> = (0..50).map(|i| i as f64 / 50.0).collect();
        let r = permutation_test(Execution::default(), &a, &a, 2000, 1).unwrap();
        assert_eq!((r.p_value, r.mean_diff), (1.0, 0.0));
        assert_eq!(paired_t_test(&a, &a).unwrap().p_value, 1.0);
    }

    #[test]
    fn exact_small_case() {
        // d = [1, 1]: patterns ++ and -- reach |mean| = 1
        let r = permutation_test(Execution::default(), &[1.0, 1.0], &[0.0, 0.0], 100, 0).unwrap();
        assert!(r.exact);
        assert_eq!(r.p_value, 0.5);
    }

    #[test]
    fn incomplete_beta_values() {
        assert!((incomplete_beta(1.0, 1.0, 0.3) - 0.3).abs() < 1e-14);
        assert!((incomplete_beta(2.0, 3.0, 0.4) - 0.5248).abs() < 1e-12);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sequential_equals_parallel() {
        let a: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.11).cos() * 0.2).collect();
        let s = permutation_test(Execution::Sequential, &a, &b, 3000, 9).unwrap();
        let p = permutation_test(Execution::Parallel, &a, &b, 3000, 9).unwrap();
        assert_eq!(s, p);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            permutation_test(Execution::default(), &[1.0], &[], 10, 0),
            Err(AnalysisError::SentenceSetMismatch(_))
        ));
    }
}
